#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "protomem/body_model.hpp"
#include "protomem/prototype_memory.hpp"
#include "protomem/types.hpp"

namespace protomem {

// Weak perspective camera: scale plus image-plane translation, depth
// ignored.
struct CameraParams {
  double s = 1.0;
  Vec2 t = Vec2::Zero();

  void validate() const;
};

struct LossWeights {
  double j3d = 5.0;
  double j2d = 5.0;
  double theta = 1.0;
  double beta = 1e-3;
  double cls = 1.0;

  void validate() const;
};

struct FitProblem {
  std::optional<Joints3D> target_j3d;
  std::optional<Keypoints2D> target_j2d;
  Eigen::Matrix<double, kNumJoints, 1> visibility =
      Eigen::Matrix<double, kNumJoints, 1>::Ones();
  std::optional<PoseVec> target_pose;
  std::optional<ShapeVec> target_shape;
  std::optional<ScoreVector> target_label;
  LossWeights weights;

  // At least one target must be present; visibility must be nonnegative.
  void validate() const;
};

struct LossTerms {
  double theta = 0.0;
  double beta = 0.0;
  double j3d = 0.0;
  double j2d = 0.0;
  double cls = 0.0;
};

// Per-joint (s*x + t_x, s*y + t_y); z is discarded.
Keypoints2D project(const Joints3D& j3d, const CameraParams& cam);

// Squared-error terms against the problem's targets; absent targets
// contribute zero. The classification term needs both the problem's label
// and an externally supplied score. Model joints are regressed from the
// skinned vertices.
LossTerms loss_terms(const BodyParams& params, const CameraParams& cam,
                     const BodyModel& model, const FitProblem& problem,
                     const ScoreVector* score = nullptr);

double total_loss(const LossTerms& terms, const LossWeights& weights);

struct FitReport {
  BodyParams params;
  CameraParams cam;
  std::vector<double> trace;  // length = iterations + 1, initial loss first
  int iterations = 0;
  LossTerms final_terms;
};

// The 157-dimensional optimization vector: pose (144), shape (10), then
// camera (s, t_x, t_y).
constexpr int kFitDim = kParamDim + 3;
Eigen::VectorXd pack_fit_vector(const BodyParams& params,
                                const CameraParams& cam);
void unpack_fit_vector(const Eigen::VectorXd& x, BodyParams& params,
                       CameraParams& cam);

// Weighted total loss at a raw fit vector; +inf when the pose does not
// decode or the camera scale is nonpositive.
double fit_objective(const Eigen::VectorXd& x, const BodyModel& model,
                     const FitProblem& problem);

// Central finite differences with h = 1e-5 across all 157 coordinates.
// The parallel version writes one slot per coordinate and is identical to
// the serial one at any thread count.
Eigen::VectorXd fit_gradient(const Eigen::VectorXd& x, const BodyModel& model,
                             const FitProblem& problem);
Eigen::VectorXd fit_gradient_serial(const Eigen::VectorXd& x,
                                    const BodyModel& model,
                                    const FitProblem& problem);

// First-order descent on the total loss with per-iteration backtracking
// (halving, at most 20 per iteration). Returns the best-loss iterate.
// Throws FitDiverged when the loss turns non-finite.
FitReport fit(const BodyParams& init, const CameraParams& init_cam,
              const BodyModel& model, const FitProblem& problem, int iters,
              double step);

nlohmann::json problem_to_json(const FitProblem& problem);
FitProblem problem_from_json(const nlohmann::json& j);
// JSON Lines, one problem per line, optional fields omitted.
void save_problems(const std::vector<FitProblem>& problems,
                   const std::string& path);
std::vector<FitProblem> load_problems(const std::string& path);

}  // namespace protomem
