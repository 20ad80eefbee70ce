#include "protomem/fitting.hpp"

#include <cmath>
#include <fstream>
#include <limits>

#include <nlohmann/json.hpp>

#include "protomem/error.hpp"

namespace protomem {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

template <typename Derived>
nlohmann::json matrix_to_rows(const Eigen::MatrixBase<Derived>& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

void CameraParams::validate() const {
  if (!(s > 0.0) || !t.allFinite()) {
    throw Error(ErrorKind::InvalidInput, "camera: scale must be positive");
  }
}

void LossWeights::validate() const {
  for (double w : {j3d, j2d, theta, beta, cls}) {
    if (!(w >= 0.0)) {
      throw Error(ErrorKind::InvalidInput, "loss weights must be >= 0");
    }
  }
}

void FitProblem::validate() const {
  if (!target_j3d && !target_j2d && !target_pose && !target_shape &&
      !target_label) {
    throw Error(ErrorKind::InvalidInput, "fit problem: no target present");
  }
  if (visibility.minCoeff() < 0.0) {
    throw Error(ErrorKind::InvalidInput, "fit problem: negative visibility");
  }
  weights.validate();
}

Keypoints2D project(const Joints3D& j3d, const CameraParams& cam) {
  Keypoints2D out;
  out.col(0) = cam.s * j3d.col(0).array() + cam.t.x();
  out.col(1) = cam.s * j3d.col(1).array() + cam.t.y();
  return out;
}

LossTerms loss_terms(const BodyParams& params, const CameraParams& cam,
                     const BodyModel& model, const FitProblem& problem,
                     const ScoreVector* score) {
  problem.validate();
  LossTerms terms;
  if (problem.target_pose) {
    terms.theta = (params.pose - *problem.target_pose).squaredNorm();
  }
  if (problem.target_shape) {
    terms.beta = (params.shape - *problem.target_shape).squaredNorm();
  }
  if (problem.target_j3d || problem.target_j2d) {
    const ForwardResult fwd = forward(model, params);
    const Joints3D joints = regress_joints(model, fwd.vertices);
    if (problem.target_j3d) {
      terms.j3d = (joints - *problem.target_j3d).squaredNorm();
    }
    if (problem.target_j2d) {
      const Keypoints2D projected = project(joints, cam);
      const Keypoints2D diff = projected - *problem.target_j2d;
      terms.j2d = (diff.array().colwise() * problem.visibility.array())
                      .matrix()
                      .squaredNorm();
    }
  }
  if (problem.target_label && score != nullptr) {
    const ScoreVector& label = *problem.target_label;
    if (label.size() != score->size()) {
      throw Error(ErrorKind::InvalidInput, "loss: label/score length mismatch");
    }
    double cls = 0.0;
    for (Eigen::Index i = 0; i < label.size(); ++i) {
      if (label(i) != 0.0) cls -= label(i) * std::log((*score)(i));
    }
    terms.cls = cls;
  }
  return terms;
}

double total_loss(const LossTerms& terms, const LossWeights& weights) {
  weights.validate();
  return weights.j3d * terms.j3d + weights.j2d * terms.j2d +
         weights.theta * terms.theta + weights.beta * terms.beta +
         weights.cls * terms.cls;
}

Eigen::VectorXd pack_fit_vector(const BodyParams& params,
                                const CameraParams& cam) {
  Eigen::VectorXd x(kFitDim);
  x.head<kPoseDim>() = params.pose;
  x.segment<kShapeDim>(kPoseDim) = params.shape;
  x(kParamDim) = cam.s;
  x(kParamDim + 1) = cam.t.x();
  x(kParamDim + 2) = cam.t.y();
  return x;
}

void unpack_fit_vector(const Eigen::VectorXd& x, BodyParams& params,
                       CameraParams& cam) {
  if (x.size() != kFitDim) {
    throw Error(ErrorKind::InvalidInput, "fit vector: expected 157 entries");
  }
  params.pose = x.head<kPoseDim>();
  params.shape = x.segment<kShapeDim>(kPoseDim);
  cam.s = x(kParamDim);
  cam.t = Vec2(x(kParamDim + 1), x(kParamDim + 2));
}

double fit_objective(const Eigen::VectorXd& x, const BodyModel& model,
                     const FitProblem& problem) {
  if (x.size() != kFitDim || !x.allFinite()) return kInf;
  if (!(x(kParamDim) > 0.0)) return kInf;  // camera scale
  BodyParams params;
  CameraParams cam;
  params.pose = x.head<kPoseDim>();
  params.shape = x.segment<kShapeDim>(kPoseDim);
  cam.s = x(kParamDim);
  cam.t = Vec2(x(kParamDim + 1), x(kParamDim + 2));
  try {
    const double loss = total_loss(loss_terms(params, cam, model, problem),
                                   problem.weights);
    return std::isfinite(loss) ? loss : kInf;
  } catch (const Error&) {
    // Undecodable pose block on a trial point; treat as an infeasible step.
    return kInf;
  }
}

namespace {

Eigen::VectorXd fd_gradient(const Eigen::VectorXd& x, const BodyModel& model,
                            const FitProblem& problem, bool parallel) {
  constexpr double kStep = 1e-5;
  Eigen::VectorXd grad(kFitDim);
  auto one_coord = [&](int i) {
    Eigen::VectorXd probe = x;
    probe(i) = x(i) + kStep;
    const double f_plus = fit_objective(probe, model, problem);
    probe(i) = x(i) - kStep;
    const double f_minus = fit_objective(probe, model, problem);
    const double d = (f_plus - f_minus) / (2.0 * kStep);
    // A perturbation that leaves the feasible set reads as flat.
    grad(i) = std::isfinite(d) ? d : 0.0;
  };
  if (parallel) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < kFitDim; ++i) one_coord(i);
  } else {
    for (int i = 0; i < kFitDim; ++i) one_coord(i);
  }
  return grad;
}

}  // namespace

Eigen::VectorXd fit_gradient(const Eigen::VectorXd& x, const BodyModel& model,
                             const FitProblem& problem) {
  return fd_gradient(x, model, problem, true);
}

Eigen::VectorXd fit_gradient_serial(const Eigen::VectorXd& x,
                                    const BodyModel& model,
                                    const FitProblem& problem) {
  return fd_gradient(x, model, problem, false);
}

FitReport fit(const BodyParams& init, const CameraParams& init_cam,
              const BodyModel& model, const FitProblem& problem, int iters,
              double step) {
  if (iters < 1) throw Error(ErrorKind::InvalidInput, "fit: iters must be >= 1");
  if (!(step > 0.0)) throw Error(ErrorKind::InvalidInput, "fit: step must be > 0");
  init_cam.validate();
  problem.validate();

  Eigen::VectorXd x = pack_fit_vector(init, init_cam);
  double fx = fit_objective(x, model, problem);
  FitReport report;
  report.trace.push_back(fx);
  if (!std::isfinite(fx)) {
    throw Error(ErrorKind::FitDiverged, "fit: initial loss is non-finite");
  }

  Eigen::VectorXd best_x = x;
  double best_f = fx;
  for (int iter = 0; iter < iters; ++iter) {
    const Eigen::VectorXd grad = fit_gradient(x, model, problem);
    double trial_step = step;
    bool accepted = false;
    for (int halving = 0; halving <= 20; ++halving) {
      const Eigen::VectorXd candidate = x - trial_step * grad;
      const double fc = fit_objective(candidate, model, problem);
      if (fc < fx) {
        x = candidate;
        fx = fc;
        accepted = true;
        break;
      }
      trial_step *= 0.5;
    }
    report.trace.push_back(fx);
    if (fx < best_f) {
      best_f = fx;
      best_x = x;
    }
    if (!accepted) break;  // no descent direction left at this scale
  }

  report.iterations = static_cast<int>(report.trace.size()) - 1;
  unpack_fit_vector(best_x, report.params, report.cam);
  report.final_terms = loss_terms(report.params, report.cam, model, problem);
  return report;
}

nlohmann::json problem_to_json(const FitProblem& problem) {
  nlohmann::json j = nlohmann::json::object();
  if (problem.target_j3d) j["target_j3d"] = matrix_to_rows(*problem.target_j3d);
  if (problem.target_j2d) j["target_j2d"] = matrix_to_rows(*problem.target_j2d);
  nlohmann::json vis = nlohmann::json::array();
  for (int i = 0; i < kNumJoints; ++i) vis.push_back(problem.visibility(i));
  j["visibility"] = std::move(vis);
  if (problem.target_pose) {
    nlohmann::json pose = nlohmann::json::array();
    for (int i = 0; i < kPoseDim; ++i) pose.push_back((*problem.target_pose)(i));
    j["target_pose"] = std::move(pose);
  }
  if (problem.target_shape) {
    nlohmann::json shape = nlohmann::json::array();
    for (int i = 0; i < kShapeDim; ++i) shape.push_back((*problem.target_shape)(i));
    j["target_shape"] = std::move(shape);
  }
  if (problem.target_label) {
    nlohmann::json label = nlohmann::json::array();
    for (Eigen::Index i = 0; i < problem.target_label->size(); ++i) {
      label.push_back((*problem.target_label)(i));
    }
    j["target_label"] = std::move(label);
  }
  j["weights"] = {{"j3d", problem.weights.j3d},
                  {"j2d", problem.weights.j2d},
                  {"theta", problem.weights.theta},
                  {"beta", problem.weights.beta},
                  {"cls", problem.weights.cls}};
  return j;
}

FitProblem problem_from_json(const nlohmann::json& j) {
  FitProblem problem;
  try {
    if (j.contains("target_j3d")) {
      const auto& rows = j.at("target_j3d");
      if (rows.size() != kNumJoints) {
        throw Error(ErrorKind::LoadError, "target_j3d: expected 24 rows");
      }
      Joints3D m;
      for (int i = 0; i < kNumJoints; ++i)
        for (int c = 0; c < 3; ++c) m(i, c) = rows.at(i).at(c).get<double>();
      problem.target_j3d = m;
    }
    if (j.contains("target_j2d")) {
      const auto& rows = j.at("target_j2d");
      if (rows.size() != kNumJoints) {
        throw Error(ErrorKind::LoadError, "target_j2d: expected 24 rows");
      }
      Keypoints2D m;
      for (int i = 0; i < kNumJoints; ++i)
        for (int c = 0; c < 2; ++c) m(i, c) = rows.at(i).at(c).get<double>();
      problem.target_j2d = m;
    }
    if (j.contains("visibility")) {
      const auto& vis = j.at("visibility");
      if (vis.size() != kNumJoints) {
        throw Error(ErrorKind::LoadError, "visibility: expected 24 entries");
      }
      for (int i = 0; i < kNumJoints; ++i) {
        problem.visibility(i) = vis.at(i).get<double>();
      }
    }
    if (j.contains("target_pose")) {
      const auto& pose = j.at("target_pose");
      if (pose.size() != kPoseDim) {
        throw Error(ErrorKind::LoadError, "target_pose: expected 144 entries");
      }
      PoseVec p;
      for (int i = 0; i < kPoseDim; ++i) p(i) = pose.at(i).get<double>();
      problem.target_pose = p;
    }
    if (j.contains("target_shape")) {
      const auto& shape = j.at("target_shape");
      if (shape.size() != kShapeDim) {
        throw Error(ErrorKind::LoadError, "target_shape: expected 10 entries");
      }
      ShapeVec s;
      for (int i = 0; i < kShapeDim; ++i) s(i) = shape.at(i).get<double>();
      problem.target_shape = s;
    }
    if (j.contains("target_label")) {
      const auto& label = j.at("target_label");
      ScoreVector c(label.size());
      for (size_t i = 0; i < label.size(); ++i) c(i) = label.at(i).get<double>();
      problem.target_label = c;
    }
    if (j.contains("weights")) {
      const auto& w = j.at("weights");
      problem.weights.j3d = w.value("j3d", problem.weights.j3d);
      problem.weights.j2d = w.value("j2d", problem.weights.j2d);
      problem.weights.theta = w.value("theta", problem.weights.theta);
      problem.weights.beta = w.value("beta", problem.weights.beta);
      problem.weights.cls = w.value("cls", problem.weights.cls);
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::LoadError, std::string("problem parse: ") + e.what());
  }
  problem.validate();
  return problem;
}

void save_problems(const std::vector<FitProblem>& problems,
                   const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::Io, "cannot write problem file: " + path);
  for (const FitProblem& p : problems) out << problem_to_json(p).dump() << "\n";
  if (!out) throw Error(ErrorKind::Io, "write failed: " + path);
}

std::vector<FitProblem> load_problems(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open problem file: " + path);
  std::vector<FitProblem> problems;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      problems.push_back(problem_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::LoadError, "problem file line " +
                                            std::to_string(line_no) + ": " +
                                            e.what());
    }
  }
  return problems;
}

}  // namespace protomem
