#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "protomem/error.hpp"
#include "protomem/fitting.hpp"
#include "protomem/rotations.hpp"
#include "test_util.hpp"

using namespace protomem;
using testutil::max_abs_diff;

namespace {

// A problem whose targets come from known ground-truth parameters.
FitProblem problem_for(const BodyModel& model, const BodyParams& truth,
                       const CameraParams& cam, bool with_2d = true) {
  FitProblem problem;
  const ForwardResult fwd = forward(model, truth);
  const Joints3D joints = regress_joints(model, fwd.vertices);
  problem.target_j3d = joints;
  if (with_2d) problem.target_j2d = project(joints, cam);
  return problem;
}

}  // namespace

TEST_CASE("weak perspective projection") {
  Joints3D j3d = Joints3D::Zero();
  j3d.row(0) << 0.5, 0.5, 3.0;
  j3d.row(1) << -0.2, 0.1, -7.0;

  CameraParams ident;
  const Keypoints2D plain = project(j3d, ident);
  CHECK(plain(0, 0) == 0.5);
  CHECK(plain(0, 1) == 0.5);

  CameraParams cam;
  cam.s = 2.0;
  cam.t = Vec2(0.1, -0.1);
  const Keypoints2D scaled = project(j3d, cam);
  CHECK(scaled(0, 0) == doctest::Approx(1.1).epsilon(1e-12));
  CHECK(scaled(0, 1) == doctest::Approx(0.9).epsilon(1e-12));

  // Depth never matters.
  Joints3D deeper = j3d;
  deeper.col(2).array() += 123.0;
  CHECK(max_abs_diff(project(deeper, cam), scaled) == 0.0);
}

TEST_CASE("loss terms") {
  const BodyModel model = gen_toy_model(0, 4);
  std::mt19937_64 rng(61);
  const BodyParams truth = testutil::random_params(rng, 0.5, 0.5);
  CameraParams cam;

  SUBCASE("all terms vanish at the target") {
    FitProblem problem = problem_for(model, truth, cam);
    problem.target_pose = truth.pose;
    problem.target_shape = truth.shape;
    const LossTerms terms = loss_terms(truth, cam, model, problem);
    CHECK(terms.j3d == 0.0);
    CHECK(terms.j2d == 0.0);
    CHECK(terms.theta == 0.0);
    CHECK(terms.beta == 0.0);
    CHECK(terms.cls == 0.0);
  }

  SUBCASE("single visible joint offset in 2D") {
    FitProblem problem = problem_for(model, truth, cam);
    problem.target_j3d.reset();
    (*problem.target_j2d)(5, 0) += 0.1;
    const LossTerms terms = loss_terms(truth, cam, model, problem);
    CHECK(terms.j2d == doctest::Approx(0.01).epsilon(1e-12));

    // Hiding that joint removes its contribution.
    problem.visibility(5) = 0.0;
    const LossTerms hidden = loss_terms(truth, cam, model, problem);
    CHECK(hidden.j2d == 0.0);
  }

  SUBCASE("classification term") {
    FitProblem problem = problem_for(model, truth, cam);
    ScoreVector label = ScoreVector::Zero(50);
    label(7) = 1.0;
    problem.target_label = label;

    // Without a supplied score the term is zero.
    CHECK(loss_terms(truth, cam, model, problem).cls == 0.0);

    ScoreVector match = label;
    CHECK(loss_terms(truth, cam, model, problem, &match).cls == 0.0);

    ScoreVector uniform = ScoreVector::Constant(50, 1.0 / 50.0);
    const LossTerms terms = loss_terms(truth, cam, model, problem, &uniform);
    CHECK(terms.cls == doctest::Approx(3.912023005428146).epsilon(1e-12));
  }

  SUBCASE("negative visibility is rejected") {
    FitProblem problem = problem_for(model, truth, cam);
    problem.visibility(0) = -1.0;
    CHECK_THROWS_AS(loss_terms(truth, cam, model, problem), Error);
  }

  SUBCASE("a problem needs at least one target") {
    FitProblem empty;
    CHECK_THROWS_AS(empty.validate(), Error);
  }
}

TEST_CASE("total loss uses the reference weights") {
  LossTerms terms;
  CHECK(total_loss(terms, LossWeights{}) == 0.0);

  terms.j3d = 1.0;
  CHECK(total_loss(terms, LossWeights{}) == 5.0);
  terms.j3d = 0.0;
  terms.j2d = 1.0;
  CHECK(total_loss(terms, LossWeights{}) == 5.0);
  terms.j2d = 0.0;
  terms.theta = 1.0;
  CHECK(total_loss(terms, LossWeights{}) == 1.0);
  terms.theta = 0.0;
  terms.beta = 1.0;
  CHECK(total_loss(terms, LossWeights{}) == 1e-3);
  terms.beta = 0.0;
  terms.cls = 1.0;
  CHECK(total_loss(terms, LossWeights{}) == 1.0);

  // Linear in each term at fixed others.
  LossTerms mixed;
  mixed.j3d = 2.0;
  mixed.theta = 3.0;
  LossWeights w;
  CHECK(total_loss(mixed, w) == doctest::Approx(5.0 * 2.0 + 3.0));

  LossWeights negative;
  negative.j2d = -1.0;
  CHECK_THROWS_AS(total_loss(mixed, negative), Error);
}

TEST_CASE("fit at the optimum stays put") {
  const BodyModel model = gen_toy_model(0, 4);
  std::mt19937_64 rng(62);
  const BodyParams truth = testutil::random_params(rng, 0.4, 0.4);
  const CameraParams cam;
  const FitProblem problem = problem_for(model, truth, cam);

  const FitReport report = fit(truth, cam, model, problem, 3, 1e-3);
  for (double loss : report.trace) CHECK(loss == 0.0);
  CHECK(max_abs_diff(report.params.flatten(), truth.flatten()) == 0.0);
  CHECK(report.trace.size() == static_cast<size_t>(report.iterations) + 1);
}

TEST_CASE("quadratic shape-only objective descends monotonically") {
  const BodyModel model = gen_toy_model(0, 4);
  FitProblem problem;
  ShapeVec target = ShapeVec::Zero();
  target(2) = 0.7;
  target(8) = -0.4;
  problem.target_shape = target;

  BodyParams init = BodyParams::identity();
  const FitReport report = fit(init, CameraParams{}, model, problem, 40, 100.0);
  for (size_t i = 1; i < report.trace.size(); ++i) {
    CHECK(report.trace[i] <= report.trace[i - 1]);
    if (report.trace[i - 1] > 1e-14) {
      CHECK(report.trace[i] < report.trace[i - 1]);
    }
  }
  CHECK(report.trace.back() < 1e-8);
  CHECK(max_abs_diff(report.params.shape, target) < 1e-4);
}

TEST_CASE("descent reduces a pose discrepancy") {
  const BodyModel model = gen_toy_model(0, 4);
  std::mt19937_64 rng(63);
  const BodyParams truth = testutil::random_params(rng, 0.5, 0.3);
  const FitProblem problem = problem_for(model, truth, CameraParams{}, false);

  BodyParams init = truth;
  // Perturb two joints away from the target.
  init.set_pose_block(18, rotmat_to_rot6d(rot6d_to_rotmat(init.pose_block(18)) *
                                          axis_angle_to_rotmat(Vec3(0, 0, 0.3))));
  init.set_pose_block(4, rotmat_to_rot6d(rot6d_to_rotmat(init.pose_block(4)) *
                                         axis_angle_to_rotmat(Vec3(0.2, 0, 0))));
  const double initial =
      fit_objective(pack_fit_vector(init, CameraParams{}), model, problem);
  const FitReport report = fit(init, CameraParams{}, model, problem, 25, 0.5);
  CHECK(report.trace.back() < 0.2 * initial);
}

TEST_CASE("finite-difference gradient matches an independent oracle") {
  const BodyModel model = gen_toy_model(0, 4);
  std::mt19937_64 rng(64);
  for (int trial = 0; trial < 5; ++trial) {
    const BodyParams truth = testutil::random_params(rng, 0.5, 0.5);
    BodyParams start = testutil::random_params(rng, 0.5, 0.5);
    const FitProblem problem = problem_for(model, truth, CameraParams{});
    const Eigen::VectorXd x = pack_fit_vector(start, CameraParams{});

    const Eigen::VectorXd grad = fit_gradient(x, model, problem);
    // Oracle: central differences at a different step size.
    constexpr double h = 1e-6;
    Eigen::VectorXd oracle(kFitDim);
    for (int i = 0; i < kFitDim; ++i) {
      Eigen::VectorXd probe = x;
      probe(i) = x(i) + h;
      const double fp = fit_objective(probe, model, problem);
      probe(i) = x(i) - h;
      const double fm = fit_objective(probe, model, problem);
      oracle(i) = (fp - fm) / (2.0 * h);
    }
    const double rel = (grad - oracle).norm() /
                       std::max({grad.norm(), oracle.norm(), 1e-12});
    CHECK(rel < 1e-4);

    const Eigen::VectorXd serial = fit_gradient_serial(x, model, problem);
    CHECK(max_abs_diff(grad, serial) == 0.0);
  }
}

TEST_CASE("fit input validation and divergence") {
  const BodyModel model = gen_toy_model(0, 4);
  std::mt19937_64 rng(65);
  const BodyParams truth = testutil::random_params(rng, 0.3, 0.3);
  const FitProblem problem = problem_for(model, truth, CameraParams{});

  CHECK_THROWS_AS(fit(truth, CameraParams{}, model, problem, 0, 1e-2), Error);
  CHECK_THROWS_AS(fit(truth, CameraParams{}, model, problem, 3, 0.0), Error);
  CameraParams bad_cam;
  bad_cam.s = -1.0;
  CHECK_THROWS_AS(fit(truth, bad_cam, model, problem, 3, 1e-2), Error);

  // An undecodable initial pose block surfaces as divergence.
  BodyParams broken = truth;
  Rot6d zeros = Rot6d::Zero();
  broken.set_pose_block(0, zeros);
  try {
    fit(broken, CameraParams{}, model, problem, 3, 1e-2);
    FAIL("expected fit-diverged error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::FitDiverged);
  }
}

TEST_CASE("problem files round trip") {
  testutil::TempDir tmp("problem_io");
  const BodyModel model = gen_toy_model(0, 4);
  std::mt19937_64 rng(66);

  std::vector<FitProblem> problems;
  FitProblem full = problem_for(model, testutil::random_params(rng, 0.4, 0.4),
                                CameraParams{});
  full.visibility(3) = 0.0;
  full.weights.beta = 0.5;
  problems.push_back(full);

  FitProblem sparse;
  sparse.target_shape = ShapeVec::Constant(0.25);
  problems.push_back(sparse);

  const std::string path = tmp.path("problems.jsonl");
  save_problems(problems, path);
  const auto back = load_problems(path);
  REQUIRE(back.size() == 2);
  CHECK(max_abs_diff(*back[0].target_j3d, *problems[0].target_j3d) == 0.0);
  CHECK(max_abs_diff(*back[0].target_j2d, *problems[0].target_j2d) == 0.0);
  CHECK(back[0].visibility(3) == 0.0);
  CHECK(back[0].weights.beta == 0.5);
  CHECK(!back[1].target_j3d.has_value());
  CHECK(max_abs_diff(*back[1].target_shape, *problems[1].target_shape) == 0.0);
}
