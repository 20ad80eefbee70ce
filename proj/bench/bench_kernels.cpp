// Timing comparison between the serial reference kernels and their
// OpenMP counterparts: batch assignment and finite-difference gradients.
// Results must match bitwise; speed is the only difference.

#include <omp.h>

#include <chrono>
#include <cstdio>
#include <random>
#include <vector>

#include "protomem/body_model.hpp"
#include "protomem/clustering.hpp"
#include "protomem/dataset.hpp"
#include "protomem/distance.hpp"
#include "protomem/fitting.hpp"

using namespace protomem;

namespace {

double now_ms() {
  return std::chrono::duration<double, std::milli>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

template <typename F>
double time_ms(F&& f, int repeats) {
  // One warmup, then the best of `repeats`.
  f();
  double best = 1e300;
  for (int r = 0; r < repeats; ++r) {
    const double t0 = now_ms();
    f();
    best = std::min(best, now_ms() - t0);
  }
  return best;
}

}  // namespace

int main() {
  const BodyModel model = gen_toy_model(0, 10);
  SampleGenConfig config;
  config.seed = 3;
  config.n = 400;
  config.clusters = 8;
  const SyntheticCorpus corpus = gen_samples(config, model);
  const auto samples = records_to_params(corpus.records);
  const auto centers = init_centers(samples, 16, 5);
  const PartWeights w = build_part_weights(model, PartWeightMap{});

  std::printf("threads available: %d\n\n", omp_get_max_threads());
  std::printf("%-34s %10s %10s %8s\n", "kernel", "serial ms", "openmp ms",
              "speedup");

  {
    Assignment serial_out, parallel_out;
    const double t_serial = time_ms(
        [&] { serial_out = assign_samples_serial(samples, centers, model, w); },
        3);
    const double t_parallel = time_ms(
        [&] { parallel_out = assign_samples(samples, centers, model, w); }, 3);
    const bool same = serial_out.assignments == parallel_out.assignments &&
                      serial_out.distances == parallel_out.distances;
    std::printf("%-34s %10.2f %10.2f %7.2fx %s\n", "assign_samples (400x16)",
                t_serial, t_parallel, t_serial / t_parallel,
                same ? "" : "MISMATCH");
  }

  {
    FitProblem problem;
    const ForwardResult fwd = forward(model, samples[0]);
    problem.target_j3d = regress_joints(model, fwd.vertices);
    const Eigen::VectorXd x =
        pack_fit_vector(samples[1], CameraParams{});
    Eigen::VectorXd g_serial, g_parallel;
    const double t_serial = time_ms(
        [&] { g_serial = fit_gradient_serial(x, model, problem); }, 5);
    const double t_parallel =
        time_ms([&] { g_parallel = fit_gradient(x, model, problem); }, 5);
    const bool same = (g_serial - g_parallel).cwiseAbs().maxCoeff() == 0.0;
    std::printf("%-34s %10.2f %10.2f %7.2fx %s\n",
                "fit_gradient (157 coords)", t_serial, t_parallel,
                t_serial / t_parallel, same ? "" : "MISMATCH");
  }

  {
    ClusterConfig cc;
    cc.k = 8;
    cc.seed = 1;
    cc.lambda_hat = 10;
    ClusterResult result;
    const double t = time_ms(
        [&] { result = p3dh_kmeans(samples, cc, model); }, 2);
    std::printf("%-34s %10s %10.2f\n", "p3dh_kmeans (400x8, 10 iters)", "-",
                t);
  }
  return 0;
}
