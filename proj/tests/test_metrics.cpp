#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <numeric>
#include <random>

#include <nlohmann/json.hpp>

#include "protomem/clustering.hpp"
#include "protomem/dataset.hpp"
#include "protomem/error.hpp"
#include "protomem/fitting.hpp"
#include "protomem/metrics.hpp"
#include "protomem/rotations.hpp"
#include "test_util.hpp"

using namespace protomem;
using testutil::max_abs_diff;

namespace {

Joints3D random_joints(std::mt19937_64& rng, double spread = 0.5) {
  std::normal_distribution<double> gauss(0.0, spread);
  Joints3D j;
  for (int i = 0; i < kNumJoints; ++i)
    for (int c = 0; c < 3; ++c) j(i, c) = gauss(rng);
  return j;
}

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  const size_t n = a.size();
  auto ranks = [n](const std::vector<double>& v) {
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](int x, int y) { return v[x] < v[y]; });
    std::vector<double> rank(n);
    for (size_t r = 0; r < n; ++r) rank[order[r]] = static_cast<double>(r);
    return rank;
  };
  const auto ra = ranks(a);
  const auto rb = ranks(b);
  const double mean = (n - 1) / 2.0;
  double cov = 0.0, va = 0.0, vb = 0.0;
  for (size_t i = 0; i < n; ++i) {
    cov += (ra[i] - mean) * (rb[i] - mean);
    va += (ra[i] - mean) * (ra[i] - mean);
    vb += (rb[i] - mean) * (rb[i] - mean);
  }
  return cov / std::sqrt(va * vb);
}

}  // namespace

TEST_CASE("mpvpe") {
  const BodyModel model = gen_toy_model(0, 4);
  const MeshVertices base = model.template_verts;
  CHECK(mpvpe(base, base) == 0.0);

  MeshVertices shifted = base;
  shifted.col(1).array() += 0.01;
  CHECK(mpvpe(base, shifted) == doctest::Approx(10.0).epsilon(1e-12));

  std::mt19937_64 rng(71);
  std::normal_distribution<double> gauss(0.0, 0.1);
  MeshVertices noisy = base;
  for (Eigen::Index i = 0; i < noisy.rows(); ++i)
    for (int c = 0; c < 3; ++c) noisy(i, c) += gauss(rng);
  double loop = 0.0;
  for (Eigen::Index i = 0; i < base.rows(); ++i) {
    double sq = 0.0;
    for (int c = 0; c < 3; ++c) {
      const double d = base(i, c) - noisy(i, c);
      sq += d * d;
    }
    loop += std::sqrt(sq);
  }
  loop = 1000.0 * loop / static_cast<double>(base.rows());
  CHECK(mpvpe(base, noisy) == doctest::Approx(loop).epsilon(1e-9));

  MeshVertices small(3, 3);
  CHECK_THROWS_AS(mpvpe(base, small), Error);
}

TEST_CASE("mpjpe") {
  std::mt19937_64 rng(72);
  const Joints3D base = random_joints(rng);
  CHECK(mpjpe(base, base) == 0.0);

  Joints3D off = base;
  off(7, 2) += 0.024;
  CHECK(mpjpe(base, off) == doctest::Approx(1.0).epsilon(1e-12));

  const Joints3D other = random_joints(rng);
  double loop = 0.0;
  for (int i = 0; i < kNumJoints; ++i) {
    loop += (base.row(i) - other.row(i)).norm();
  }
  loop = 1000.0 * loop / kNumJoints;
  CHECK(mpjpe(base, other) == doctest::Approx(loop).epsilon(1e-9));
}

TEST_CASE("procrustes removes exact similarity transforms") {
  std::mt19937_64 rng(73);
  for (int trial = 0; trial < 50; ++trial) {
    const Joints3D gt = random_joints(rng);
    const Mat3 r = testutil::random_rotation(rng);
    std::uniform_real_distribution<double> scale_dist(0.3, 3.0);
    const double s = scale_dist(rng);
    const Vec3 t(0.4, -0.2, 1.0);

    Joints3D pred;
    for (int i = 0; i < kNumJoints; ++i) {
      pred.row(i) = (s * (r * gt.row(i).transpose()) + t).transpose();
    }
    const Eigen::MatrixX3d aligned = procrustes_align(pred, gt);
    CHECK(max_abs_diff(aligned, gt) < 1e-9);
    CHECK(pa_mpjpe(pred, gt) < 1e-9);
  }
}

TEST_CASE("procrustes identity and degeneracy") {
  std::mt19937_64 rng(74);
  const Joints3D gt = random_joints(rng);
  const Eigen::MatrixX3d aligned = procrustes_align(gt, gt);
  CHECK(max_abs_diff(aligned, gt) < 1e-12);

  // Collinear predictions have a rank-1 spread.
  Eigen::MatrixX3d line(24, 3);
  for (int i = 0; i < 24; ++i) line.row(i) << i * 0.1, 0.0, 0.0;
  try {
    procrustes_align(line, gt);
    FAIL("expected alignment error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Alignment);
  }

  Eigen::MatrixX3d two(2, 3);
  CHECK_THROWS_AS(procrustes_align(two, two), Error);
}

TEST_CASE("alignment never hurts: pa-mpjpe <= mpjpe") {
  // Predictions that differ by a similarity transform plus noise; the
  // alignment strips the transform, so the aligned error cannot exceed
  // the raw one.
  std::mt19937_64 rng(75);
  std::normal_distribution<double> gauss(0.0, 0.05);
  std::uniform_real_distribution<double> scale_dist(0.7, 1.4);
  for (int trial = 0; trial < 100; ++trial) {
    const Joints3D gt = random_joints(rng);
    const Mat3 r = testutil::random_rotation(rng);
    const double s = scale_dist(rng);
    const Vec3 t(gauss(rng), gauss(rng), gauss(rng));
    Joints3D pred;
    for (int i = 0; i < kNumJoints; ++i) {
      pred.row(i) = (s * (r * gt.row(i).transpose()) + t).transpose();
      for (int c = 0; c < 3; ++c) pred(i, c) += gauss(rng);
    }
    CHECK(pa_mpjpe(pred, gt) <= mpjpe(pred, gt) + 1e-12);
  }
}

TEST_CASE("metrics are permutation invariant and scale with displacement") {
  std::mt19937_64 rng(76);
  const Joints3D gt = random_joints(rng);
  Joints3D pred = gt;
  std::normal_distribution<double> gauss(0.0, 0.05);
  for (int i = 0; i < kNumJoints; ++i)
    for (int c = 0; c < 3; ++c) pred(i, c) += gauss(rng);

  std::vector<int> perm(kNumJoints);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  Joints3D gt_p, pred_p;
  for (int i = 0; i < kNumJoints; ++i) {
    gt_p.row(i) = gt.row(perm[i]);
    pred_p.row(i) = pred.row(perm[i]);
  }
  CHECK(mpjpe(pred_p, gt_p) == doctest::Approx(mpjpe(pred, gt)).epsilon(1e-12));
  CHECK(pa_mpjpe(pred_p, gt_p) ==
        doctest::Approx(pa_mpjpe(pred, gt)).epsilon(1e-9));

  // Doubling the displacement doubles the error.
  Joints3D doubled = gt + 2.0 * (pred - gt);
  CHECK(mpjpe(doubled, gt) ==
        doctest::Approx(2.0 * mpjpe(pred, gt)).epsilon(1e-12));
}

TEST_CASE("bucketing by prototype distance") {
  const BodyModel model = gen_toy_model(0, 4);
  const BodyParams singular = BodyParams::identity();

  SUBCASE("identical samples land in the first bucket") {
    const std::vector<BodyParams> samples(5, singular);
    const BucketReport report = bucket_by_prototype_distance(
        samples, singular, model, {0.1, 0.2}, {});
    REQUIRE(report.buckets.size() == 3);
    CHECK(report.buckets[0].count == 5);
    CHECK(report.buckets[1].count == 0);
    CHECK(report.buckets[2].count == 0);
    CHECK(!report.buckets[1].metrics.has_value());
  }

  SUBCASE("tail subsets take the largest distances by rank") {
    std::vector<BodyParams> samples;
    for (int i = 0; i < 10; ++i) {
      BodyParams p = BodyParams::identity();
      // Monotone shape offsets give strictly increasing distances.
      p.shape(0) = 0.1 * (i + 1);
      samples.push_back(p);
    }
    const BucketReport report = bucket_by_prototype_distance(
        samples, singular, model, {1.0}, {50.0});
    REQUIRE(report.tails.size() == 1);
    CHECK(report.tails[0].indices == std::vector<int>{9, 8, 7, 6, 5});

    int total = 0;
    for (const Bucket& b : report.buckets) total += b.count;
    CHECK(total == 10);
  }

  SUBCASE("edges must increase and percents stay in range") {
    const std::vector<BodyParams> samples(3, singular);
    CHECK_THROWS_AS(bucket_by_prototype_distance(samples, singular, model,
                                                 {0.2, 0.1}, {}),
                    Error);
    CHECK_THROWS_AS(bucket_by_prototype_distance(samples, singular, model,
                                                 {0.1}, {150.0}),
                    Error);
  }

  SUBCASE("per-sample metrics aggregate per bucket") {
    std::vector<BodyParams> samples;
    std::vector<PerSampleMetrics> metrics;
    for (int i = 0; i < 6; ++i) {
      BodyParams p = BodyParams::identity();
      p.shape(0) = i < 3 ? 0.0 : 5.0;
      samples.push_back(p);
      metrics.push_back({1.0 * i, 2.0 * i, 0.5 * i});
    }
    const BucketReport report = bucket_by_prototype_distance(
        samples, singular, model, {0.01}, {}, &metrics);
    REQUIRE(report.buckets.size() == 2);
    CHECK(report.buckets[0].count == 3);
    CHECK(report.buckets[1].count == 3);
    CHECK(report.buckets[0].metrics->mpvpe == doctest::Approx(1.0));
    CHECK(report.buckets[1].metrics->mpvpe == doctest::Approx(4.0));
  }
}

TEST_CASE("fit error from the global mean grows with prototype distance") {
  // Desk-scale version of the motivating observation: bucket a corpus by
  // distance to its singular prototype, fit every sample from that
  // prototype at a fixed small budget, and check that per-bucket error
  // increases with distance.
  const BodyModel model = gen_toy_model(0, 4);
  SampleGenConfig gen;
  gen.seed = 21;
  gen.n = 40;
  gen.clusters = 4;
  gen.noise = 0.1;
  const SyntheticCorpus corpus = gen_samples(gen, model);
  const auto samples = records_to_params(corpus.records);

  ClusterConfig single;
  single.k = 1;
  single.seed = 1;
  single.lambda_hat = 5;
  const BodyParams global_mean =
      p3dh_kmeans(samples, single, model).centers[0];

  std::vector<PerSampleMetrics> per_sample(samples.size());
  for (size_t i = 0; i < samples.size(); ++i) {
    FitProblem problem;
    const ForwardResult fwd = forward(model, samples[i]);
    problem.target_j3d = regress_joints(model, fwd.vertices);
    const FitReport report =
        fit(global_mean, CameraParams{}, model, problem, 2, 0.01);
    const MeshVertices pred = forward(model, report.params).vertices;
    per_sample[i].mpvpe = mpvpe(pred, fwd.vertices);
  }

  // Edges at distance quantiles so every bucket is populated.
  const MeshVertices singular_verts = forward(model, global_mean).vertices;
  std::vector<double> rmsd;
  for (const BodyParams& s : samples) {
    rmsd.push_back(
        unweighted_vertex_rmsd(forward(model, s).vertices, singular_verts));
  }
  std::vector<double> sorted = rmsd;
  std::sort(sorted.begin(), sorted.end());
  const std::vector<double> edges = {sorted[10], sorted[20], sorted[30]};

  const BucketReport report = bucket_by_prototype_distance(
      samples, global_mean, model, edges, {}, &per_sample);
  std::vector<double> bucket_rank, bucket_err;
  for (size_t b = 0; b < report.buckets.size(); ++b) {
    if (report.buckets[b].count == 0) continue;
    bucket_rank.push_back(static_cast<double>(b));
    bucket_err.push_back(report.buckets[b].metrics->mpvpe);
  }
  REQUIRE(bucket_rank.size() >= 3);
  CHECK(spearman(bucket_rank, bucket_err) > 0.0);
}

TEST_CASE("report serialization") {
  const BodyModel model = gen_toy_model(0, 4);
  const BodyParams singular = BodyParams::identity();
  std::vector<BodyParams> samples(4, singular);
  samples[2].shape(0) = 2.0;
  std::vector<PerSampleMetrics> metrics(4, PerSampleMetrics{1.0, 2.0, 3.0});
  const BucketReport report = bucket_by_prototype_distance(
      samples, singular, model, {0.01}, {50.0}, &metrics);

  const std::string csv = bucket_report_to_csv(report);
  CHECK(csv.find("lo,hi,count,mpvpe,mpjpe,pa_mpjpe") == 0);
  CHECK(csv.find("\n") != std::string::npos);

  const auto j = bucket_report_to_json(report);
  CHECK(j.contains("buckets"));
  CHECK(j["buckets"].size() == 2);
  CHECK(j["tails"].size() == 1);
}
