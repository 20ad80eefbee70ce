#include "protomem/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <sstream>

#include <Eigen/SVD>
#include <nlohmann/json.hpp>

#include "protomem/distance.hpp"
#include "protomem/error.hpp"

namespace protomem {

namespace {

constexpr double kMetersToMm = 1000.0;

double mean_point_distance(const Eigen::MatrixX3d& pred,
                           const Eigen::MatrixX3d& gt) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < pred.rows(); ++i) {
    total += (pred.row(i) - gt.row(i)).norm();
  }
  return total / static_cast<double>(pred.rows());
}

}  // namespace

double mpvpe(const MeshVertices& pred, const MeshVertices& gt) {
  if (pred.rows() != gt.rows() || pred.rows() == 0) {
    throw Error(ErrorKind::InvalidInput, "mpvpe: vertex count mismatch");
  }
  return kMetersToMm * mean_point_distance(pred, gt);
}

double mpjpe(const Joints3D& pred, const Joints3D& gt) {
  return kMetersToMm * mean_point_distance(pred, gt);
}

Eigen::MatrixX3d procrustes_align(const Eigen::MatrixX3d& pred,
                                  const Eigen::MatrixX3d& gt) {
  const Eigen::Index n = pred.rows();
  if (n != gt.rows() || n < 3) {
    throw Error(ErrorKind::InvalidInput,
                "procrustes_align: need matching point sets of size >= 3");
  }
  const Eigen::RowVector3d mu_p = pred.colwise().mean();
  const Eigen::RowVector3d mu_g = gt.colwise().mean();
  const Eigen::MatrixX3d pc = pred.rowwise() - mu_p;
  const Eigen::MatrixX3d gc = gt.rowwise() - mu_g;

  const double var_p = pc.squaredNorm() / static_cast<double>(n);
  const Mat3 cov = gc.transpose() * pc / static_cast<double>(n);
  Eigen::JacobiSVD<Mat3> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vec3 d = svd.singularValues();
  if (var_p <= 0.0 || d(1) <= 1e-12 * std::max(1.0, d(0))) {
    throw Error(ErrorKind::Alignment,
                "procrustes_align: degenerate point configuration");
  }
  Vec3 sign = Vec3::Ones();
  if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0) {
    sign(2) = -1.0;  // reflection excluded
  }
  const Mat3 rot = svd.matrixU() * sign.asDiagonal() * svd.matrixV().transpose();
  const double scale = d.dot(sign) / var_p;
  const Eigen::RowVector3d t = mu_g - scale * (rot * mu_p.transpose()).transpose();
  Eigen::MatrixX3d aligned = (scale * (rot * pred.transpose())).transpose();
  aligned.rowwise() += t;
  return aligned;
}

double pa_mpjpe(const Joints3D& pred, const Joints3D& gt) {
  const Eigen::MatrixX3d aligned = procrustes_align(pred, gt);
  double total = 0.0;
  for (int i = 0; i < kNumJoints; ++i) {
    total += (aligned.row(i) - gt.row(i)).norm();
  }
  return kMetersToMm * total / kNumJoints;
}

PerSampleMetrics compute_sample_metrics(const MeshVertices& pred_verts,
                                        const MeshVertices& gt_verts,
                                        const Joints3D& pred_joints,
                                        const Joints3D& gt_joints) {
  PerSampleMetrics m;
  m.mpvpe = mpvpe(pred_verts, gt_verts);
  m.mpjpe = mpjpe(pred_joints, gt_joints);
  m.pa_mpjpe = pa_mpjpe(pred_joints, gt_joints);
  return m;
}

MetricReport aggregate_metrics(const std::vector<PerSampleMetrics>& per_sample) {
  MetricReport report;
  report.count = static_cast<int>(per_sample.size());
  if (per_sample.empty()) return report;
  for (const PerSampleMetrics& m : per_sample) {
    report.mpvpe += m.mpvpe;
    report.mpjpe += m.mpjpe;
    report.pa_mpjpe += m.pa_mpjpe;
  }
  report.mpvpe /= report.count;
  report.mpjpe /= report.count;
  report.pa_mpjpe /= report.count;
  return report;
}

BucketReport bucket_by_prototype_distance(
    const std::vector<BodyParams>& samples, const BodyParams& singular,
    const BodyModel& model, const std::vector<double>& edges,
    const std::vector<double>& tail_percents,
    const std::vector<PerSampleMetrics>* per_sample) {
  for (size_t i = 1; i < edges.size(); ++i) {
    if (!(edges[i] > edges[i - 1])) {
      throw Error(ErrorKind::InvalidInput,
                  "buckets: edges must be strictly increasing");
    }
  }
  if (per_sample != nullptr && per_sample->size() != samples.size()) {
    throw Error(ErrorKind::InvalidInput,
                "buckets: per-sample metric count mismatch");
  }
  const std::int64_t n = static_cast<std::int64_t>(samples.size());
  if (n == 0) {
    throw Error(ErrorKind::InvalidInput, "buckets: no samples");
  }

  BucketReport report;
  report.edges = edges;
  report.rmsd.resize(n);
  const MeshVertices singular_verts = forward(model, singular).vertices;
  {
    std::vector<std::string> errors(n);
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) {
      try {
        report.rmsd[i] = unweighted_vertex_rmsd(
            forward(model, samples[i]).vertices, singular_verts);
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
    for (std::int64_t i = 0; i < n; ++i) {
      if (!errors[i].empty()) {
        throw Error(ErrorKind::InvalidInput,
                    "buckets: sample " + std::to_string(i) + ": " + errors[i]);
      }
    }
  }

  const size_t bucket_count = edges.size() + 1;
  std::vector<std::vector<int>> members(bucket_count);
  for (std::int64_t i = 0; i < n; ++i) {
    // upper_bound places a value equal to an edge into the bucket on its
    // right, matching half-open [edge_i, edge_{i+1}) intervals.
    const size_t b =
        std::upper_bound(edges.begin(), edges.end(), report.rmsd[i]) -
        edges.begin();
    members[b].push_back(static_cast<int>(i));
  }

  report.buckets.resize(bucket_count);
  for (size_t b = 0; b < bucket_count; ++b) {
    Bucket& bucket = report.buckets[b];
    bucket.lo = b == 0 ? -std::numeric_limits<double>::infinity() : edges[b - 1];
    bucket.hi = b == edges.size() ? std::numeric_limits<double>::infinity()
                                  : edges[b];
    bucket.count = static_cast<int>(members[b].size());
    if (per_sample != nullptr && !members[b].empty()) {
      std::vector<PerSampleMetrics> subset;
      subset.reserve(members[b].size());
      for (int idx : members[b]) subset.push_back((*per_sample)[idx]);
      bucket.metrics = aggregate_metrics(subset);
    }
  }

  // Rank by distance descending, ties toward the lower sample index.
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    if (report.rmsd[a] != report.rmsd[b]) return report.rmsd[a] > report.rmsd[b];
    return a < b;
  });
  for (double percent : tail_percents) {
    if (!(percent > 0.0) || percent > 100.0) {
      throw Error(ErrorKind::InvalidInput,
                  "buckets: tail percent must lie in (0, 100]");
    }
    TailSubset tail;
    tail.percent = percent;
    const auto count = static_cast<size_t>(
        std::llround(percent / 100.0 * static_cast<double>(n)));
    tail.indices.assign(order.begin(),
                        order.begin() + std::min(count, order.size()));
    if (per_sample != nullptr && !tail.indices.empty()) {
      std::vector<PerSampleMetrics> subset;
      subset.reserve(tail.indices.size());
      for (int idx : tail.indices) subset.push_back((*per_sample)[idx]);
      tail.metrics = aggregate_metrics(subset);
    }
    report.tails.push_back(std::move(tail));
  }
  return report;
}

nlohmann::json metric_report_to_json(const MetricReport& report) {
  return {{"mpvpe", report.mpvpe},
          {"mpjpe", report.mpjpe},
          {"pa_mpjpe", report.pa_mpjpe},
          {"count", report.count}};
}

nlohmann::json bucket_report_to_json(const BucketReport& report) {
  nlohmann::json j;
  j["edges"] = report.edges;
  j["rmsd"] = report.rmsd;
  auto& buckets = j["buckets"] = nlohmann::json::array();
  for (const Bucket& b : report.buckets) {
    nlohmann::json jb;
    jb["lo"] = std::isinf(b.lo) ? nlohmann::json() : nlohmann::json(b.lo);
    jb["hi"] = std::isinf(b.hi) ? nlohmann::json() : nlohmann::json(b.hi);
    jb["count"] = b.count;
    jb["metrics"] = b.metrics ? metric_report_to_json(*b.metrics)
                              : nlohmann::json();
    buckets.push_back(std::move(jb));
  }
  auto& tails = j["tails"] = nlohmann::json::array();
  for (const TailSubset& t : report.tails) {
    nlohmann::json jt;
    jt["percent"] = t.percent;
    jt["indices"] = t.indices;
    jt["metrics"] = t.metrics ? metric_report_to_json(*t.metrics)
                              : nlohmann::json();
    tails.push_back(std::move(jt));
  }
  return j;
}

std::string bucket_report_to_csv(const BucketReport& report) {
  std::ostringstream out;
  out << "lo,hi,count,mpvpe,mpjpe,pa_mpjpe\n";
  out.precision(17);
  for (const Bucket& b : report.buckets) {
    if (std::isinf(b.lo)) out << ""; else out << b.lo;
    out << ",";
    if (std::isinf(b.hi)) out << ""; else out << b.hi;
    out << "," << b.count << ",";
    if (b.metrics) {
      out << b.metrics->mpvpe << "," << b.metrics->mpjpe << ","
          << b.metrics->pa_mpjpe;
    } else {
      out << ",,";
    }
    out << "\n";
  }
  return out.str();
}

}  // namespace protomem
