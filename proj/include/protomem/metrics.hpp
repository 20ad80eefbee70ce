#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "protomem/body_model.hpp"
#include "protomem/types.hpp"

namespace protomem {

// Aggregated reconstruction errors in millimeters.
struct MetricReport {
  double mpvpe = 0.0;
  double mpjpe = 0.0;
  double pa_mpjpe = 0.0;
  int count = 0;
};

// Mean per-vertex Euclidean distance, millimeters.
double mpvpe(const MeshVertices& pred, const MeshVertices& gt);
// Mean per-joint Euclidean distance, millimeters.
double mpjpe(const Joints3D& pred, const Joints3D& gt);

// Optimal similarity alignment (rotation, uniform scale, translation) of
// pred onto gt in the least-squares sense; reflections excluded. Throws
// Alignment when the point spread has rank < 2.
Eigen::MatrixX3d procrustes_align(const Eigen::MatrixX3d& pred,
                                  const Eigen::MatrixX3d& gt);

// MPJPE after Procrustes alignment, millimeters.
double pa_mpjpe(const Joints3D& pred, const Joints3D& gt);

struct PerSampleMetrics {
  double mpvpe = 0.0;
  double mpjpe = 0.0;
  double pa_mpjpe = 0.0;
};

PerSampleMetrics compute_sample_metrics(const MeshVertices& pred_verts,
                                        const MeshVertices& gt_verts,
                                        const Joints3D& pred_joints,
                                        const Joints3D& gt_joints);
MetricReport aggregate_metrics(const std::vector<PerSampleMetrics>& per_sample);

struct Bucket {
  double lo = 0.0;  // -inf encoded as -1e308 boundary in reports
  double hi = 0.0;
  int count = 0;
  std::optional<MetricReport> metrics;
};

struct TailSubset {
  double percent = 0.0;
  std::vector<int> indices;  // sample indices, largest distances first
  std::optional<MetricReport> metrics;
};

struct BucketReport {
  std::vector<double> edges;
  std::vector<double> rmsd;  // per-sample distance to the singular prototype
  std::vector<Bucket> buckets;
  std::vector<TailSubset> tails;
};

// Distance of every sample to the singular prototype (unweighted vertex
// RMSD), histogrammed over B strictly increasing edges into B+1 buckets
// covering the whole line, plus tail subsets by descending distance rank
// (ties broken by sample index). Per-sample metrics, when supplied, are
// averaged per bucket and per tail; empty buckets report null metrics.
BucketReport bucket_by_prototype_distance(
    const std::vector<BodyParams>& samples, const BodyParams& singular,
    const BodyModel& model, const std::vector<double>& edges,
    const std::vector<double>& tail_percents,
    const std::vector<PerSampleMetrics>* per_sample = nullptr);

nlohmann::json metric_report_to_json(const MetricReport& report);
nlohmann::json bucket_report_to_json(const BucketReport& report);
std::string bucket_report_to_csv(const BucketReport& report);

}  // namespace protomem
