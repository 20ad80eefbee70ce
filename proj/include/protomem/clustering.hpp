#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "protomem/body_model.hpp"
#include "protomem/distance.hpp"
#include "protomem/types.hpp"

namespace protomem {

// Clustering variants: the part-weighted vertex-distance algorithm, its
// uniform-weight ablation, frozen random centers, and plain K-Means on the
// raw parameter vectors.
enum class Variant { P3dh, Plain3dh, RandomCenter, NaiveParams };

const std::string& variant_name(Variant v);
Variant variant_from_name(const std::string& name);

struct ClusterConfig {
  int k = 50;
  double gamma_hat = 0.0;   // average-distance threshold; 0 runs to budget
  int lambda_hat = 100;     // iteration budget
  std::uint64_t seed = 0;
  Variant variant = Variant::P3dh;
  PartWeightMap part_weight_map;

  void validate() const;
};

struct ClusterResult {
  std::vector<BodyParams> centers;
  std::vector<int> assignments;       // per-sample cluster index
  std::vector<double> distances;      // per-sample distance to its center
  std::vector<double> trace;          // average distance per assignment pass
  ClusterConfig config;
};

// K distinct samples drawn without replacement from a seeded generator,
// in draw order.
std::vector<BodyParams> init_centers(const std::vector<BodyParams>& samples,
                                     int k, std::uint64_t seed);

// Nearest-center assignment under the part-weighted vertex distance.
// Center vertices are computed once per call. Ties break toward the lowest
// cluster index. The parallel version writes one slot per sample, so its
// output is identical to the serial reference at any thread count.
struct Assignment {
  std::vector<int> assignments;
  std::vector<double> distances;
};
Assignment assign_samples(const std::vector<BodyParams>& samples,
                          const std::vector<BodyParams>& centers,
                          const BodyModel& model, const PartWeights& w);
Assignment assign_samples_serial(const std::vector<BodyParams>& samples,
                                 const std::vector<BodyParams>& centers,
                                 const BodyModel& model, const PartWeights& w);

// Assignment given precomputed vertices; shared by both drivers.
Assignment assign_to_center_verts(const std::vector<MeshVertices>& sample_verts,
                                  const std::vector<MeshVertices>& center_verts,
                                  const PartWeights& w, bool parallel);

// Per-cluster center: arithmetic mean of member shapes, per-joint
// eigenvector quaternion average of member pose blocks. Empty clusters are
// reseeded with the unassigned-farthest sample (largest current distance,
// ties toward the lowest sample index). Throws CenterUpdate naming the
// cluster and joint when a pose average is ambiguous.
std::vector<BodyParams> update_centers(const std::vector<BodyParams>& samples,
                                       const std::vector<int>& assignments,
                                       const std::vector<double>& distances,
                                       int k);

// The part-aware vertex-distance K-Means driver. Also runs the Plain3dh
// (uniform weights) and RandomCenter (frozen initial centers, single
// assignment pass) variants. Deterministic given the seed.
ClusterResult p3dh_kmeans(const std::vector<BodyParams>& samples,
                          const ClusterConfig& config, const BodyModel& model);

// Plain K-Means on the flattened 154-vectors: squared Euclidean distance,
// arithmetic-mean center updates with no re-orthonormalization of pose
// blocks. Reproduces the parameter-space baseline as-is; blocks are only
// re-orthonormalized when a center is later decoded for the body model.
ClusterResult naive_kmeans(const std::vector<BodyParams>& samples,
                           const ClusterConfig& config);

// Dispatch on config.variant (NaiveParams ignores the model).
ClusterResult run_clustering(const std::vector<BodyParams>& samples,
                             const ClusterConfig& config,
                             const BodyModel& model);

// Agreement between two labelings, 1.0 for identical partitions.
double adjusted_rand_index(const std::vector<int>& a,
                           const std::vector<int>& b);

nlohmann::json cluster_result_to_json(const ClusterResult& result);
ClusterResult cluster_result_from_json(const nlohmann::json& j);
void save_cluster_result(const ClusterResult& result, const std::string& path);
ClusterResult load_cluster_result(const std::string& path);

}  // namespace protomem
