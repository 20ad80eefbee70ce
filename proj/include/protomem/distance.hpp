#pragma once

#include "protomem/body_model.hpp"
#include "protomem/types.hpp"

namespace protomem {

// Scalar weight per body part, applied per vertex when differencing
// configurations. All weights nonnegative, at least one positive.
struct PartWeightMap {
  double torso = 1.0;
  double head = 0.3;
  double hand = 0.3;
  double foot = 0.5;
  double limb = 5.0;

  double value(PartLabel label) const;
  // Every part weighted 1.0 (the unweighted vertex-distance variant).
  static PartWeightMap uniform();

  void validate() const;
};

// Per-vertex scalar weight, broadcast across the 3 coordinates.
using PartWeights = Eigen::VectorXd;

PartWeights build_part_weights(const BodyModel& model,
                               const PartWeightMap& map);

// Squared L2 norm of the elementwise-weighted vertex difference,
// sum_v |w_v * (a_v - b_v)|^2. Symmetric, nonnegative.
double weighted_vertex_distance(const MeshVertices& a, const MeshVertices& b,
                                const PartWeights& w);

// Root-mean-square per-vertex Euclidean distance. Used for bucketing by
// distance to the singular prototype, not for clustering.
double unweighted_vertex_rmsd(const MeshVertices& a, const MeshVertices& b);

}  // namespace protomem
