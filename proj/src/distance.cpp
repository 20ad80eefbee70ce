#include "protomem/distance.hpp"

#include <cmath>

#include "protomem/error.hpp"

namespace protomem {

double PartWeightMap::value(PartLabel label) const {
  switch (label) {
    case PartLabel::Torso: return torso;
    case PartLabel::Head: return head;
    case PartLabel::Hand: return hand;
    case PartLabel::Foot: return foot;
    case PartLabel::Limb: return limb;
  }
  throw Error(ErrorKind::InvalidInput, "unknown part label value");
}

PartWeightMap PartWeightMap::uniform() {
  return PartWeightMap{1.0, 1.0, 1.0, 1.0, 1.0};
}

void PartWeightMap::validate() const {
  const double values[] = {torso, head, hand, foot, limb};
  double total = 0.0;
  for (double w : values) {
    if (!(w >= 0.0)) {
      throw Error(ErrorKind::InvalidInput, "part weights must be >= 0");
    }
    total += w;
  }
  if (total <= 0.0) {
    throw Error(ErrorKind::InvalidInput, "at least one part weight must be > 0");
  }
}

PartWeights build_part_weights(const BodyModel& model,
                               const PartWeightMap& map) {
  map.validate();
  const Eigen::Index v = model.vertex_count();
  if (static_cast<Eigen::Index>(model.part_labels.size()) != v) {
    throw Error(ErrorKind::InvalidInput, "model part_labels missing");
  }
  PartWeights w(v);
  for (Eigen::Index i = 0; i < v; ++i) {
    w(i) = map.value(model.part_labels[i]);
  }
  return w;
}

double weighted_vertex_distance(const MeshVertices& a, const MeshVertices& b,
                                const PartWeights& w) {
  if (a.rows() != b.rows() || a.rows() != w.size()) {
    throw Error(ErrorKind::InvalidInput,
                "weighted_vertex_distance: dimension mismatch");
  }
  double total = 0.0;
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    const double wi = w(i);
    total += wi * wi * (a.row(i) - b.row(i)).squaredNorm();
  }
  return total;
}

double unweighted_vertex_rmsd(const MeshVertices& a, const MeshVertices& b) {
  if (a.rows() != b.rows()) {
    throw Error(ErrorKind::InvalidInput,
                "unweighted_vertex_rmsd: dimension mismatch");
  }
  if (a.rows() == 0) return 0.0;
  double total = 0.0;
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    total += (a.row(i) - b.row(i)).squaredNorm();
  }
  return std::sqrt(total / static_cast<double>(a.rows()));
}

}  // namespace protomem
