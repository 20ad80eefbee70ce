#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "protomem/distance.hpp"
#include "protomem/error.hpp"
#include "test_util.hpp"

using namespace protomem;

namespace {

// Straightforward per-vertex loops, independent of the Eigen-based path.
double loop_weighted(const MeshVertices& a, const MeshVertices& b,
                     const PartWeights& w) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (int c = 0; c < 3; ++c) {
      const double d = w(i) * (a(i, c) - b(i, c));
      total += d * d;
    }
  }
  return total;
}

double loop_rmsd(const MeshVertices& a, const MeshVertices& b) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    double sq = 0.0;
    for (int c = 0; c < 3; ++c) {
      const double d = a(i, c) - b(i, c);
      sq += d * d;
    }
    total += sq;
  }
  return std::sqrt(total / static_cast<double>(a.rows()));
}

MeshVertices random_verts(std::mt19937_64& rng, Eigen::Index n) {
  std::normal_distribution<double> gauss(0.0, 0.3);
  MeshVertices v(n, 3);
  for (Eigen::Index i = 0; i < n; ++i)
    for (int c = 0; c < 3; ++c) v(i, c) = gauss(rng);
  return v;
}

}  // namespace

TEST_CASE("part weight construction") {
  const BodyModel model = gen_toy_model(0, 4);

  const PartWeights w = build_part_weights(model, PartWeightMap{});
  for (Eigen::Index i = 0; i < model.vertex_count(); ++i) {
    if (model.part_labels[i] == PartLabel::Limb) CHECK(w(i) == 5.0);
    if (model.part_labels[i] == PartLabel::Torso) CHECK(w(i) == 1.0);
    if (model.part_labels[i] == PartLabel::Head) CHECK(w(i) == 0.3);
    if (model.part_labels[i] == PartLabel::Hand) CHECK(w(i) == 0.3);
    if (model.part_labels[i] == PartLabel::Foot) CHECK(w(i) == 0.5);
  }

  const PartWeights ones = build_part_weights(model, PartWeightMap::uniform());
  CHECK(ones.minCoeff() == 1.0);
  CHECK(ones.maxCoeff() == 1.0);

  PartWeightMap invalid;
  invalid.limb = -1.0;
  CHECK_THROWS_AS(build_part_weights(model, invalid), Error);
  PartWeightMap zero{0, 0, 0, 0, 0};
  CHECK_THROWS_AS(build_part_weights(model, zero), Error);
}

TEST_CASE("weighted vertex distance") {
  const BodyModel model = gen_toy_model(0, 4);
  const PartWeights uniform = build_part_weights(model, PartWeightMap::uniform());
  const MeshVertices base = model.template_verts;

  CHECK(weighted_vertex_distance(base, base, uniform) == 0.0);

  // A single vertex moved by (1,0,0) contributes its squared weighted norm.
  MeshVertices moved = base;
  moved(0, 0) += 1.0;
  CHECK(weighted_vertex_distance(base, moved, uniform) == doctest::Approx(1.0));

  // Same displacement on a limb vertex under the default map: (5*1)^2.
  const PartWeights defaults = build_part_weights(model, PartWeightMap{});
  Eigen::Index limb_vertex = -1;
  for (Eigen::Index i = 0; i < model.vertex_count(); ++i) {
    if (model.part_labels[i] == PartLabel::Limb) {
      limb_vertex = i;
      break;
    }
  }
  REQUIRE(limb_vertex >= 0);
  MeshVertices limb_moved = base;
  limb_moved(limb_vertex, 0) += 1.0;
  CHECK(weighted_vertex_distance(base, limb_moved, defaults) ==
        doctest::Approx(25.0));

  // A zero torso weight removes torso vertices from the distance.
  PartWeightMap no_torso;
  no_torso.torso = 0.0;
  const PartWeights w0 = build_part_weights(model, no_torso);
  MeshVertices torso_moved = base;
  for (Eigen::Index i = 0; i < model.vertex_count(); ++i) {
    if (model.part_labels[i] == PartLabel::Torso) torso_moved(i, 1) += 3.0;
  }
  CHECK(weighted_vertex_distance(base, torso_moved, w0) == 0.0);

  MeshVertices small(3, 3);
  CHECK_THROWS_AS(weighted_vertex_distance(base, small, uniform), Error);
}

TEST_CASE("weighted distance properties") {
  const BodyModel model = gen_toy_model(0, 4);
  std::mt19937_64 rng(31);
  const Eigen::Index n = model.vertex_count();
  const MeshVertices a = random_verts(rng, n);
  const MeshVertices b = random_verts(rng, n);

  const PartWeights w = build_part_weights(model, PartWeightMap{});
  CHECK(weighted_vertex_distance(a, b, w) == weighted_vertex_distance(b, a, w));
  CHECK(weighted_vertex_distance(a, b, w) ==
        doctest::Approx(loop_weighted(a, b, w)).epsilon(1e-12));

  // Raising any single part weight never shrinks a distance.
  const double base_dist = weighted_vertex_distance(a, b, w);
  for (int part = 0; part < kNumPartLabels; ++part) {
    PartWeightMap bumped;
    switch (static_cast<PartLabel>(part)) {
      case PartLabel::Torso: bumped.torso += 1.0; break;
      case PartLabel::Head: bumped.head += 1.0; break;
      case PartLabel::Hand: bumped.hand += 1.0; break;
      case PartLabel::Foot: bumped.foot += 1.0; break;
      case PartLabel::Limb: bumped.limb += 1.0; break;
    }
    const PartWeights wb = build_part_weights(model, bumped);
    CHECK(weighted_vertex_distance(a, b, wb) >= base_dist);
  }

  // Uniform weights reduce to the plain squared-difference sum, which ties
  // out against V * rmsd^2.
  const PartWeights ones = build_part_weights(model, PartWeightMap::uniform());
  const double uniform_dist = weighted_vertex_distance(a, b, ones);
  const double rmsd = unweighted_vertex_rmsd(a, b);
  CHECK(uniform_dist ==
        doctest::Approx(static_cast<double>(n) * rmsd * rmsd).epsilon(1e-12));
}

TEST_CASE("unweighted vertex rmsd") {
  const BodyModel model = gen_toy_model(0, 4);
  const MeshVertices base = model.template_verts;
  CHECK(unweighted_vertex_rmsd(base, base) == 0.0);

  MeshVertices shifted = base;
  shifted.col(0).array() += 0.01;
  CHECK(unweighted_vertex_rmsd(base, shifted) == doctest::Approx(0.01));

  std::mt19937_64 rng(32);
  const MeshVertices a = random_verts(rng, base.rows());
  const MeshVertices b = random_verts(rng, base.rows());
  CHECK(unweighted_vertex_rmsd(a, b) ==
        doctest::Approx(loop_rmsd(a, b)).epsilon(1e-12));

  MeshVertices small(2, 3);
  CHECK_THROWS_AS(unweighted_vertex_rmsd(base, small), Error);
}
