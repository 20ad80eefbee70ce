#pragma once

#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "protomem/clustering.hpp"
#include "protomem/types.hpp"

namespace protomem {

// Classification score over the K prototypes; lies on the probability
// simplex (entries >= 0, sum 1 within 1e-9). One-hot scores are the label
// case.
using ScoreVector = Eigen::VectorXd;

void validate_score(const ScoreVector& c, int k);
bool is_one_hot(const ScoreVector& c);

struct PrototypeMemory {
  Eigen::MatrixXd rows;  // K x 154, flattened centers in cluster order
  std::string meta;      // free-form JSON text (variant, weights, seed, digest)

  int k() const { return static_cast<int>(rows.rows()); }
  BodyParams prototype(int index) const;
};

// Rows are the flattened cluster centers; build metadata is recorded from
// the result's config. Throws LoadError naming the row when a center does
// not decode.
PrototypeMemory build_memory(const ClusterResult& result,
                             const std::string& dataset_digest = "");

// One-hot score per sample at the nearest prototype under the weighted
// vertex distance, ties toward the lowest index.
std::vector<ScoreVector> label_samples(const std::vector<BodyParams>& samples,
                                       const PrototypeMemory& memory,
                                       const BodyModel& model,
                                       const PartWeights& w);

// Blend of memory rows by the score: exact row retrieval for one-hot
// scores; for soft scores the blended pose blocks are re-orthonormalized
// through the 6D decoding. Throws DegenerateSelection when a blended block
// cannot be decoded.
BodyParams select_prototype(const PrototypeMemory& memory,
                            const ScoreVector& c);

nlohmann::json memory_to_json(const PrototypeMemory& memory);
PrototypeMemory memory_from_json(const nlohmann::json& j);
void save_memory(const PrototypeMemory& memory, const std::string& path);
PrototypeMemory load_memory(const std::string& path);

// Score files are JSON Lines, one array of K numbers per line.
void save_scores(const std::vector<ScoreVector>& scores,
                 const std::string& path);
std::vector<ScoreVector> load_scores(const std::string& path);

}  // namespace protomem
