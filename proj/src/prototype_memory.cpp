#include "protomem/prototype_memory.hpp"

#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "protomem/error.hpp"
#include "protomem/rotations.hpp"

namespace protomem {

void validate_score(const ScoreVector& c, int k) {
  if (c.size() != k) {
    throw Error(ErrorKind::InvalidInput,
                "score: expected " + std::to_string(k) + " entries, got " +
                    std::to_string(c.size()));
  }
  if (!c.allFinite() || c.minCoeff() < 0.0) {
    throw Error(ErrorKind::InvalidInput, "score: entries must be finite and >= 0");
  }
  if (std::abs(c.sum() - 1.0) > 1e-9) {
    throw Error(ErrorKind::InvalidInput, "score: entries must sum to 1");
  }
}

bool is_one_hot(const ScoreVector& c) {
  bool seen_one = false;
  for (Eigen::Index i = 0; i < c.size(); ++i) {
    if (c(i) == 1.0) {
      if (seen_one) return false;
      seen_one = true;
    } else if (c(i) != 0.0) {
      return false;
    }
  }
  return seen_one;
}

BodyParams PrototypeMemory::prototype(int index) const {
  if (index < 0 || index >= k()) {
    throw Error(ErrorKind::InvalidInput, "prototype index out of range");
  }
  return BodyParams::from_flat(rows.row(index).transpose());
}

PrototypeMemory build_memory(const ClusterResult& result,
                             const std::string& dataset_digest) {
  if (result.centers.empty()) {
    throw Error(ErrorKind::InvalidInput, "build_memory: no centers");
  }
  PrototypeMemory memory;
  memory.rows.resize(static_cast<Eigen::Index>(result.centers.size()), kParamDim);
  for (size_t i = 0; i < result.centers.size(); ++i) {
    const ParamVec flat = result.centers[i].flatten();
    if (!flat.allFinite()) {
      throw Error(ErrorKind::LoadError,
                  "build_memory: row " + std::to_string(i) + " is non-finite");
    }
    // Decode check: every row must stand on its own as body parameters.
    try {
      const BodyParams p = BodyParams::from_flat(flat);
      for (int j = 0; j < kNumJoints; ++j) rot6d_to_rotmat(p.pose_block(j));
    } catch (const std::exception& e) {
      throw Error(ErrorKind::LoadError, "build_memory: row " +
                                            std::to_string(i) + ": " + e.what());
    }
    memory.rows.row(i) = flat.transpose();
  }
  nlohmann::json meta;
  meta["variant"] = variant_name(result.config.variant);
  meta["seed"] = result.config.seed;
  meta["part_weights"] = {{"torso", result.config.part_weight_map.torso},
                          {"head", result.config.part_weight_map.head},
                          {"hand", result.config.part_weight_map.hand},
                          {"foot", result.config.part_weight_map.foot},
                          {"limb", result.config.part_weight_map.limb}};
  if (!dataset_digest.empty()) meta["dataset_digest"] = dataset_digest;
  memory.meta = meta.dump();
  return memory;
}

std::vector<ScoreVector> label_samples(const std::vector<BodyParams>& samples,
                                       const PrototypeMemory& memory,
                                       const BodyModel& model,
                                       const PartWeights& w) {
  std::vector<BodyParams> prototypes;
  prototypes.reserve(memory.k());
  for (int j = 0; j < memory.k(); ++j) prototypes.push_back(memory.prototype(j));
  const Assignment a = assign_samples(samples, prototypes, model, w);
  std::vector<ScoreVector> labels(samples.size());
  for (size_t i = 0; i < samples.size(); ++i) {
    labels[i] = ScoreVector::Zero(memory.k());
    labels[i](a.assignments[i]) = 1.0;
  }
  return labels;
}

BodyParams select_prototype(const PrototypeMemory& memory,
                            const ScoreVector& c) {
  validate_score(c, memory.k());
  if (is_one_hot(c)) {
    Eigen::Index row;
    c.maxCoeff(&row);
    return BodyParams::from_flat(memory.rows.row(row).transpose());
  }
  const Eigen::VectorXd blended = memory.rows.transpose() * c;
  BodyParams p = BodyParams::from_flat(blended);
  // A soft blend of 6D blocks is generally off-manifold; Gram-Schmidt
  // absorbs it back to a rotation.
  for (int j = 0; j < kNumJoints; ++j) {
    try {
      p.set_pose_block(j, rotmat_to_rot6d(rot6d_to_rotmat(p.pose_block(j))));
    } catch (const Error& e) {
      throw Error(ErrorKind::DegenerateSelection,
                  "select_prototype: joint " + std::to_string(j) +
                      " blended to a degenerate block: " + e.what());
    }
  }
  return p;
}

nlohmann::json memory_to_json(const PrototypeMemory& memory) {
  nlohmann::json j;
  j["K"] = memory.k();
  j["dim"] = kParamDim;
  auto& rows = j["rows"] = nlohmann::json::array();
  for (int i = 0; i < memory.k(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (int d = 0; d < kParamDim; ++d) row.push_back(memory.rows(i, d));
    rows.push_back(std::move(row));
  }
  j["meta"] = memory.meta.empty() ? nlohmann::json::object()
                                  : nlohmann::json::parse(memory.meta);
  return j;
}

PrototypeMemory memory_from_json(const nlohmann::json& j) {
  PrototypeMemory memory;
  try {
    const int k = j.at("K").get<int>();
    const int dim = j.at("dim").get<int>();
    if (k < 1) throw Error(ErrorKind::LoadError, "memory: K must be >= 1");
    if (dim != kParamDim) {
      throw Error(ErrorKind::LoadError, "memory: dim must be 154");
    }
    const auto& rows = j.at("rows");
    if (static_cast<int>(rows.size()) != k) {
      throw Error(ErrorKind::LoadError, "memory: row count mismatch");
    }
    memory.rows.resize(k, kParamDim);
    for (int i = 0; i < k; ++i) {
      const auto& row = rows.at(i);
      if (static_cast<int>(row.size()) != kParamDim) {
        throw Error(ErrorKind::LoadError,
                    "memory: row " + std::to_string(i) + " has wrong length");
      }
      for (int d = 0; d < kParamDim; ++d) {
        memory.rows(i, d) = row.at(d).get<double>();
      }
    }
    if (j.contains("meta")) memory.meta = j.at("meta").dump();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::LoadError, std::string("memory parse: ") + e.what());
  }
  return memory;
}

void save_memory(const PrototypeMemory& memory, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::Io, "cannot write memory file: " + path);
  out << memory_to_json(memory).dump() << "\n";
  if (!out) throw Error(ErrorKind::Io, "write failed: " + path);
}

PrototypeMemory load_memory(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open memory file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::LoadError,
                "memory JSON parse failed (" + path + "): " + e.what());
  }
  return memory_from_json(j);
}

void save_scores(const std::vector<ScoreVector>& scores,
                 const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::Io, "cannot write score file: " + path);
  for (const ScoreVector& c : scores) {
    nlohmann::json line = nlohmann::json::array();
    for (Eigen::Index i = 0; i < c.size(); ++i) line.push_back(c(i));
    out << line.dump() << "\n";
  }
  if (!out) throw Error(ErrorKind::Io, "write failed: " + path);
}

std::vector<ScoreVector> load_scores(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open score file: " + path);
  std::vector<ScoreVector> scores;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::LoadError, "score file line " +
                                            std::to_string(line_no) + ": " +
                                            e.what());
    }
    ScoreVector c(j.size());
    for (size_t i = 0; i < j.size(); ++i) c(i) = j.at(i).get<double>();
    scores.push_back(std::move(c));
  }
  return scores;
}

}  // namespace protomem
