#include "protomem/clustering.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <random>

#include <nlohmann/json.hpp>

#include "protomem/error.hpp"
#include "protomem/rotations.hpp"

namespace protomem {

namespace {

// Exceptions must not escape an OpenMP region, so per-sample failures are
// collected and rethrown afterwards.
std::vector<MeshVertices> forward_all(const std::vector<BodyParams>& params,
                                      const BodyModel& model, bool parallel) {
  const std::int64_t n = static_cast<std::int64_t>(params.size());
  std::vector<MeshVertices> verts(n);
  std::vector<std::string> errors(n);
  if (parallel) {
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) {
      try {
        verts[i] = forward(model, params[i]).vertices;
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
  } else {
    for (std::int64_t i = 0; i < n; ++i) {
      verts[i] = forward(model, params[i]).vertices;
    }
  }
  for (std::int64_t i = 0; i < n; ++i) {
    if (!errors[i].empty()) {
      throw Error(ErrorKind::InvalidInput,
                  "sample " + std::to_string(i) + ": " + errors[i]);
    }
  }
  return verts;
}

// Reseed empty clusters from the farthest samples: distances descending,
// ties toward the lower sample index, each donor used at most once.
void reseed_empty_clusters(const std::vector<BodyParams>& samples,
                           const std::vector<double>& distances,
                           std::vector<BodyParams>& centers,
                           const std::vector<int>& counts) {
  std::vector<int> order(samples.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    if (distances[a] != distances[b]) return distances[a] > distances[b];
    return a < b;
  });
  size_t donor = 0;
  for (size_t j = 0; j < centers.size(); ++j) {
    if (counts[j] > 0) continue;
    if (donor >= order.size()) {
      throw Error(ErrorKind::CenterUpdate,
                  "cluster " + std::to_string(j) +
                      ": no sample available to reseed empty cluster");
    }
    centers[j] = samples[order[donor++]];
  }
}

}  // namespace

const std::string& variant_name(Variant v) {
  static const std::string names[] = {"p3dh", "3dh", "random_center", "naive"};
  return names[static_cast<int>(v)];
}

Variant variant_from_name(const std::string& name) {
  if (name == "p3dh") return Variant::P3dh;
  if (name == "3dh") return Variant::Plain3dh;
  if (name == "random_center") return Variant::RandomCenter;
  if (name == "naive" || name == "naive_params") return Variant::NaiveParams;
  throw Error(ErrorKind::InvalidInput, "unknown clustering variant: " + name);
}

void ClusterConfig::validate() const {
  if (k < 1) throw Error(ErrorKind::InvalidInput, "cluster config: k must be >= 1");
  if (lambda_hat < 1) {
    throw Error(ErrorKind::InvalidInput, "cluster config: lambda_hat must be >= 1");
  }
  if (!(gamma_hat >= 0.0)) {
    throw Error(ErrorKind::InvalidInput, "cluster config: gamma_hat must be >= 0");
  }
  part_weight_map.validate();
}

std::vector<BodyParams> init_centers(const std::vector<BodyParams>& samples,
                                     int k, std::uint64_t seed) {
  if (k < 1 || static_cast<size_t>(k) > samples.size()) {
    throw Error(ErrorKind::InvalidInput,
                "init_centers: need at least k samples, got " +
                    std::to_string(samples.size()) + " for k=" +
                    std::to_string(k));
  }
  std::vector<int> indices(samples.size());
  std::iota(indices.begin(), indices.end(), 0);
  std::mt19937_64 rng(seed);
  // Partial Fisher-Yates: the first k slots are the draw, in draw order.
  std::vector<BodyParams> centers;
  centers.reserve(k);
  for (int i = 0; i < k; ++i) {
    std::uniform_int_distribution<size_t> pick(i, indices.size() - 1);
    std::swap(indices[i], indices[pick(rng)]);
    centers.push_back(samples[indices[i]]);
  }
  return centers;
}

Assignment assign_to_center_verts(const std::vector<MeshVertices>& sample_verts,
                                  const std::vector<MeshVertices>& center_verts,
                                  const PartWeights& w, bool parallel) {
  if (sample_verts.empty() || center_verts.empty()) {
    throw Error(ErrorKind::InvalidInput, "assign: empty samples or centers");
  }
  // Dimensions are checked up front so the parallel loop cannot throw.
  for (const auto& sv : sample_verts) {
    if (sv.rows() != w.size()) {
      throw Error(ErrorKind::InvalidInput, "assign: sample vertex count mismatch");
    }
  }
  for (const auto& cv : center_verts) {
    if (cv.rows() != w.size()) {
      throw Error(ErrorKind::InvalidInput, "assign: center vertex count mismatch");
    }
  }
  const std::int64_t n = static_cast<std::int64_t>(sample_verts.size());
  const int k = static_cast<int>(center_verts.size());
  Assignment out;
  out.assignments.resize(n);
  out.distances.resize(n);

  auto assign_one = [&](std::int64_t i) {
    int best = 0;
    double best_dist = weighted_vertex_distance(sample_verts[i], center_verts[0], w);
    for (int j = 1; j < k; ++j) {
      const double d = weighted_vertex_distance(sample_verts[i], center_verts[j], w);
      if (d < best_dist) {
        best_dist = d;
        best = j;
      }
    }
    out.assignments[i] = best;
    out.distances[i] = best_dist;
  };

  if (parallel) {
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) assign_one(i);
  } else {
    for (std::int64_t i = 0; i < n; ++i) assign_one(i);
  }
  return out;
}

Assignment assign_samples(const std::vector<BodyParams>& samples,
                          const std::vector<BodyParams>& centers,
                          const BodyModel& model, const PartWeights& w) {
  const auto sample_verts = forward_all(samples, model, true);
  const auto center_verts = forward_all(centers, model, false);
  return assign_to_center_verts(sample_verts, center_verts, w, true);
}

Assignment assign_samples_serial(const std::vector<BodyParams>& samples,
                                 const std::vector<BodyParams>& centers,
                                 const BodyModel& model, const PartWeights& w) {
  const auto sample_verts = forward_all(samples, model, false);
  const auto center_verts = forward_all(centers, model, false);
  return assign_to_center_verts(sample_verts, center_verts, w, false);
}

std::vector<BodyParams> update_centers(const std::vector<BodyParams>& samples,
                                       const std::vector<int>& assignments,
                                       const std::vector<double>& distances,
                                       int k) {
  if (assignments.size() != samples.size()) {
    throw Error(ErrorKind::InvalidInput, "update_centers: assignment size");
  }
  std::vector<std::vector<int>> members(k);
  for (size_t i = 0; i < assignments.size(); ++i) {
    const int a = assignments[i];
    if (a < 0 || a >= k) {
      throw Error(ErrorKind::InvalidInput, "update_centers: assignment out of range");
    }
    members[a].push_back(static_cast<int>(i));
  }

  std::vector<BodyParams> centers(k);
  std::vector<int> counts(k, 0);
  std::vector<std::string> errors(k);
#pragma omp parallel for schedule(static)
  for (int j = 0; j < k; ++j) {
    counts[j] = static_cast<int>(members[j].size());
    if (members[j].empty()) continue;
    BodyParams center;
    for (int idx : members[j]) center.shape += samples[idx].shape;
    center.shape /= static_cast<double>(members[j].size());

    std::vector<Quat> quats(members[j].size());
    for (int joint = 0; joint < kNumJoints && errors[j].empty(); ++joint) {
      try {
        for (size_t m = 0; m < members[j].size(); ++m) {
          quats[m] = rotmat_to_quat(
              rot6d_to_rotmat(samples[members[j][m]].pose_block(joint)));
        }
        const Quat avg = average_quaternions(quats);
        center.set_pose_block(joint, rotmat_to_rot6d(quat_to_rotmat(avg)));
      } catch (const std::exception& e) {
        errors[j] = "cluster " + std::to_string(j) + ", joint " +
                    std::to_string(joint) + ": " + e.what();
      }
    }
    centers[j] = std::move(center);
  }
  for (int j = 0; j < k; ++j) {
    if (!errors[j].empty()) throw Error(ErrorKind::CenterUpdate, errors[j]);
  }

  if (std::any_of(counts.begin(), counts.end(), [](int c) { return c == 0; })) {
    if (distances.size() != samples.size()) {
      throw Error(ErrorKind::InvalidInput,
                  "update_centers: distances required to reseed empty clusters");
    }
    reseed_empty_clusters(samples, distances, centers, counts);
  }
  return centers;
}

ClusterResult p3dh_kmeans(const std::vector<BodyParams>& samples,
                          const ClusterConfig& config, const BodyModel& model) {
  config.validate();
  if (samples.size() < static_cast<size_t>(config.k)) {
    throw Error(ErrorKind::InvalidInput, "p3dh_kmeans: fewer samples than k");
  }
  // Plain3dh and RandomCenter assign with uniform vertex weights.
  const PartWeightMap map = config.variant == Variant::P3dh
                                ? config.part_weight_map
                                : PartWeightMap::uniform();
  const PartWeights w = build_part_weights(model, map);

  ClusterResult result;
  result.config = config;
  result.centers = init_centers(samples, config.k, config.seed);

  // Sample vertices never change across iterations; centers are re-posed
  // each round.
  const auto sample_verts = forward_all(samples, model, true);

  if (config.variant == Variant::RandomCenter) {
    const auto center_verts = forward_all(result.centers, model, false);
    Assignment a = assign_to_center_verts(sample_verts, center_verts, w, true);
    const double mean =
        std::accumulate(a.distances.begin(), a.distances.end(), 0.0) /
        static_cast<double>(a.distances.size());
    result.trace.push_back(mean);
    result.assignments = std::move(a.assignments);
    result.distances = std::move(a.distances);
    return result;
  }

  Assignment current;
  bool centers_dirty = true;  // true when centers changed after the last pass
  for (int iter = 0; iter < config.lambda_hat; ++iter) {
    const auto center_verts = forward_all(result.centers, model, false);
    current = assign_to_center_verts(sample_verts, center_verts, w, true);
    centers_dirty = false;
    const double mean =
        std::accumulate(current.distances.begin(), current.distances.end(), 0.0) /
        static_cast<double>(current.distances.size());
    result.trace.push_back(mean);
    if (mean <= config.gamma_hat) break;
    try {
      result.centers = update_centers(samples, current.assignments,
                                      current.distances, config.k);
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::CenterUpdate) {
        throw Error(ErrorKind::CenterUpdate,
                    "iteration " + std::to_string(iter) + ": " + e.what());
      }
      throw;
    }
    centers_dirty = true;
  }

  if (centers_dirty) {
    // Final pass so assignments/distances describe the returned centers.
    const auto center_verts = forward_all(result.centers, model, false);
    current = assign_to_center_verts(sample_verts, center_verts, w, true);
    const double mean =
        std::accumulate(current.distances.begin(), current.distances.end(), 0.0) /
        static_cast<double>(current.distances.size());
    result.trace.push_back(mean);
  }
  result.assignments = std::move(current.assignments);
  result.distances = std::move(current.distances);
  return result;
}

ClusterResult naive_kmeans(const std::vector<BodyParams>& samples,
                           const ClusterConfig& config) {
  config.validate();
  if (samples.size() < static_cast<size_t>(config.k)) {
    throw Error(ErrorKind::InvalidInput, "naive_kmeans: fewer samples than k");
  }
  const std::int64_t n = static_cast<std::int64_t>(samples.size());
  std::vector<ParamVec> flat(n);
  for (std::int64_t i = 0; i < n; ++i) flat[i] = samples[i].flatten();

  ClusterResult result;
  result.config = config;
  result.centers = init_centers(samples, config.k, config.seed);

  std::vector<int> assignments(n);
  std::vector<double> distances(n);
  auto assign_pass = [&]() {
    std::vector<ParamVec> center_flat(result.centers.size());
    for (size_t j = 0; j < result.centers.size(); ++j) {
      center_flat[j] = result.centers[j].flatten();
    }
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) {
      int best = 0;
      double best_dist = (flat[i] - center_flat[0]).squaredNorm();
      for (size_t j = 1; j < center_flat.size(); ++j) {
        const double d = (flat[i] - center_flat[j]).squaredNorm();
        if (d < best_dist) {
          best_dist = d;
          best = static_cast<int>(j);
        }
      }
      assignments[i] = best;
      distances[i] = best_dist;
    }
    return std::accumulate(distances.begin(), distances.end(), 0.0) /
           static_cast<double>(n);
  };

  bool centers_dirty = true;
  for (int iter = 0; iter < config.lambda_hat; ++iter) {
    const double mean = assign_pass();
    centers_dirty = false;
    result.trace.push_back(mean);
    if (mean <= config.gamma_hat) break;

    // Coordinate-wise mean of the raw 154-vectors; pose blocks stay as
    // averaged numbers.
    std::vector<ParamVec> sums(config.k, ParamVec::Zero());
    std::vector<int> counts(config.k, 0);
    for (std::int64_t i = 0; i < n; ++i) {
      sums[assignments[i]] += flat[i];
      ++counts[assignments[i]];
    }
    for (int j = 0; j < config.k; ++j) {
      if (counts[j] == 0) continue;
      result.centers[j] =
          BodyParams::from_flat(sums[j] / static_cast<double>(counts[j]));
    }
    if (std::any_of(counts.begin(), counts.end(), [](int c) { return c == 0; })) {
      reseed_empty_clusters(samples, distances, result.centers,
                            counts);
    }
    centers_dirty = true;
  }

  if (centers_dirty) {
    result.trace.push_back(assign_pass());
  }
  result.assignments = std::move(assignments);
  result.distances = std::move(distances);
  return result;
}

ClusterResult run_clustering(const std::vector<BodyParams>& samples,
                             const ClusterConfig& config,
                             const BodyModel& model) {
  if (config.variant == Variant::NaiveParams) {
    return naive_kmeans(samples, config);
  }
  return p3dh_kmeans(samples, config, model);
}

double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.size() != b.size() || a.empty()) {
    throw Error(ErrorKind::InvalidInput, "adjusted_rand_index: size mismatch");
  }
  const int ka = *std::max_element(a.begin(), a.end()) + 1;
  const int kb = *std::max_element(b.begin(), b.end()) + 1;
  Eigen::MatrixXd table = Eigen::MatrixXd::Zero(ka, kb);
  for (size_t i = 0; i < a.size(); ++i) {
    if (a[i] < 0 || b[i] < 0) {
      throw Error(ErrorKind::InvalidInput, "adjusted_rand_index: negative label");
    }
    table(a[i], b[i]) += 1.0;
  }
  auto choose2 = [](double x) { return x * (x - 1.0) / 2.0; };
  double sum_cells = 0.0;
  for (int i = 0; i < ka; ++i)
    for (int j = 0; j < kb; ++j) sum_cells += choose2(table(i, j));
  double sum_rows = 0.0;
  for (int i = 0; i < ka; ++i) sum_rows += choose2(table.row(i).sum());
  double sum_cols = 0.0;
  for (int j = 0; j < kb; ++j) sum_cols += choose2(table.col(j).sum());
  const double total = choose2(static_cast<double>(a.size()));
  const double expected = sum_rows * sum_cols / total;
  const double max_index = 0.5 * (sum_rows + sum_cols);
  if (max_index == expected) return 1.0;  // both partitions trivial
  return (sum_cells - expected) / (max_index - expected);
}

nlohmann::json cluster_result_to_json(const ClusterResult& result) {
  nlohmann::json j;
  auto& centers = j["centers"] = nlohmann::json::array();
  for (const BodyParams& c : result.centers) {
    const ParamVec flat = c.flatten();
    nlohmann::json row = nlohmann::json::array();
    for (int i = 0; i < kParamDim; ++i) row.push_back(flat(i));
    centers.push_back(std::move(row));
  }
  j["assignments"] = result.assignments;
  j["distances"] = result.distances;
  j["trace"] = result.trace;
  j["config"] = {
      {"k", result.config.k},
      {"gamma_hat", result.config.gamma_hat},
      {"lambda_hat", result.config.lambda_hat},
      {"seed", result.config.seed},
      {"variant", variant_name(result.config.variant)},
      {"part_weights",
       {{"torso", result.config.part_weight_map.torso},
        {"head", result.config.part_weight_map.head},
        {"hand", result.config.part_weight_map.hand},
        {"foot", result.config.part_weight_map.foot},
        {"limb", result.config.part_weight_map.limb}}}};
  return j;
}

ClusterResult cluster_result_from_json(const nlohmann::json& j) {
  ClusterResult result;
  try {
    for (const auto& row : j.at("centers")) {
      Eigen::VectorXd flat(row.size());
      for (size_t i = 0; i < row.size(); ++i) flat(i) = row.at(i).get<double>();
      result.centers.push_back(BodyParams::from_flat(flat));
    }
    result.assignments = j.at("assignments").get<std::vector<int>>();
    result.distances = j.at("distances").get<std::vector<double>>();
    result.trace = j.at("trace").get<std::vector<double>>();
    const auto& c = j.at("config");
    result.config.k = c.at("k").get<int>();
    result.config.gamma_hat = c.at("gamma_hat").get<double>();
    result.config.lambda_hat = c.at("lambda_hat").get<int>();
    result.config.seed = c.at("seed").get<std::uint64_t>();
    result.config.variant = variant_from_name(c.at("variant").get<std::string>());
    const auto& pw = c.at("part_weights");
    result.config.part_weight_map.torso = pw.at("torso").get<double>();
    result.config.part_weight_map.head = pw.at("head").get<double>();
    result.config.part_weight_map.hand = pw.at("hand").get<double>();
    result.config.part_weight_map.foot = pw.at("foot").get<double>();
    result.config.part_weight_map.limb = pw.at("limb").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::LoadError,
                std::string("cluster result parse: ") + e.what());
  }
  return result;
}

void save_cluster_result(const ClusterResult& result, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::Io, "cannot write cluster result: " + path);
  out << cluster_result_to_json(result).dump() << "\n";
  if (!out) throw Error(ErrorKind::Io, "write failed: " + path);
}

ClusterResult load_cluster_result(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open cluster result: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::LoadError,
                "cluster result JSON parse failed (" + path + "): " + e.what());
  }
  return cluster_result_from_json(j);
}

}  // namespace protomem
