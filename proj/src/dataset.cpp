#include "protomem/dataset.hpp"

#include <fstream>
#include <random>

#include <nlohmann/json.hpp>

#include "protomem/error.hpp"
#include "protomem/fitting.hpp"
#include "protomem/rotations.hpp"

namespace protomem {

namespace {

// Arm and leg chain joints of the standard 24-joint tree; the synthetic
// generators put their large rotations here so cluster identity shows up
// in the limbs.
constexpr int kLimbChainJoints[] = {1, 2, 4, 5, 7, 8, 16, 17, 18, 19, 20, 21};

bool is_limb_chain(int joint) {
  for (int j : kLimbChainJoints) {
    if (j == joint) return true;
  }
  return false;
}

Vec3 random_axis(std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Vec3 axis;
  do {
    axis = Vec3(gauss(rng), gauss(rng), gauss(rng));
  } while (axis.norm() < 1e-6);
  return axis.normalized();
}

nlohmann::json record_to_json(const DatasetRecord& record) {
  nlohmann::json j;
  nlohmann::json pose = nlohmann::json::array();
  for (int i = 0; i < kPoseDim; ++i) pose.push_back(record.params.pose(i));
  j["pose"] = std::move(pose);
  nlohmann::json shape = nlohmann::json::array();
  for (int i = 0; i < kShapeDim; ++i) shape.push_back(record.params.shape(i));
  j["shape"] = std::move(shape);
  if (record.target_j3d) {
    nlohmann::json rows = nlohmann::json::array();
    for (int i = 0; i < kNumJoints; ++i) {
      rows.push_back({(*record.target_j3d)(i, 0), (*record.target_j3d)(i, 1),
                      (*record.target_j3d)(i, 2)});
    }
    j["target_j3d"] = std::move(rows);
  }
  if (record.target_j2d) {
    nlohmann::json rows = nlohmann::json::array();
    for (int i = 0; i < kNumJoints; ++i) {
      rows.push_back({(*record.target_j2d)(i, 0), (*record.target_j2d)(i, 1)});
    }
    j["target_j2d"] = std::move(rows);
  }
  if (record.visibility) {
    nlohmann::json vis = nlohmann::json::array();
    for (int i = 0; i < kNumJoints; ++i) vis.push_back((*record.visibility)(i));
    j["visibility"] = std::move(vis);
  }
  if (record.label) j["label"] = *record.label;
  return j;
}

DatasetRecord record_from_json(const nlohmann::json& j) {
  DatasetRecord record;
  const auto& pose = j.at("pose");
  const auto& shape = j.at("shape");
  if (pose.size() != kPoseDim || shape.size() != kShapeDim) {
    throw Error(ErrorKind::LoadError, "record: pose/shape length mismatch");
  }
  for (int i = 0; i < kPoseDim; ++i) record.params.pose(i) = pose.at(i).get<double>();
  for (int i = 0; i < kShapeDim; ++i) record.params.shape(i) = shape.at(i).get<double>();
  if (j.contains("target_j3d")) {
    const auto& rows = j.at("target_j3d");
    if (rows.size() != kNumJoints) {
      throw Error(ErrorKind::LoadError, "record: target_j3d needs 24 rows");
    }
    Joints3D m;
    for (int i = 0; i < kNumJoints; ++i)
      for (int c = 0; c < 3; ++c) m(i, c) = rows.at(i).at(c).get<double>();
    record.target_j3d = m;
  }
  if (j.contains("target_j2d")) {
    const auto& rows = j.at("target_j2d");
    if (rows.size() != kNumJoints) {
      throw Error(ErrorKind::LoadError, "record: target_j2d needs 24 rows");
    }
    Keypoints2D m;
    for (int i = 0; i < kNumJoints; ++i)
      for (int c = 0; c < 2; ++c) m(i, c) = rows.at(i).at(c).get<double>();
    record.target_j2d = m;
  }
  if (j.contains("visibility")) {
    const auto& vis = j.at("visibility");
    if (vis.size() != kNumJoints) {
      throw Error(ErrorKind::LoadError, "record: visibility needs 24 entries");
    }
    Eigen::Matrix<double, kNumJoints, 1> v;
    for (int i = 0; i < kNumJoints; ++i) v(i) = vis.at(i).get<double>();
    record.visibility = v;
  }
  if (j.contains("label")) record.label = j.at("label").get<int>();
  return record;
}

}  // namespace

void save_records(const std::vector<DatasetRecord>& records,
                  const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::Io, "cannot write dataset: " + path);
  for (const DatasetRecord& r : records) out << record_to_json(r).dump() << "\n";
  if (!out) throw Error(ErrorKind::Io, "write failed: " + path);
}

std::vector<DatasetRecord> load_records(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open dataset: " + path);
  std::vector<DatasetRecord> records;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      records.push_back(record_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::LoadError, "dataset line " +
                                            std::to_string(line_no) + ": " +
                                            e.what());
    }
  }
  return records;
}

std::vector<BodyParams> records_to_params(
    const std::vector<DatasetRecord>& records) {
  std::vector<BodyParams> params;
  params.reserve(records.size());
  for (const DatasetRecord& r : records) params.push_back(r.params);
  return params;
}

SyntheticCorpus gen_samples(const SampleGenConfig& config,
                            const BodyModel& model) {
  if (config.clusters < 1 || config.n < config.clusters) {
    throw Error(ErrorKind::InvalidInput,
                "gen_samples: need n >= clusters >= 1");
  }
  if (config.noise < 0.0) {
    throw Error(ErrorKind::InvalidInput, "gen_samples: noise must be >= 0");
  }
  std::mt19937_64 rng(config.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  // Cluster generators first, then members, so the draw order is fixed.
  std::vector<BodyParams> generators(config.clusters);
  for (int c = 0; c < config.clusters; ++c) {
    BodyParams gen = BodyParams::identity();
    for (int j = 0; j < kNumJoints; ++j) {
      const double angle = is_limb_chain(j) ? 0.5 + 0.9 * unit(rng)
                                            : 0.15 * unit(rng);
      const Vec3 axis = random_axis(rng);
      gen.set_pose_block(j, rotmat_to_rot6d(axis_angle_to_rotmat(axis * angle)));
    }
    for (int k = 0; k < kShapeDim; ++k) {
      gen.shape(k) = 2.0 * unit(rng) - 1.0;
    }
    generators[c] = std::move(gen);
  }

  SyntheticCorpus corpus;
  corpus.generators = generators;
  corpus.records.resize(config.n);
  corpus.labels.resize(config.n);
  for (int i = 0; i < config.n; ++i) {
    const int c = i % config.clusters;
    corpus.labels[i] = c;
    BodyParams member = generators[c];
    for (int j = 0; j < kNumJoints; ++j) {
      const double angle = config.noise * unit(rng);
      const Vec3 axis = random_axis(rng);
      const Mat3 base = rot6d_to_rotmat(member.pose_block(j));
      const Mat3 perturbed = base * axis_angle_to_rotmat(axis * angle);
      member.set_pose_block(j, rotmat_to_rot6d(perturbed));
    }
    for (int k = 0; k < kShapeDim; ++k) {
      member.shape(k) += config.noise * (2.0 * unit(rng) - 1.0);
    }
    DatasetRecord record;
    record.params = std::move(member);
    record.label = c;
    if (config.with_targets) {
      const ForwardResult fwd = forward(model, record.params);
      const Joints3D joints = regress_joints(model, fwd.vertices);
      record.target_j3d = joints;
      record.target_j2d = project(joints, CameraParams{});
      record.visibility = Eigen::Matrix<double, kNumJoints, 1>::Ones();
    }
    corpus.records[i] = std::move(record);
  }
  return corpus;
}

void save_labels(const std::vector<int>& labels, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::Io, "cannot write labels: " + path);
  nlohmann::json j;
  j["labels"] = labels;
  out << j.dump() << "\n";
  if (!out) throw Error(ErrorKind::Io, "write failed: " + path);
}

std::vector<int> load_labels(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open labels: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::LoadError,
                "labels JSON parse failed (" + path + "): " + e.what());
  }
  try {
    return j.at("labels").get<std::vector<int>>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::LoadError, std::string("labels parse: ") + e.what());
  }
}

std::string file_digest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open for digest: " + path);
  std::uint64_t hash = 0xcbf29ce484222325ull;  // FNV-1a
  char buffer[4096];
  while (in.read(buffer, sizeof(buffer)) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      hash ^= static_cast<unsigned char>(buffer[i]);
      hash *= 0x100000001b3ull;
    }
  }
  char hex[17];
  std::snprintf(hex, sizeof(hex), "%016llx",
                static_cast<unsigned long long>(hash));
  return std::string(hex);
}

}  // namespace protomem
