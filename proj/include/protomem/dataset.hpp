#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "protomem/body_model.hpp"
#include "protomem/types.hpp"

namespace protomem {

// One body configuration with optional fitting targets.
struct DatasetRecord {
  BodyParams params;
  std::optional<Joints3D> target_j3d;
  std::optional<Keypoints2D> target_j2d;
  std::optional<Eigen::Matrix<double, kNumJoints, 1>> visibility;
  std::optional<int> label;
};

void save_records(const std::vector<DatasetRecord>& records,
                  const std::string& path);
std::vector<DatasetRecord> load_records(const std::string& path);

std::vector<BodyParams> records_to_params(
    const std::vector<DatasetRecord>& records);

struct SampleGenConfig {
  std::uint64_t seed = 0;
  int n = 100;
  int clusters = 1;
  double noise = 0.05;        // per-joint rotational noise, radians
  bool with_targets = false;  // attach regressed 3D joints and projected 2D
};

struct SyntheticCorpus {
  std::vector<DatasetRecord> records;
  std::vector<int> labels;             // generator cluster per sample
  std::vector<BodyParams> generators;  // the true cluster poses
};

// Seeded synthetic corpus: cluster generators are random poses biased
// toward large limb-joint rotations; members perturb every joint by a
// small random rotation and add small shape noise. noise = 0 reproduces
// each generator exactly.
SyntheticCorpus gen_samples(const SampleGenConfig& config,
                            const BodyModel& model);

void save_labels(const std::vector<int>& labels, const std::string& path);
std::vector<int> load_labels(const std::string& path);

// FNV-1a 64-bit digest of a file's bytes, hex encoded.
std::string file_digest(const std::string& path);

}  // namespace protomem
