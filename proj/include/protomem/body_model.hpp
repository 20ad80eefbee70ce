#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "protomem/types.hpp"

namespace protomem {

// Pose as 24 six-dimensional rotation blocks plus 10 shape coefficients.
// The flattened layout is pose blocks first (joint 0..23), then shape.
struct BodyParams {
  PoseVec pose = PoseVec::Zero();
  ShapeVec shape = ShapeVec::Zero();

  // Neutral configuration: every pose block encodes the identity rotation.
  static BodyParams identity();

  Rot6d pose_block(int joint) const;
  void set_pose_block(int joint, const Rot6d& block);

  ParamVec flatten() const;
  // Throws InvalidInput when the vector is not 154 long or non-finite.
  static BodyParams from_flat(const Eigen::Ref<const Eigen::VectorXd>& flat);
};

struct BodyModel {
  MeshVertices template_verts;              // V x 3, meters
  Eigen::MatrixXd shape_dirs;               // (3V) x 10, row v*3+coord
  Eigen::MatrixXd skin_weights;             // V x 24, rows sum to 1
  Eigen::MatrixXd joint_regressor;          // 24 x V, rows sum to 1
  std::array<int, kNumJoints> parents{};    // kinematic tree, root = -1
  std::vector<PartLabel> part_labels;       // per vertex
  std::string meta;                         // free-form JSON text

  Eigen::Index vertex_count() const { return template_verts.rows(); }

  // Checks every structural invariant; throws LoadError naming the
  // offending field.
  void validate() const;
};

struct ForwardResult {
  MeshVertices vertices;
  Joints3D joints;  // posed skeleton joints from forward kinematics
};

// Shape blend, forward kinematics over the parent tree, then linear blend
// skinning. Throws InvalidInput on dimension mismatch or undecodable pose.
ForwardResult forward(const BodyModel& model, const BodyParams& params);

// joint_regressor * verts.
Joints3D regress_joints(const BodyModel& model, const MeshVertices& verts);

// Rest-pose joints of the shaped template, joint_regressor * (template +
// shape offsets).
Joints3D rest_joints(const BodyModel& model, const ShapeVec& shape);

BodyModel load_model(const std::string& path);
void save_model(const BodyModel& model, const std::string& path);

nlohmann::json model_to_json(const BodyModel& model);
BodyModel model_from_json(const nlohmann::json& j);

// Deterministic desk-scale stand-in for a full-resolution body model:
// 24 joints on the standard humanoid parent tree, a ring of
// verts_per_joint vertices around each joint, skinning split 0.8/0.2
// between owner and parent, seeded shape offsets scaled to 0.01 m.
BodyModel gen_toy_model(std::uint64_t seed, int verts_per_joint);

}  // namespace protomem
