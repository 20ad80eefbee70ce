#include "protomem/body_model.hpp"

#include <cmath>
#include <fstream>
#include <random>

#include <nlohmann/json.hpp>

#include "protomem/error.hpp"
#include "protomem/rotations.hpp"

namespace protomem {

namespace {

// Standard humanoid parenting: pelvis root, leg chains, spine chain up to
// the head, collar/arm chains down to the hands.
constexpr std::array<int, kNumJoints> kToyParents = {
    -1, 0, 0, 0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 9, 9, 12, 13, 14, 16, 17, 18,
    19, 20, 21};

// Rest joint positions for the toy skeleton, meters, pelvis at the origin.
const double kToyRest[kNumJoints][3] = {
    {0.00, 0.00, 0.00},    // 0 pelvis
    {0.10, -0.05, 0.00},   // 1 left hip
    {-0.10, -0.05, 0.00},  // 2 right hip
    {0.00, 0.10, 0.00},    // 3 spine1
    {0.10, -0.45, 0.00},   // 4 left knee
    {-0.10, -0.45, 0.00},  // 5 right knee
    {0.00, 0.25, 0.00},    // 6 spine2
    {0.10, -0.85, 0.00},   // 7 left ankle
    {-0.10, -0.85, 0.00},  // 8 right ankle
    {0.00, 0.40, 0.00},    // 9 spine3
    {0.10, -0.90, 0.12},   // 10 left foot
    {-0.10, -0.90, 0.12},  // 11 right foot
    {0.00, 0.55, 0.00},    // 12 neck
    {0.08, 0.50, 0.00},    // 13 left collar
    {-0.08, 0.50, 0.00},   // 14 right collar
    {0.00, 0.70, 0.00},    // 15 head
    {0.20, 0.50, 0.00},    // 16 left shoulder
    {-0.20, 0.50, 0.00},   // 17 right shoulder
    {0.45, 0.50, 0.00},    // 18 left elbow
    {-0.45, 0.50, 0.00},   // 19 right elbow
    {0.70, 0.50, 0.00},    // 20 left wrist
    {-0.70, 0.50, 0.00},   // 21 right wrist
    {0.80, 0.50, 0.00},    // 22 left hand
    {-0.80, 0.50, 0.00}};  // 23 right hand

PartLabel toy_part_for_joint(int joint) {
  if (joint <= 3) return PartLabel::Torso;
  if (joint == 12 || joint == 15) return PartLabel::Head;
  if (joint == 22 || joint == 23) return PartLabel::Hand;
  if (joint == 10 || joint == 11) return PartLabel::Foot;
  return PartLabel::Limb;
}

}  // namespace

BodyParams BodyParams::identity() {
  BodyParams p;
  Rot6d ident;
  ident << 1, 0, 0, 0, 1, 0;
  for (int j = 0; j < kNumJoints; ++j) {
    p.pose.segment<kRot6dDim>(j * kRot6dDim) = ident;
  }
  return p;
}

Rot6d BodyParams::pose_block(int joint) const {
  return pose.segment<kRot6dDim>(joint * kRot6dDim);
}

void BodyParams::set_pose_block(int joint, const Rot6d& block) {
  pose.segment<kRot6dDim>(joint * kRot6dDim) = block;
}

ParamVec BodyParams::flatten() const {
  ParamVec flat;
  flat.head<kPoseDim>() = pose;
  flat.tail<kShapeDim>() = shape;
  return flat;
}

BodyParams BodyParams::from_flat(const Eigen::Ref<const Eigen::VectorXd>& flat) {
  if (flat.size() != kParamDim) {
    throw Error(ErrorKind::InvalidInput,
                "BodyParams: expected " + std::to_string(kParamDim) +
                    " values, got " + std::to_string(flat.size()));
  }
  if (!flat.allFinite()) {
    throw Error(ErrorKind::InvalidInput, "BodyParams: non-finite values");
  }
  BodyParams p;
  p.pose = flat.head<kPoseDim>();
  p.shape = flat.tail<kShapeDim>();
  return p;
}

void BodyModel::validate() const {
  const Eigen::Index v = template_verts.rows();
  if (v == 0 || !template_verts.allFinite()) {
    throw Error(ErrorKind::LoadError, "template: empty or non-finite");
  }
  if (shape_dirs.rows() != 3 * v || shape_dirs.cols() != kShapeDim ||
      !shape_dirs.allFinite()) {
    throw Error(ErrorKind::LoadError, "shape_dirs: expected " +
                                          std::to_string(3 * v) + "x" +
                                          std::to_string(kShapeDim));
  }
  if (skin_weights.rows() != v || skin_weights.cols() != kNumJoints) {
    throw Error(ErrorKind::LoadError, "skin_weights: wrong shape");
  }
  if (skin_weights.minCoeff() < 0.0) {
    throw Error(ErrorKind::LoadError, "skin_weights: negative entry");
  }
  for (Eigen::Index i = 0; i < v; ++i) {
    if (std::abs(skin_weights.row(i).sum() - 1.0) > 1e-6) {
      throw Error(ErrorKind::LoadError,
                  "skin_weights: row " + std::to_string(i) +
                      " does not sum to 1");
    }
  }
  if (joint_regressor.rows() != kNumJoints || joint_regressor.cols() != v) {
    throw Error(ErrorKind::LoadError, "joint_regressor: wrong shape");
  }
  if (joint_regressor.minCoeff() < 0.0) {
    throw Error(ErrorKind::LoadError, "joint_regressor: negative entry");
  }
  for (int j = 0; j < kNumJoints; ++j) {
    if (std::abs(joint_regressor.row(j).sum() - 1.0) > 1e-6) {
      throw Error(ErrorKind::LoadError,
                  "joint_regressor: row " + std::to_string(j) +
                      " does not sum to 1");
    }
  }
  // Parents must form a single rooted tree over 24 nodes.
  int roots = 0;
  for (int j = 0; j < kNumJoints; ++j) {
    if (parents[j] == -1) {
      ++roots;
      continue;
    }
    if (parents[j] < 0 || parents[j] >= kNumJoints) {
      throw Error(ErrorKind::LoadError, "parents: index out of range");
    }
  }
  if (roots != 1) {
    throw Error(ErrorKind::LoadError, "parents: expected exactly one root");
  }
  for (int j = 0; j < kNumJoints; ++j) {
    int cur = j;
    int steps = 0;
    while (cur != -1) {
      cur = parents[cur];
      if (++steps > kNumJoints) {
        throw Error(ErrorKind::LoadError, "parents: cycle detected");
      }
    }
  }
  if (static_cast<Eigen::Index>(part_labels.size()) != v) {
    throw Error(ErrorKind::LoadError, "part_labels: wrong length");
  }
}

Joints3D rest_joints(const BodyModel& model, const ShapeVec& shape) {
  const Eigen::Index v = model.vertex_count();
  MeshVertices shaped = model.template_verts;
  const Eigen::VectorXd offsets = model.shape_dirs * shape;  // (3V)
  for (Eigen::Index i = 0; i < v; ++i) {
    shaped.row(i) += offsets.segment<3>(3 * i).transpose();
  }
  return model.joint_regressor * shaped;
}

ForwardResult forward(const BodyModel& model, const BodyParams& params) {
  const Eigen::Index v = model.vertex_count();
  if (model.shape_dirs.rows() != 3 * v) {
    throw Error(ErrorKind::InvalidInput, "forward: model shape_dirs mismatch");
  }

  // Shaped template and its rest joints.
  MeshVertices shaped = model.template_verts;
  const Eigen::VectorXd offsets = model.shape_dirs * params.shape;
  for (Eigen::Index i = 0; i < v; ++i) {
    shaped.row(i) += offsets.segment<3>(3 * i).transpose();
  }
  const Joints3D rest = model.joint_regressor * shaped;

  // Forward kinematics: world transform per joint, rotation about the
  // joint's rest position.
  std::array<Mat3, kNumJoints> rot_world;
  std::array<Vec3, kNumJoints> trans_world;
  Joints3D posed;
  for (int j = 0; j < kNumJoints; ++j) {
    const Mat3 local = rot6d_to_rotmat(params.pose_block(j));
    const int parent = model.parents[j];
    if (parent == -1) {
      rot_world[j] = local;
      trans_world[j] = rest.row(j).transpose();
    } else {
      const Vec3 bone = (rest.row(j) - rest.row(parent)).transpose();
      rot_world[j] = rot_world[parent] * local;
      trans_world[j] = rot_world[parent] * bone + trans_world[parent];
    }
    posed.row(j) = trans_world[j].transpose();
  }

  // Skinning transforms relative to rest, then linear blend skinning.
  std::array<Mat3, kNumJoints> rot_skin;
  std::array<Vec3, kNumJoints> trans_skin;
  for (int j = 0; j < kNumJoints; ++j) {
    rot_skin[j] = rot_world[j];
    trans_skin[j] = trans_world[j] - rot_world[j] * rest.row(j).transpose();
  }

  MeshVertices out(v, 3);
  for (Eigen::Index i = 0; i < v; ++i) {
    const Vec3 p = shaped.row(i).transpose();
    Vec3 acc = Vec3::Zero();
    for (int j = 0; j < kNumJoints; ++j) {
      const double w = model.skin_weights(i, j);
      if (w == 0.0) continue;
      acc += w * (rot_skin[j] * p + trans_skin[j]);
    }
    out.row(i) = acc.transpose();
  }
  return {std::move(out), posed};
}

Joints3D regress_joints(const BodyModel& model, const MeshVertices& verts) {
  if (verts.rows() != model.joint_regressor.cols()) {
    throw Error(ErrorKind::InvalidInput,
                "regress_joints: vertex count mismatch");
  }
  return model.joint_regressor * verts;
}

nlohmann::json model_to_json(const BodyModel& model) {
  const Eigen::Index v = model.vertex_count();
  nlohmann::json j;
  auto& tmpl = j["template"] = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v; ++i) {
    tmpl.push_back({model.template_verts(i, 0), model.template_verts(i, 1),
                    model.template_verts(i, 2)});
  }
  auto& dirs = j["shape_dirs"] = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v; ++i) {
    nlohmann::json per_vertex = nlohmann::json::array();
    for (int c = 0; c < 3; ++c) {
      nlohmann::json per_coord = nlohmann::json::array();
      for (int k = 0; k < kShapeDim; ++k) {
        per_coord.push_back(model.shape_dirs(3 * i + c, k));
      }
      per_vertex.push_back(std::move(per_coord));
    }
    dirs.push_back(std::move(per_vertex));
  }
  auto& skin = j["skin_weights"] = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v; ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (int k = 0; k < kNumJoints; ++k) row.push_back(model.skin_weights(i, k));
    skin.push_back(std::move(row));
  }
  auto& reg = j["joint_regressor"] = nlohmann::json::array();
  for (int k = 0; k < kNumJoints; ++k) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index i = 0; i < v; ++i) row.push_back(model.joint_regressor(k, i));
    reg.push_back(std::move(row));
  }
  j["parents"] = model.parents;
  auto& labels = j["part_labels"] = nlohmann::json::array();
  for (PartLabel label : model.part_labels) {
    labels.push_back(part_label_name(label));
  }
  j["meta"] = model.meta.empty() ? nlohmann::json::object()
                                 : nlohmann::json::parse(model.meta);
  return j;
}

BodyModel model_from_json(const nlohmann::json& j) {
  BodyModel model;
  try {
    const auto& tmpl = j.at("template");
    const Eigen::Index v = static_cast<Eigen::Index>(tmpl.size());
    model.template_verts.resize(v, 3);
    for (Eigen::Index i = 0; i < v; ++i) {
      for (int c = 0; c < 3; ++c) {
        model.template_verts(i, c) = tmpl.at(i).at(c).get<double>();
      }
    }
    const auto& dirs = j.at("shape_dirs");
    if (static_cast<Eigen::Index>(dirs.size()) != v) {
      throw Error(ErrorKind::LoadError, "shape_dirs: vertex count mismatch");
    }
    model.shape_dirs.resize(3 * v, kShapeDim);
    for (Eigen::Index i = 0; i < v; ++i) {
      for (int c = 0; c < 3; ++c) {
        const auto& per_coord = dirs.at(i).at(c);
        if (per_coord.size() != kShapeDim) {
          throw Error(ErrorKind::LoadError, "shape_dirs: inner length");
        }
        for (int k = 0; k < kShapeDim; ++k) {
          model.shape_dirs(3 * i + c, k) = per_coord.at(k).get<double>();
        }
      }
    }
    const auto& skin = j.at("skin_weights");
    if (static_cast<Eigen::Index>(skin.size()) != v) {
      throw Error(ErrorKind::LoadError, "skin_weights: vertex count mismatch");
    }
    model.skin_weights.resize(v, kNumJoints);
    for (Eigen::Index i = 0; i < v; ++i) {
      for (int k = 0; k < kNumJoints; ++k) {
        model.skin_weights(i, k) = skin.at(i).at(k).get<double>();
      }
    }
    const auto& reg = j.at("joint_regressor");
    if (reg.size() != kNumJoints) {
      throw Error(ErrorKind::LoadError, "joint_regressor: row count");
    }
    model.joint_regressor.resize(kNumJoints, v);
    for (int k = 0; k < kNumJoints; ++k) {
      if (static_cast<Eigen::Index>(reg.at(k).size()) != v) {
        throw Error(ErrorKind::LoadError, "joint_regressor: column count");
      }
      for (Eigen::Index i = 0; i < v; ++i) {
        model.joint_regressor(k, i) = reg.at(k).at(i).get<double>();
      }
    }
    const auto& parents = j.at("parents");
    if (parents.size() != kNumJoints) {
      throw Error(ErrorKind::LoadError, "parents: expected 24 entries");
    }
    for (int k = 0; k < kNumJoints; ++k) {
      model.parents[k] = parents.at(k).get<int>();
    }
    const auto& labels = j.at("part_labels");
    if (static_cast<Eigen::Index>(labels.size()) != v) {
      throw Error(ErrorKind::LoadError, "part_labels: wrong length");
    }
    model.part_labels.reserve(v);
    for (const auto& name : labels) {
      model.part_labels.push_back(part_label_from_name(name.get<std::string>()));
    }
    if (j.contains("meta")) {
      model.meta = j.at("meta").dump();
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::LoadError, std::string("model parse: ") + e.what());
  }
  model.validate();
  return model;
}

BodyModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorKind::Io, "cannot open model file: " + path);
  }
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::LoadError,
                "model JSON parse failed (" + path + "): " + e.what());
  }
  return model_from_json(j);
}

void save_model(const BodyModel& model, const std::string& path) {
  std::ofstream out(path);
  if (!out) {
    throw Error(ErrorKind::Io, "cannot write model file: " + path);
  }
  out << model_to_json(model).dump() << "\n";
  if (!out) {
    throw Error(ErrorKind::Io, "write failed: " + path);
  }
}

BodyModel gen_toy_model(std::uint64_t seed, int verts_per_joint) {
  if (verts_per_joint < 3) {
    throw Error(ErrorKind::InvalidInput,
                "gen_toy_model: verts_per_joint must be >= 3");
  }
  const int n = verts_per_joint;
  const Eigen::Index v = static_cast<Eigen::Index>(kNumJoints) * n;
  constexpr double kRingRadius = 0.05;

  BodyModel model;
  model.parents = kToyParents;
  model.template_verts.resize(v, 3);
  model.skin_weights = Eigen::MatrixXd::Zero(v, kNumJoints);
  model.joint_regressor = Eigen::MatrixXd::Zero(kNumJoints, v);
  model.part_labels.resize(v);

  for (int j = 0; j < kNumJoints; ++j) {
    const Vec3 center(kToyRest[j][0], kToyRest[j][1], kToyRest[j][2]);
    for (int i = 0; i < n; ++i) {
      const Eigen::Index row = static_cast<Eigen::Index>(j) * n + i;
      const double phi = 2.0 * M_PI * i / n;
      // Ring in the xz-plane; the regressor row is uniform over the ring,
      // so the regressed rest joint is the ring centroid = the joint.
      model.template_verts.row(row) =
          (center + kRingRadius * Vec3(std::cos(phi), 0.0, std::sin(phi)))
              .transpose();
      model.joint_regressor(j, row) = 1.0 / n;
      model.part_labels[row] = toy_part_for_joint(j);
      if (model.parents[j] == -1) {
        model.skin_weights(row, j) = 1.0;
      } else {
        model.skin_weights(row, j) = 0.8;
        model.skin_weights(row, model.parents[j]) = 0.2;
      }
    }
  }

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  model.shape_dirs.resize(3 * v, kShapeDim);
  for (Eigen::Index r = 0; r < 3 * v; ++r) {
    for (int k = 0; k < kShapeDim; ++k) {
      model.shape_dirs(r, k) = 0.01 * unit(rng);
    }
  }

  nlohmann::json meta;
  meta["kind"] = "toy";
  meta["seed"] = seed;
  meta["verts_per_joint"] = verts_per_joint;
  model.meta = meta.dump();

  model.validate();
  return model;
}

}  // namespace protomem
