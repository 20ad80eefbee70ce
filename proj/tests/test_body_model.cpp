#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <nlohmann/json.hpp>
#include <random>

#include "protomem/body_model.hpp"
#include "protomem/error.hpp"
#include "protomem/rotations.hpp"
#include "test_util.hpp"

using namespace protomem;
using testutil::max_abs_diff;

TEST_CASE("body params layout") {
  BodyParams p = BodyParams::identity();
  CHECK(p.flatten().size() == kParamDim);
  Rot6d block = p.pose_block(7);
  CHECK(block(0) == 1.0);
  CHECK(block(4) == 1.0);
  CHECK(max_abs_diff(rot6d_to_rotmat(block), Mat3::Identity()) == 0.0);

  const ParamVec flat = p.flatten();
  const BodyParams back = BodyParams::from_flat(flat);
  CHECK(max_abs_diff(back.pose, p.pose) == 0.0);
  CHECK(max_abs_diff(back.shape, p.shape) == 0.0);

  CHECK_THROWS_AS(BodyParams::from_flat(Eigen::VectorXd::Zero(10)), Error);
}

TEST_CASE("toy model generation is deterministic") {
  const BodyModel a = gen_toy_model(42, 6);
  const BodyModel b = gen_toy_model(42, 6);
  CHECK(max_abs_diff(a.template_verts, b.template_verts) == 0.0);
  CHECK(max_abs_diff(a.shape_dirs, b.shape_dirs) == 0.0);
  CHECK(max_abs_diff(a.skin_weights, b.skin_weights) == 0.0);
  CHECK(max_abs_diff(a.joint_regressor, b.joint_regressor) == 0.0);
  CHECK(a.parents == b.parents);

  const BodyModel c = gen_toy_model(43, 6);
  CHECK(max_abs_diff(a.shape_dirs, c.shape_dirs) > 0.0);

  CHECK(gen_toy_model(0, 10).vertex_count() == 240);
  CHECK_THROWS_AS(gen_toy_model(0, 2), Error);
}

TEST_CASE("neutral forward pass reproduces the template") {
  const BodyModel model = gen_toy_model(0, 5);
  const ForwardResult out = forward(model, BodyParams::identity());
  CHECK(max_abs_diff(out.vertices, model.template_verts) < 1e-12);
  const Joints3D rest = rest_joints(model, ShapeVec::Zero());
  CHECK(max_abs_diff(out.joints, rest) < 1e-12);
  CHECK(out.vertices.allFinite());
}

TEST_CASE("shape blendshapes are linear offsets") {
  const BodyModel model = gen_toy_model(1, 5);
  for (int k : {0, 4, 9}) {
    BodyParams p = BodyParams::identity();
    p.shape(k) = 1.0;
    const ForwardResult out = forward(model, p);
    MeshVertices expected = model.template_verts;
    for (Eigen::Index i = 0; i < model.vertex_count(); ++i) {
      for (int c = 0; c < 3; ++c) expected(i, c) += model.shape_dirs(3 * i + c, k);
    }
    CHECK(max_abs_diff(out.vertices, expected) < 1e-12);
  }
}

TEST_CASE("shape linearity at a fixed pose") {
  const BodyModel model = gen_toy_model(0, 5);
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 10; ++trial) {
    const BodyParams pose_only = testutil::random_params(rng, 0.8, 0.0);
    BodyParams p0 = pose_only, p1 = pose_only, p2 = pose_only, p12 = pose_only;
    const BodyParams r1 = testutil::random_params(rng, 0.0, 1.0);
    const BodyParams r2 = testutil::random_params(rng, 0.0, 1.0);
    p1.shape = r1.shape;
    p2.shape = r2.shape;
    p12.shape = r1.shape + r2.shape;
    const MeshVertices v0 = forward(model, p0).vertices;
    const MeshVertices v1 = forward(model, p1).vertices;
    const MeshVertices v2 = forward(model, p2).vertices;
    const MeshVertices v12 = forward(model, p12).vertices;
    CHECK(max_abs_diff(v12, v1 + v2 - v0) < 1e-9);
  }
}

TEST_CASE("root rotation with zero shape rotates the template") {
  // The toy root sits at the origin, so a pure root rotation is just R
  // applied to every template vertex.
  const BodyModel model = gen_toy_model(0, 5);
  const Mat3 r = axis_angle_to_rotmat(Vec3(0.3, -0.8, 0.5));
  BodyParams params = BodyParams::identity();
  params.set_pose_block(0, rotmat_to_rot6d(r));
  const ForwardResult out = forward(model, params);
  const MeshVertices expected = model.template_verts * r.transpose();
  CHECK(max_abs_diff(out.vertices, expected) < 1e-8);
}

TEST_CASE("global root rotation acts rigidly about the root joint") {
  const BodyModel model = gen_toy_model(0, 5);
  std::mt19937_64 rng(22);
  for (int trial = 0; trial < 10; ++trial) {
    const Mat3 r = testutil::random_rotation(rng);
    BodyParams base = BodyParams::identity();
    base.shape = testutil::random_params(rng, 0.0, 1.0).shape;
    BodyParams rotated = base;
    rotated.set_pose_block(0, rotmat_to_rot6d(r));

    const ForwardResult plain = forward(model, base);
    const ForwardResult posed = forward(model, rotated);
    const Vec3 root = plain.joints.row(0).transpose();

    double worst = 0.0;
    for (Eigen::Index i = 0; i < model.vertex_count(); ++i) {
      const Vec3 expected =
          r * (plain.vertices.row(i).transpose() - root) + root;
      worst = std::max(worst,
                       (posed.vertices.row(i).transpose() - expected).norm());
    }
    for (int j = 0; j < kNumJoints; ++j) {
      const Vec3 expected = r * (plain.joints.row(j).transpose() - root) + root;
      worst = std::max(worst, (posed.joints.row(j).transpose() - expected).norm());
    }
    CHECK(worst < 1e-8);
  }
}

TEST_CASE("joint regression") {
  BodyModel model = gen_toy_model(0, 5);

  // One-hot row picks out a vertex; a uniform row gives the centroid.
  model.joint_regressor.setZero();
  model.joint_regressor(0, 3) = 1.0;
  model.joint_regressor.row(1).setConstant(1.0 / model.vertex_count());
  for (int j = 2; j < kNumJoints; ++j) model.joint_regressor(j, 0) = 1.0;
  const Joints3D joints = regress_joints(model, model.template_verts);
  CHECK(max_abs_diff(joints.row(0), model.template_verts.row(3)) == 0.0);
  CHECK(max_abs_diff(joints.row(1), model.template_verts.colwise().mean()) <
        1e-12);

  MeshVertices wrong(7, 3);
  CHECK_THROWS_AS(regress_joints(model, wrong), Error);
}

TEST_CASE("regressed joints match forward-kinematics rest joints") {
  const BodyModel model = gen_toy_model(0, 5);
  const ForwardResult out = forward(model, BodyParams::identity());
  const Joints3D regressed = regress_joints(model, out.vertices);
  CHECK(max_abs_diff(regressed, out.joints) < 1e-9);
}

TEST_CASE("model save/load round trip") {
  testutil::TempDir tmp("model_io");
  const BodyModel model = gen_toy_model(4, 4);
  const std::string path = tmp.path("toy.json");
  save_model(model, path);
  const BodyModel back = load_model(path);
  CHECK(max_abs_diff(back.template_verts, model.template_verts) == 0.0);
  CHECK(max_abs_diff(back.shape_dirs, model.shape_dirs) == 0.0);
  CHECK(max_abs_diff(back.skin_weights, model.skin_weights) == 0.0);
  CHECK(max_abs_diff(back.joint_regressor, model.joint_regressor) == 0.0);
  CHECK(back.parents == model.parents);
  CHECK(back.part_labels == model.part_labels);
}

TEST_CASE("load rejects broken models with the field named") {
  const BodyModel model = gen_toy_model(0, 4);
  nlohmann::json j = model_to_json(model);

  SUBCASE("skinning row off by 20%") {
    j["skin_weights"][0][0] = j["skin_weights"][0][0].get<double>() - 0.2;
    try {
      model_from_json(j);
      FAIL("expected load error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::LoadError);
      CHECK(std::string(e.what()).find("skin_weights") != std::string::npos);
    }
  }

  SUBCASE("cyclic parents") {
    j["parents"][0] = 5;
    j["parents"][5] = 2;
    j["parents"][2] = 0;
    try {
      model_from_json(j);
      FAIL("expected load error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::LoadError);
      CHECK(std::string(e.what()).find("parents") != std::string::npos);
    }
  }

  SUBCASE("unknown part label") {
    j["part_labels"][2] = "wing";
    CHECK_THROWS_AS(model_from_json(j), Error);
  }

  SUBCASE("negative regressor entry") {
    j["joint_regressor"][0][0] = -0.5;
    try {
      model_from_json(j);
      FAIL("expected load error");
    } catch (const Error& e) {
      CHECK(std::string(e.what()).find("joint_regressor") != std::string::npos);
    }
  }
}

TEST_CASE("toy part labels follow the owning joint") {
  const BodyModel model = gen_toy_model(0, 3);
  // Vertices are laid out per joint: joint 15 is head, joint 22 hand,
  // joint 10 foot, joint 0 torso, joint 18 limb.
  CHECK(model.part_labels[15 * 3] == PartLabel::Head);
  CHECK(model.part_labels[22 * 3] == PartLabel::Hand);
  CHECK(model.part_labels[10 * 3] == PartLabel::Foot);
  CHECK(model.part_labels[0] == PartLabel::Torso);
  CHECK(model.part_labels[18 * 3] == PartLabel::Limb);
}
