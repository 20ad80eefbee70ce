#pragma once

#include <array>
#include <string>

#include <Eigen/Dense>

namespace protomem {

// All geometry is double precision, lengths in meters. Metric reports
// convert to millimeters at the reporting boundary only.

constexpr int kNumJoints = 24;   // 23 articulated joints + root
constexpr int kRot6dDim = 6;
constexpr int kPoseDim = kNumJoints * kRot6dDim;  // 144
constexpr int kShapeDim = 10;
constexpr int kParamDim = kPoseDim + kShapeDim;   // 154

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
// Unit quaternion stored as (w, x, y, z).
using Quat = Eigen::Vector4d;
// First two columns of a rotation matrix, stacked column-major:
// (r0,r1,r2) = column 0, (r3,r4,r5) = column 1.
using Rot6d = Eigen::Matrix<double, 6, 1>;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;

using PoseVec = Eigen::Matrix<double, kPoseDim, 1>;
using ShapeVec = Eigen::Matrix<double, kShapeDim, 1>;
using ParamVec = Eigen::Matrix<double, kParamDim, 1>;

// V x 3 vertex coordinates.
using MeshVertices = Eigen::Matrix<double, Eigen::Dynamic, 3>;
// 24 x 3 joint coordinates.
using Joints3D = Eigen::Matrix<double, kNumJoints, 3>;
// 24 x 2 image-plane keypoints (normalized image units).
using Keypoints2D = Eigen::Matrix<double, kNumJoints, 2>;

enum class PartLabel { Torso = 0, Head, Hand, Foot, Limb };
constexpr int kNumPartLabels = 5;

const std::string& part_label_name(PartLabel label);
// Throws InvalidInput for a name outside {torso, head, hand, foot, limb}.
PartLabel part_label_from_name(const std::string& name);

}  // namespace protomem
