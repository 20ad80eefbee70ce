#pragma once

#include <span>
#include <vector>

#include "protomem/types.hpp"

namespace protomem {

// Conversions among axis-angle, unit quaternion, rotation matrix and the
// 6D two-column rotation encoding, plus eigenvector quaternion averaging.
// All functions are pure and thread-safe.

// Rodrigues formula; the rotation angle is |v|, the axis v/|v|.
Mat3 axis_angle_to_rotmat(const Vec3& v);

// Inverse of the above with angle in [0, pi].
Vec3 rotmat_to_axis_angle(const Mat3& r);

// Gram-Schmidt decode: e1 = normalize(a1), e2 = normalize(a2 - (e1.a2)e1),
// e3 = e1 x e2. Throws DegenerateInput when a1 is zero or the pair is
// parallel.
Mat3 rot6d_to_rotmat(const Rot6d& r);

// First two columns of R, stacked. Validates orthonormality.
Rot6d rotmat_to_rot6d(const Mat3& r);

// Quaternion is (w, x, y, z); output has w >= 0.
Quat rotmat_to_quat(const Mat3& r);
Mat3 quat_to_rotmat(const Quat& q);

// Hamilton product, (w, x, y, z) convention.
Quat quat_multiply(const Quat& a, const Quat& b);

// True when R^T R = I and det R = 1 within tol.
bool is_rotation(const Mat3& r, double tol = 1e-8);

// Eigenvector average: builds M = sum w_i q_i q_i^T (normalized by total
// weight) and returns the unit eigenvector of the largest eigenvalue,
// sign-canonicalized (w >= 0, ties broken by the first nonzero component).
// Weights default to 1.0. Throws AmbiguousAverage when the top eigenvalue
// is non-unique within 1e-12.
Quat average_quaternions(std::span<const Quat> qs,
                         std::span<const double> weights = {});

namespace detail {
// In-house Jacobi eigen-decomposition of a symmetric 4x4 matrix.
// Eigenvalues sorted descending, columns of vecs are the matching unit
// eigenvectors. Off-diagonal tolerance 1e-12, at most 200 sweeps.
void symmetric_eig4(const Mat4& m, Eigen::Vector4d& values, Mat4& vecs);
}  // namespace detail

}  // namespace protomem
