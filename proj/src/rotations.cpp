#include "protomem/rotations.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Geometry>

#include "protomem/error.hpp"

namespace protomem {

namespace {

void require_finite(const auto& m, const char* what) {
  if (!m.allFinite()) {
    throw Error(ErrorKind::InvalidInput,
                std::string(what) + ": non-finite components");
  }
}

Mat3 skew(const Vec3& v) {
  Mat3 s;
  s << 0, -v.z(), v.y(),
      v.z(), 0, -v.x(),
      -v.y(), v.x(), 0;
  return s;
}

}  // namespace

Mat3 axis_angle_to_rotmat(const Vec3& v) {
  require_finite(v, "axis_angle_to_rotmat");
  const double theta2 = v.squaredNorm();
  const double theta = std::sqrt(theta2);
  // sin(t)/t and (1-cos(t))/t^2 with series fallbacks near zero, so the
  // formula R = I + a*[v]x + b*[v]x^2 is stable for all angles.
  double a, b;
  if (theta < 1e-8) {
    a = 1.0 - theta2 / 6.0;
    b = 0.5 - theta2 / 24.0;
  } else {
    a = std::sin(theta) / theta;
    b = (1.0 - std::cos(theta)) / theta2;
  }
  const Mat3 k = skew(v);
  return Mat3::Identity() + a * k + b * k * k;
}

Vec3 rotmat_to_axis_angle(const Mat3& r) {
  const Quat q = rotmat_to_quat(r);
  const double sin_half = q.tail<3>().norm();
  const double angle = 2.0 * std::atan2(sin_half, q(0));
  if (sin_half < 1e-12) {
    return Vec3::Zero();
  }
  return q.tail<3>() * (angle / sin_half);
}

Mat3 rot6d_to_rotmat(const Rot6d& r) {
  require_finite(r, "rot6d_to_rotmat");
  const Vec3 a1 = r.head<3>();
  const Vec3 a2 = r.tail<3>();
  const double n1 = a1.norm();
  if (n1 < 1e-12) {
    throw Error(ErrorKind::DegenerateInput,
                "rot6d_to_rotmat: first column is zero");
  }
  const Vec3 e1 = a1 / n1;
  const Vec3 u2 = a2 - e1.dot(a2) * e1;
  const double n2 = u2.norm();
  if (n2 < 1e-12 * std::max(1.0, a2.norm())) {
    throw Error(ErrorKind::DegenerateInput,
                "rot6d_to_rotmat: columns are parallel");
  }
  const Vec3 e2 = u2 / n2;
  Mat3 out;
  out.col(0) = e1;
  out.col(1) = e2;
  out.col(2) = e1.cross(e2);
  return out;
}

Rot6d rotmat_to_rot6d(const Mat3& r) {
  require_finite(r, "rotmat_to_rot6d");
  if (!is_rotation(r)) {
    throw Error(ErrorKind::InvalidInput,
                "rotmat_to_rot6d: input is not a rotation matrix");
  }
  Rot6d out;
  out.head<3>() = r.col(0);
  out.tail<3>() = r.col(1);
  return out;
}

Quat rotmat_to_quat(const Mat3& r) {
  require_finite(r, "rotmat_to_quat");
  if (!is_rotation(r)) {
    throw Error(ErrorKind::InvalidInput,
                "rotmat_to_quat: input is not a rotation matrix");
  }
  // Shepperd's method: branch on the largest of trace/diagonal candidates.
  double w, x, y, z;
  const double tr = r.trace();
  if (tr > 0.0) {
    double s = std::sqrt(tr + 1.0) * 2.0;
    w = 0.25 * s;
    x = (r(2, 1) - r(1, 2)) / s;
    y = (r(0, 2) - r(2, 0)) / s;
    z = (r(1, 0) - r(0, 1)) / s;
  } else if (r(0, 0) > r(1, 1) && r(0, 0) > r(2, 2)) {
    double s = std::sqrt(1.0 + r(0, 0) - r(1, 1) - r(2, 2)) * 2.0;
    w = (r(2, 1) - r(1, 2)) / s;
    x = 0.25 * s;
    y = (r(0, 1) + r(1, 0)) / s;
    z = (r(0, 2) + r(2, 0)) / s;
  } else if (r(1, 1) > r(2, 2)) {
    double s = std::sqrt(1.0 + r(1, 1) - r(0, 0) - r(2, 2)) * 2.0;
    w = (r(0, 2) - r(2, 0)) / s;
    x = (r(0, 1) + r(1, 0)) / s;
    y = 0.25 * s;
    z = (r(1, 2) + r(2, 1)) / s;
  } else {
    double s = std::sqrt(1.0 + r(2, 2) - r(0, 0) - r(1, 1)) * 2.0;
    w = (r(1, 0) - r(0, 1)) / s;
    x = (r(0, 2) + r(2, 0)) / s;
    y = (r(1, 2) + r(2, 1)) / s;
    z = 0.25 * s;
  }
  Quat q(w, x, y, z);
  q.normalize();
  if (q(0) < 0.0) q = -q;
  return q;
}

Mat3 quat_to_rotmat(const Quat& q) {
  require_finite(q, "quat_to_rotmat");
  const double n = q.norm();
  if (std::abs(n - 1.0) > 1e-9) {
    throw Error(ErrorKind::InvalidInput, "quat_to_rotmat: not unit norm");
  }
  const double w = q(0) / n, x = q(1) / n, y = q(2) / n, z = q(3) / n;
  Mat3 r;
  r << 1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w),
      2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w),
      2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y);
  return r;
}

Quat quat_multiply(const Quat& a, const Quat& b) {
  const double aw = a(0), ax = a(1), ay = a(2), az = a(3);
  const double bw = b(0), bx = b(1), by = b(2), bz = b(3);
  return Quat(aw * bw - ax * bx - ay * by - az * bz,
              aw * bx + ax * bw + ay * bz - az * by,
              aw * by - ax * bz + ay * bw + az * bx,
              aw * bz + ax * by - ay * bx + az * bw);
}

bool is_rotation(const Mat3& r, double tol) {
  if (!r.allFinite()) return false;
  if (((r.transpose() * r) - Mat3::Identity()).cwiseAbs().maxCoeff() > tol) {
    return false;
  }
  return std::abs(r.determinant() - 1.0) <= tol;
}

namespace detail {

void symmetric_eig4(const Mat4& m, Eigen::Vector4d& values, Mat4& vecs) {
  Mat4 a = 0.5 * (m + m.transpose());
  Mat4 v = Mat4::Identity();
  constexpr int kMaxSweeps = 200;
  constexpr double kTol = 1e-12;
  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    double off = 0.0;
    for (int p = 0; p < 4; ++p)
      for (int q = p + 1; q < 4; ++q) off += a(p, q) * a(p, q);
    if (std::sqrt(off) < kTol) break;
    for (int p = 0; p < 4; ++p) {
      for (int q = p + 1; q < 4; ++q) {
        if (std::abs(a(p, q)) < 1e-300) continue;
        const double tau = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
        const double t = (tau >= 0 ? 1.0 : -1.0) /
                         (std::abs(tau) + std::sqrt(1.0 + tau * tau));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = t * c;
        Mat4 rot = Mat4::Identity();
        rot(p, p) = c;
        rot(q, q) = c;
        rot(p, q) = s;
        rot(q, p) = -s;
        a = rot.transpose() * a * rot;
        v = v * rot;
      }
    }
  }
  std::array<int, 4> order = {0, 1, 2, 3};
  std::sort(order.begin(), order.end(),
            [&](int i, int j) { return a(i, i) > a(j, j); });
  for (int i = 0; i < 4; ++i) {
    values(i) = a(order[i], order[i]);
    vecs.col(i) = v.col(order[i]).normalized();
  }
}

}  // namespace detail

Quat average_quaternions(std::span<const Quat> qs,
                         std::span<const double> weights) {
  if (qs.empty()) {
    throw Error(ErrorKind::InvalidInput, "average_quaternions: empty input");
  }
  if (!weights.empty() && weights.size() != qs.size()) {
    throw Error(ErrorKind::InvalidInput,
                "average_quaternions: weight count mismatch");
  }
  double total = 0.0;
  Mat4 moment = Mat4::Zero();
  for (size_t i = 0; i < qs.size(); ++i) {
    const Quat& q = qs[i];
    require_finite(q, "average_quaternions");
    if (std::abs(q.norm() - 1.0) > 1e-9) {
      throw Error(ErrorKind::InvalidInput,
                  "average_quaternions: input quaternion not unit norm");
    }
    const double w = weights.empty() ? 1.0 : weights[i];
    if (w < 0.0) {
      throw Error(ErrorKind::InvalidInput,
                  "average_quaternions: negative weight");
    }
    moment += w * (q * q.transpose());
    total += w;
  }
  if (total <= 0.0) {
    throw Error(ErrorKind::InvalidInput,
                "average_quaternions: weights sum to zero");
  }
  moment /= total;

  Eigen::Vector4d values;
  Mat4 vecs;
  detail::symmetric_eig4(moment, values, vecs);
  if (values(0) - values(1) <= 1e-12) {
    throw Error(ErrorKind::AmbiguousAverage,
                "average_quaternions: top eigenvalue is not unique");
  }
  Quat avg = vecs.col(0);
  if (avg(0) < 0.0) {
    avg = -avg;
  } else if (avg(0) == 0.0) {
    for (int i = 1; i < 4; ++i) {
      if (avg(i) != 0.0) {
        if (avg(i) < 0.0) avg = -avg;
        break;
      }
    }
  }
  return avg;
}

}  // namespace protomem
