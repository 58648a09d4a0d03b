#pragma once

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "loamkit/common.hpp"

namespace loamkit {

/// Unit surface normal. Construction validates the norm.
class Normal3 {
 public:
  static constexpr double kUnitTolerance = 1e-9;

  /// Throws InvalidInput unless v is finite with |v| = 1 within 1e-9.
  static Normal3 from_unit(const Vec3& v) {
    if (!is_finite(v) || std::abs(v.norm() - 1.0) > kUnitTolerance) {
      throw InvalidInput("normal must be a finite unit vector");
    }
    return Normal3(v);
  }

  /// Normalizes v. Throws InvalidInput on zero or non-finite input.
  static Normal3 normalized(const Vec3& v) {
    const double n = v.norm();
    if (!is_finite(v) || !(n > 0.0)) {
      throw InvalidInput("cannot normalize a zero or non-finite vector");
    }
    return Normal3(v / n);
  }

  const Vec3& vec() const { return v_; }
  double x() const { return v_.x(); }
  double y() const { return v_.y(); }
  double z() const { return v_.z(); }

 private:
  explicit Normal3(const Vec3& v) : v_(v) {}
  Vec3 v_;
};

/// Skew-symmetric matrix with hat(a) * b = a x b.
inline Mat3 hat(const Vec3& a) {
  Mat3 m;
  m << 0.0, -a.z(), a.y(),  //
      a.z(), 0.0, -a.x(),   //
      -a.y(), a.x(), 0.0;
  return m;
}

/// Rigid transform in SE(3): x -> rotation * x + translation.
struct Pose {
  Mat3 rotation{Mat3::Identity()};
  Vec3 translation{Vec3::Zero()};

  static Pose identity() { return {}; }

  static Pose from_parts(const Mat3& r, const Vec3& t) {
    Pose p;
    p.rotation = r;
    p.translation = t;
    return p;
  }

  static Pose from_quaternion(const Eigen::Quaterniond& q, const Vec3& t) {
    return from_parts(q.normalized().toRotationMatrix(), t);
  }

  static Pose from_translation(const Vec3& t) {
    return from_parts(Mat3::Identity(), t);
  }

  static Pose from_axis_angle(const Vec3& axis, double angle,
                              const Vec3& t = Vec3::Zero()) {
    return from_parts(
        Eigen::AngleAxisd(angle, axis.normalized()).toRotationMatrix(), t);
  }

  Eigen::Quaterniond quaternion() const {
    Eigen::Quaterniond q(rotation);
    q.normalize();
    // canonical hemisphere so serialized poses are unique
    if (q.w() < 0.0) q.coeffs() = -q.coeffs();
    return q;
  }

  Vec3 operator*(const Vec3& p) const { return rotation * p + translation; }

  Pose operator*(const Pose& other) const {
    return from_parts(rotation * other.rotation,
                      rotation * other.translation + translation);
  }

  Pose inverse() const {
    const Mat3 rt = rotation.transpose();
    return from_parts(rt, -(rt * translation));
  }

  /// Rotation angle in radians, in [0, pi].
  double rotation_angle() const {
    const double c = std::clamp((rotation.trace() - 1.0) * 0.5, -1.0, 1.0);
    // acos loses precision near 0; atan2 of sin/cos is stable everywhere
    const Vec3 w(rotation(2, 1) - rotation(1, 2), rotation(0, 2) - rotation(2, 0),
                 rotation(1, 0) - rotation(0, 1));
    return std::atan2(0.5 * w.norm(), c);
  }

  bool is_valid(double tol = 1e-9) const {
    if (!rotation.allFinite() || !is_finite(translation)) return false;
    const Mat3 should_be_identity = rotation.transpose() * rotation;
    return (should_be_identity - Mat3::Identity()).cwiseAbs().maxCoeff() <= tol &&
           std::abs(rotation.determinant() - 1.0) <= tol;
  }
};

/// Angle between two rotations (radians).
inline double rotation_distance(const Pose& a, const Pose& b) {
  return (a.inverse() * b).rotation_angle();
}

inline Mat3 so3_exp(const Vec3& omega) {
  const double theta = omega.norm();
  const Mat3 w = hat(omega);
  if (theta < 1e-8) {
    return Mat3::Identity() + w + 0.5 * w * w;
  }
  return Mat3::Identity() + (std::sin(theta) / theta) * w +
         ((1.0 - std::cos(theta)) / (theta * theta)) * w * w;
}

inline Vec3 so3_log(const Mat3& r) {
  const Eigen::AngleAxisd aa(Eigen::Quaterniond(r).normalized());
  double angle = aa.angle();
  Vec3 axis = aa.axis();
  if (angle > M_PI) {
    angle -= 2.0 * M_PI;
  }
  return axis * angle;
}

/// Left Jacobian-style matrix V mapping the translational tangent to the
/// translation of exp(xi).
inline Mat3 se3_v_matrix(const Vec3& omega) {
  const double theta = omega.norm();
  const Mat3 w = hat(omega);
  if (theta < 1e-6) {
    return Mat3::Identity() + 0.5 * w + (1.0 / 6.0) * w * w;
  }
  const double t2 = theta * theta;
  return Mat3::Identity() + ((1.0 - std::cos(theta)) / t2) * w +
         ((theta - std::sin(theta)) / (t2 * theta)) * w * w;
}

/// xi = (omega, v): rotation part first (radians), then translation (meters).
inline Pose se3_exp(const Vec6& xi) {
  const Vec3 omega = xi.head<3>();
  const Vec3 v = xi.tail<3>();
  return Pose::from_parts(so3_exp(omega), se3_v_matrix(omega) * v);
}

inline Vec6 se3_log(const Pose& pose) {
  const Vec3 omega = so3_log(pose.rotation);
  Vec6 xi;
  xi.head<3>() = omega;
  xi.tail<3>() = se3_v_matrix(omega).inverse() * pose.translation;
  return xi;
}

/// Completes n to a right-handed orthonormal triad (n, u2, u3) with
/// u3 = n x u2. u2 comes from the coordinate axis least aligned with n,
/// so no component of n is ever used as a divisor.
inline std::pair<Normal3, Normal3> plane_basis(const Normal3& n) {
  const Vec3& v = n.vec();
  const Vec3 a = v.cwiseAbs();
  Vec3 axis = Vec3::UnitX();
  if (a.y() < a.x() && a.y() <= a.z()) {
    axis = Vec3::UnitY();
  } else if (a.z() < a.x() && a.z() < a.y()) {
    axis = Vec3::UnitZ();
  }
  const Vec3 u2 = (axis - axis.dot(v) * v).normalized();
  const Vec3 u3 = v.cross(u2);
  return {Normal3::normalized(u2), Normal3::normalized(u3)};
}

inline void check_epsilon(double eps) {
  if (!(eps > 0.0 && eps < 1.0)) {
    throw InvalidInput("covariance epsilon must lie in (0, 1)");
  }
}

/// Plane-to-plane surface covariance from a unit normal:
/// eps along n, unit variance in the plane. Uses C = I + (eps - 1) n n^T.
inline Mat3 covariance_from_normal(const Normal3& n, double eps) {
  check_epsilon(eps);
  return Mat3::Identity() + (eps - 1.0) * n.vec() * n.vec().transpose();
}

/// Same covariance assembled term by term from an explicit eigenbasis:
/// eps n n^T + u2 u2^T + u3 u3^T.
inline Mat3 covariance_from_basis(const Normal3& n, double eps) {
  check_epsilon(eps);
  const auto [u2, u3] = plane_basis(n);
  return eps * n.vec() * n.vec().transpose() + u2.vec() * u2.vec().transpose() +
         u3.vec() * u3.vec().transpose();
}

namespace detail {

/// Unchecked closed form for hot loops; n must already be unit length.
inline Mat3 plane_covariance(const Vec3& n, double eps) {
  return Mat3::Identity() + (eps - 1.0) * n * n.transpose();
}

/// Unchecked explicit-basis form for hot loops.
inline Mat3 plane_covariance_from_basis(const Vec3& n, double eps) {
  const Vec3 a = n.cwiseAbs();
  Vec3 axis = Vec3::UnitX();
  if (a.y() < a.x() && a.y() <= a.z()) {
    axis = Vec3::UnitY();
  } else if (a.z() < a.x() && a.z() < a.y()) {
    axis = Vec3::UnitZ();
  }
  const Vec3 u2 = (axis - axis.dot(n) * n).normalized();
  const Vec3 u3 = n.cross(u2);
  return eps * n * n.transpose() + u2 * u2.transpose() + u3 * u3.transpose();
}

}  // namespace detail

/// Point container with optional parallel normals and timestamps.
///
/// Normals: an all-zero entry marks a point whose normal could not be
/// estimated; such points take no part in registration or mapping.
/// Timestamps: absolute acquisition time of each point, in seconds.
struct PointCloud {
  std::vector<Vec3> points;
  std::vector<Vec3> normals;
  std::vector<double> timestamps;
  std::string frame_id;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
  bool has_normals() const { return !normals.empty(); }
  bool has_timestamps() const { return !timestamps.empty(); }

  bool normal_valid(std::size_t i) const {
    return has_normals() && !normals[i].isZero(0.0);
  }

  std::size_t valid_normal_count() const {
    std::size_t n = 0;
    for (std::size_t i = 0; i < normals.size(); ++i) n += normal_valid(i);
    return n;
  }

  void reserve(std::size_t n) {
    points.reserve(n);
    if (has_normals()) normals.reserve(n);
    if (has_timestamps()) timestamps.reserve(n);
  }

  /// Appends point i of other. Parallel arrays must be laid out alike.
  void push_from(const PointCloud& other, std::size_t i) {
    points.push_back(other.points[i]);
    if (other.has_normals()) normals.push_back(other.normals[i]);
    if (other.has_timestamps()) timestamps.push_back(other.timestamps[i]);
  }

  /// Throws InvalidInput when parallel lists disagree in length or a
  /// coordinate is not finite.
  void validate() const {
    if (has_normals() && normals.size() != points.size()) {
      throw InvalidInput("normals must parallel points");
    }
    if (has_timestamps() && timestamps.size() != points.size()) {
      throw InvalidInput("timestamps must parallel points");
    }
    for (const auto& p : points) {
      if (!is_finite(p)) throw InvalidInput("point coordinates must be finite");
    }
  }
};

/// Maps points by R p + t and normals by R n; timestamps are kept.
inline PointCloud se3_apply(const Pose& pose, const PointCloud& cloud) {
  PointCloud out;
  out.frame_id = cloud.frame_id;
  out.timestamps = cloud.timestamps;
  out.points.reserve(cloud.size());
  for (const auto& p : cloud.points) out.points.push_back(pose * p);
  if (cloud.has_normals()) {
    out.normals.reserve(cloud.normals.size());
    for (const auto& n : cloud.normals) out.normals.push_back(pose.rotation * n);
  }
  return out;
}

}  // namespace loamkit
