#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace loamkit {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat6 = Eigen::Matrix<double, 6, 6>;

/// Point coordinates in meters.
using Point3 = Vec3;

/// Raised for precondition violations on public operations.
class InvalidInput : public std::invalid_argument {
 public:
  explicit InvalidInput(const std::string& what) : std::invalid_argument(what) {}
};

inline bool is_finite(const Vec3& v) {
  return std::isfinite(v.x()) && std::isfinite(v.y()) && std::isfinite(v.z());
}

/// Squared Euclidean distance. Every index and oracle goes through this
/// function so that distances compare bitwise across implementations.
inline double squared_distance(const Vec3& a, const Vec3& b) {
  const double dx = a.x() - b.x();
  const double dy = a.y() - b.y();
  const double dz = a.z() - b.z();
  return dx * dx + dy * dy + dz * dz;
}

/// Closed axis-aligned box.
struct AxisBox {
  Vec3 min{Vec3::Constant(std::numeric_limits<double>::infinity())};
  Vec3 max{Vec3::Constant(-std::numeric_limits<double>::infinity())};

  static AxisBox from_corners(const Vec3& lo, const Vec3& hi) {
    AxisBox b;
    b.min = lo;
    b.max = hi;
    return b;
  }

  static AxisBox centered(const Vec3& center, double half_extent) {
    return from_corners(center.array() - half_extent,
                        center.array() + half_extent);
  }

  bool empty() const {
    return min.x() > max.x() || min.y() > max.y() || min.z() > max.z();
  }

  bool contains(const Vec3& p) const {
    return p.x() >= min.x() && p.x() <= max.x() && p.y() >= min.y() &&
           p.y() <= max.y() && p.z() >= min.z() && p.z() <= max.z();
  }

  bool contains(const AxisBox& other) const {
    return !other.empty() && contains(other.min) && contains(other.max);
  }

  bool intersects(const AxisBox& other) const {
    return !(other.min.x() > max.x() || other.max.x() < min.x() ||
             other.min.y() > max.y() || other.max.y() < min.y() ||
             other.min.z() > max.z() || other.max.z() < min.z());
  }

  void expand(const Vec3& p) {
    min = min.cwiseMin(p);
    max = max.cwiseMax(p);
  }

  void expand(const AxisBox& other) {
    if (other.empty()) return;
    min = min.cwiseMin(other.min);
    max = max.cwiseMax(other.max);
  }

  /// Squared distance from p to the box; zero inside.
  double squared_distance_to(const Vec3& p) const {
    double d2 = 0.0;
    for (int i = 0; i < 3; ++i) {
      double d = 0.0;
      if (p[i] < min[i]) {
        d = min[i] - p[i];
      } else if (p[i] > max[i]) {
        d = p[i] - max[i];
      }
      d2 += d * d;
    }
    return d2;
  }

  int longest_axis() const {
    const Vec3 ext = max - min;
    int axis = 0;
    if (ext.y() > ext[axis]) axis = 1;
    if (ext.z() > ext[axis]) axis = 2;
    return axis;
  }
};

}  // namespace loamkit
