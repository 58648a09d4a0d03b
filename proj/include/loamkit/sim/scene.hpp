#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include "loamkit/common.hpp"

namespace loamkit::sim {

/// Axis-aligned box. Rays from outside hit the outer faces, rays starting
/// inside hit the inner faces, so one box can be a room or an obstacle.
struct BoxPrimitive {
  AxisBox box;
};

/// Infinite plane n . x = offset.
struct PlanePrimitive {
  Vec3 normal{Vec3::UnitZ()};
  double offset = 0.0;
};

/// Vertical cylinder side surface between z_min and z_max (no caps).
struct CylinderPrimitive {
  double cx = 0.0;
  double cy = 0.0;
  double radius = 0.5;
  double z_min = 0.0;
  double z_max = 1.0;
};

using Primitive = std::variant<BoxPrimitive, PlanePrimitive, CylinderPrimitive>;

struct Hit {
  double range = 0.0;
  Vec3 normal{Vec3::Zero()};  // surface normal facing the ray origin
};

namespace detail {

// hits closer than this are treated as the ray origin sitting on the surface
inline constexpr double kMinHit = 1e-9;

inline std::optional<Hit> intersect(const BoxPrimitive& b, const Vec3& o, const Vec3& d) {
  double t_near = -std::numeric_limits<double>::infinity();
  double t_far = std::numeric_limits<double>::infinity();
  int axis_near = -1;
  int axis_far = -1;
  for (int a = 0; a < 3; ++a) {
    if (d[a] == 0.0) {
      if (o[a] < b.box.min[a] || o[a] > b.box.max[a]) return std::nullopt;
      continue;
    }
    double t0 = (b.box.min[a] - o[a]) / d[a];
    double t1 = (b.box.max[a] - o[a]) / d[a];
    if (t0 > t1) std::swap(t0, t1);
    if (t0 > t_near) {
      t_near = t0;
      axis_near = a;
    }
    if (t1 < t_far) {
      t_far = t1;
      axis_far = a;
    }
  }
  if (t_near > t_far) return std::nullopt;
  double t;
  int axis;
  if (t_near > kMinHit) {
    t = t_near;
    axis = axis_near;
  } else if (t_far > kMinHit) {
    t = t_far;
    axis = axis_far;
  } else {
    return std::nullopt;
  }
  Vec3 n = Vec3::Zero();
  n[axis] = d[axis] > 0.0 ? -1.0 : 1.0;
  return Hit{t, n};
}

inline std::optional<Hit> intersect(const PlanePrimitive& p, const Vec3& o, const Vec3& d) {
  const double denom = p.normal.dot(d);
  if (denom == 0.0) return std::nullopt;
  const double t = (p.offset - p.normal.dot(o)) / denom;
  if (!(t > kMinHit)) return std::nullopt;
  return Hit{t, denom < 0.0 ? p.normal : Vec3(-p.normal)};
}

inline std::optional<Hit> intersect(const CylinderPrimitive& c, const Vec3& o, const Vec3& d) {
  const double ox = o.x() - c.cx;
  const double oy = o.y() - c.cy;
  const double a = d.x() * d.x() + d.y() * d.y();
  if (a == 0.0) return std::nullopt;
  const double b = 2.0 * (ox * d.x() + oy * d.y());
  const double cc = ox * ox + oy * oy - c.radius * c.radius;
  const double disc = b * b - 4.0 * a * cc;
  if (disc < 0.0) return std::nullopt;
  const double sq = std::sqrt(disc);
  for (double t : {(-b - sq) / (2.0 * a), (-b + sq) / (2.0 * a)}) {
    if (!(t > kMinHit)) continue;
    const double z = o.z() + t * d.z();
    if (z < c.z_min || z > c.z_max) continue;
    Vec3 n(ox + t * d.x(), oy + t * d.y(), 0.0);
    n /= c.radius;
    if (n.dot(d) > 0.0) n = -n;
    return Hit{t, n};
  }
  return std::nullopt;
}

inline double surface_distance(const BoxPrimitive& b, const Vec3& p) {
  // distance to the box surface, from inside or outside
  const Vec3 lo = p - b.box.min;
  const Vec3 hi = b.box.max - p;
  if ((lo.array() >= 0.0).all() && (hi.array() >= 0.0).all()) {
    return std::min(lo.minCoeff(), hi.minCoeff());
  }
  return std::sqrt(b.box.squared_distance_to(p));
}

inline double surface_distance(const PlanePrimitive& pl, const Vec3& p) {
  return std::abs(pl.normal.dot(p) - pl.offset);
}

inline double surface_distance(const CylinderPrimitive& c, const Vec3& p) {
  const double radial = std::abs(std::hypot(p.x() - c.cx, p.y() - c.cy) - c.radius);
  const double outside_z = std::max({0.0, c.z_min - p.z(), p.z() - c.z_max});
  return std::hypot(radial, outside_z);
}

}  // namespace detail

struct Scene {
  std::vector<Primitive> primitives;

  void validate() const {
    if (primitives.empty()) throw InvalidInput("scene has no primitives");
    for (const auto& prim : primitives) {
      std::visit(
          [](const auto& p) {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, BoxPrimitive>) {
              if (!is_finite(p.box.min) || !is_finite(p.box.max) || p.box.empty()) {
                throw InvalidInput("box primitive must be finite and non-empty");
              }
            } else if constexpr (std::is_same_v<T, PlanePrimitive>) {
              if (!is_finite(p.normal) || std::abs(p.normal.norm() - 1.0) > 1e-9 ||
                  !std::isfinite(p.offset)) {
                throw InvalidInput("plane primitive needs a unit normal");
              }
            } else {
              if (!(p.radius > 0.0) || !(p.z_min < p.z_max) || !std::isfinite(p.cx) ||
                  !std::isfinite(p.cy) || !std::isfinite(p.z_max) || !std::isfinite(p.z_min)) {
                throw InvalidInput("cylinder primitive must be finite with positive radius");
              }
            }
          },
          prim);
    }
  }

  /// Closest hit along the unit direction `dir`, or nothing within max_range.
  std::optional<Hit> raycast(const Vec3& origin, const Vec3& dir, double max_range) const {
    std::optional<Hit> best;
    for (const auto& prim : primitives) {
      const auto h = std::visit([&](const auto& p) { return detail::intersect(p, origin, dir); },
                                prim);
      if (h && h->range <= max_range && (!best || h->range < best->range)) best = h;
    }
    return best;
  }

  /// Distance from p to the nearest primitive surface.
  double surface_distance(const Vec3& p) const {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& prim : primitives) {
      best = std::min(best, std::visit([&](const auto& q) { return detail::surface_distance(q, p); },
                                       prim));
    }
    return best;
  }
};

/// Rectangular room with a floor at z = 0 and a few obstacles.
inline Scene room_scene(double sx = 12.0, double sy = 9.0, double sz = 4.0) {
  Scene s;
  s.primitives.push_back(BoxPrimitive{AxisBox::from_corners(Vec3(-sx / 2, -sy / 2, -1.0),
                                                            Vec3(sx / 2, sy / 2, sz - 1.0))});
  s.primitives.push_back(BoxPrimitive{AxisBox::from_corners(Vec3(2.0, 1.5, -1.0), Vec3(3.5, 3.0, 0.2))});
  s.primitives.push_back(BoxPrimitive{AxisBox::from_corners(Vec3(-4.5, -3.8, -1.0), Vec3(-3.0, -2.0, 1.5))});
  s.primitives.push_back(BoxPrimitive{AxisBox::from_corners(Vec3(-1.0, 3.2, 0.5), Vec3(0.5, 4.5, 1.2))});
  s.primitives.push_back(CylinderPrimitive{-2.0, 2.0, 0.4, -1.0, 3.0});
  s.primitives.push_back(CylinderPrimitive{3.5, -2.5, 0.3, -1.0, 3.0});
  return s;
}

namespace detail {

/// Obstacles along the walls of an axis-aligned corridor segment running
/// from `a` to `b` (one coordinate shared). Spacing is irregular so that no
/// stretch of corridor looks like a translated copy of another.
inline void corridor_clutter(Scene& s, const Vec3& a, const Vec3& b, double half_width,
                             double floor, std::mt19937_64& rng) {
  const int along = (a.x() != b.x()) ? 0 : 1;
  const int across = 1 - along;
  const double lo = std::min(a[along], b[along]);
  const double hi = std::max(a[along], b[along]);
  std::uniform_real_distribution<double> gap(1.2, 3.0);
  std::uniform_real_distribution<double> depth(0.2, 0.6);
  std::uniform_real_distribution<double> len(0.3, 1.2);
  std::uniform_real_distribution<double> height(0.6, 2.4);
  std::uniform_int_distribution<int> kind(0, 2);
  for (double pos = lo + 0.5; pos < hi - 0.5; pos += gap(rng)) {
    const double side = (kind(rng) == 0) ? -1.0 : 1.0;
    const int k = kind(rng);
    Vec3 c = a;
    c[along] = pos;
    if (k == 2) {
      // free-standing pillar offset from the wall
      Vec3 p = c;
      p[across] += side * (half_width - 0.8);
      s.primitives.push_back(CylinderPrimitive{p.x(), p.y(), 0.15 + 0.1 * depth(rng), floor, floor + 3.5});
      continue;
    }
    Vec3 mn = c;
    Vec3 mx = c;
    const double l = len(rng);
    mn[along] -= l / 2;
    mx[along] += l / 2;
    const double wall = c[across] + side * half_width;
    const double d = depth(rng);
    mn[across] = side > 0 ? wall - d : wall - 0.05;
    mx[across] = side > 0 ? wall + 0.05 : wall + d;
    mn.z() = floor - 0.1;
    mx.z() = floor + height(rng);
    s.primitives.push_back(BoxPrimitive{AxisBox::from_corners(mn, mx)});
  }
}

}  // namespace detail

/// Straight corridor along +x starting a few meters behind the origin.
inline Scene corridor_scene(double length, std::uint64_t seed = 1) {
  Scene s;
  const double hw = 2.0;
  s.primitives.push_back(BoxPrimitive{AxisBox::from_corners(Vec3(-6.0, -hw, -1.0),
                                                            Vec3(length + 6.0, hw, 2.5))});
  std::mt19937_64 rng(seed);
  detail::corridor_clutter(s, Vec3(-6.0, 0, 0), Vec3(length + 6.0, 0, 0), hw, -1.0, rng);
  return s;
}

/// Rectangular ring corridor: the free space between an outer box (seen from
/// inside) and an inner block. The centerline is the rectangle with corners
/// (0, 0) and (sx, sy).
inline Scene corridor_loop_scene(double sx, double sy, std::uint64_t seed = 1) {
  Scene s;
  const double hw = 2.5;
  s.primitives.push_back(BoxPrimitive{
      AxisBox::from_corners(Vec3(-hw, -hw, -1.0), Vec3(sx + hw, sy + hw, 2.5))});
  s.primitives.push_back(BoxPrimitive{
      AxisBox::from_corners(Vec3(hw, hw, -1.5), Vec3(sx - hw, sy - hw, 3.0))});
  std::mt19937_64 rng(seed);
  const Vec3 c00(0, 0, 0), c10(sx, 0, 0), c11(sx, sy, 0), c01(0, sy, 0);
  detail::corridor_clutter(s, c00, c10, hw, -1.0, rng);
  detail::corridor_clutter(s, c10, c11, hw, -1.0, rng);
  detail::corridor_clutter(s, c01, c11, hw, -1.0, rng);
  detail::corridor_clutter(s, c00, c01, hw, -1.0, rng);
  return s;
}

/// Open hall with scattered pillars and crates for free-form trajectories.
inline Scene hall_scene(double half, std::uint64_t seed = 1) {
  Scene s;
  s.primitives.push_back(BoxPrimitive{AxisBox::from_corners(Vec3(-half, -half, -1.0),
                                                            Vec3(half, half, 4.0))});
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-half + 1.0, half - 1.0);
  std::uniform_real_distribution<double> sz(0.3, 1.5);
  for (int i = 0; i < 40; ++i) {
    const double x = u(rng);
    const double y = u(rng);
    if (i % 2 == 0) {
      s.primitives.push_back(CylinderPrimitive{x, y, 0.2 + 0.2 * sz(rng), -1.0, 4.0});
    } else {
      const double w = sz(rng);
      const double d = sz(rng);
      s.primitives.push_back(BoxPrimitive{
          AxisBox::from_corners(Vec3(x - w / 2, y - d / 2, -1.0), Vec3(x + w / 2, y + d / 2, -1.0 + 2 * sz(rng)))});
    }
  }
  return s;
}

}  // namespace loamkit::sim
