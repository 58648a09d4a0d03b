#pragma once

#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "loamkit/geometry.hpp"
#include "loamkit/preprocess.hpp"
#include "loamkit/sim/lidar.hpp"
#include "loamkit/sim/scene.hpp"

namespace loamkit::sim {

struct TrajectorySample {
  double timestamp = 0.0;
  Pose pose;
};

/// Planar motion: position and heading as functions of time. The sensor
/// sits at the body origin.
struct Trajectory {
  std::function<Vec3(double)> position;
  std::function<double(double)> yaw;

  Pose pose(double t) const {
    return Pose::from_axis_angle(Vec3::UnitZ(), yaw(t), position(t));
  }

  /// Body-frame angular velocity by central difference of the heading.
  Vec3 angular_velocity(double t, double h = 1e-5) const {
    const double dyaw = std::remainder(yaw(t + h) - yaw(t - h), 2.0 * M_PI);
    return Vec3(0.0, 0.0, dyaw / (2.0 * h));
  }
};

inline Trajectory static_trajectory(const Vec3& at = Vec3::Zero()) {
  return {[at](double) { return at; }, [](double) { return 0.0; }};
}

inline Trajectory line_trajectory(double speed) {
  return {[speed](double t) { return Vec3(speed * t, 0.0, 0.0); },
          [](double) { return 0.0; }};
}

/// Counter-clockwise lap around the rectangle (0,0)-(sx,sy) with corners
/// rounded to `radius`, starting at (radius, 0) heading +x.
inline Trajectory rounded_rectangle_trajectory(double sx, double sy, double radius, double speed) {
  const double lx = sx - 2.0 * radius;
  const double ly = sy - 2.0 * radius;
  const double arc = 0.5 * M_PI * radius;
  const double perimeter = 2.0 * (lx + ly) + 4.0 * arc;
  // segments: straight, arc, straight, arc, ...
  struct Seg {
    Vec3 start;
    double heading;
    double length;
    bool turn;
  };
  std::vector<Seg> segs;
  Vec3 p(radius, 0.0, 0.0);
  double heading = 0.0;
  for (double straight : {lx, ly, lx, ly}) {
    segs.push_back({p, heading, straight, false});
    p += straight * Vec3(std::cos(heading), std::sin(heading), 0.0);
    segs.push_back({p, heading, arc, true});
    // quarter turn left around the center at distance radius to the left
    const Vec3 left(-std::sin(heading), std::cos(heading), 0.0);
    const Vec3 center = p + radius * left;
    heading += 0.5 * M_PI;
    p = center - radius * Vec3(-std::sin(heading), std::cos(heading), 0.0);
  }
  auto locate = [segs, perimeter, radius, speed](double t) {
    double s = std::fmod(speed * t, perimeter);
    if (s < 0.0) s += perimeter;
    for (const auto& seg : segs) {
      if (s <= seg.length || &seg == &segs.back()) {
        const Vec3 fwd(std::cos(seg.heading), std::sin(seg.heading), 0.0);
        if (!seg.turn) return std::make_pair(Vec3(seg.start + s * fwd), seg.heading);
        const Vec3 left(-std::sin(seg.heading), std::cos(seg.heading), 0.0);
        const Vec3 center = seg.start + radius * left;
        const double h = seg.heading + s / radius;
        return std::make_pair(Vec3(center - radius * Vec3(-std::sin(h), std::cos(h), 0.0)), h);
      }
      s -= seg.length;
    }
    return std::make_pair(Vec3(segs.front().start), 0.0);
  };
  return {[locate](double t) { return locate(t).first; },
          [locate](double t) { return locate(t).second; }};
}

/// Figure-eight (lemniscate of Gerono) with half-width `a`, traversed at a
/// constant parametric rate chosen so the mean speed is about `speed`.
inline Trajectory figure_eight_trajectory(double a, double speed) {
  // the curve length is about 6.1 a
  const double rate = 2.0 * M_PI * speed / (6.1 * a);
  auto pos = [a, rate](double t) {
    const double s = rate * t;
    return Vec3(a * std::sin(s), a * std::sin(s) * std::cos(s), 0.0);
  };
  auto yaw = [a, rate](double t) {
    const double s = rate * t;
    return std::atan2(a * std::cos(2.0 * s), a * std::cos(s));
  };
  return {pos, yaw};
}

/// Gyro samples at `rate_hz` covering [t0, t1] with one sample of margin.
inline std::vector<ImuSample> imu_samples(const Trajectory& traj, double t0, double t1,
                                          double rate_hz) {
  std::vector<ImuSample> out;
  const double dt = 1.0 / rate_hz;
  const auto first = static_cast<long>(std::floor(t0 / dt)) - 1;
  const auto last = static_cast<long>(std::ceil(t1 / dt)) + 1;
  for (long i = first; i <= last; ++i) {
    const double t = i * dt;
    // rate held until the next sample: use the midpoint of the interval
    out.push_back({t, traj.angular_velocity(t + 0.5 * dt), Vec3(0.0, 0.0, 9.81)});
  }
  return out;
}

/// Scene plus trajectory for one named preset.
struct SimPreset {
  std::string name;
  Scene scene;
  Trajectory trajectory;
};

inline const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names{"static", "line", "corridor", "corridor-loop",
                                              "figure-eight"};
  return names;
}

/// Size of the corridor-loop ring: centerline rectangle and corner radius.
struct LoopShape {
  double sx = 60.0;
  double sy = 30.0;
  double corner_radius = 4.0;

  void validate() const {
    if (!(corner_radius > 0.0)) throw InvalidInput("corner radius must be positive");
    // the inner block needs some thickness and the arcs must fit the sides
    if (!(sx > 6.0 && sy > 6.0) || 2.0 * corner_radius > std::min(sx, sy)) {
      throw InvalidInput("loop too small for its corridor and corner radius");
    }
  }
  double perimeter() const {
    return 2.0 * (sx + sy) - 8.0 * corner_radius + 2.0 * M_PI * corner_radius;
  }
};

/// `duration` (s) sizes open-ended scenes so the trajectory stays inside.
inline SimPreset make_preset(const std::string& name, double speed, double duration,
                             std::uint64_t seed, const LoopShape& loop = {}) {
  if (!(speed >= 0.0) || !std::isfinite(speed)) throw InvalidInput("speed must be non-negative");
  if (name == "static") return {name, room_scene(), static_trajectory()};
  if (name == "line" || name == "corridor") {
    return {name, corridor_scene(speed * duration + 1.0, seed), line_trajectory(speed)};
  }
  if (name == "corridor-loop") {
    loop.validate();
    return {name, corridor_loop_scene(loop.sx, loop.sy, seed),
            rounded_rectangle_trajectory(loop.sx, loop.sy, loop.corner_radius, speed)};
  }
  if (name == "figure-eight") {
    const double a = 12.0;
    const Trajectory traj = figure_eight_trajectory(a, speed);
    Scene hall = hall_scene(a + 6.0, seed);
    // keep obstacles clear of the path
    auto clearance = [](const Primitive& prim, const Vec3& p) {
      if (const auto* b = std::get_if<BoxPrimitive>(&prim)) {
        return std::sqrt(b->box.squared_distance_to(p));
      }
      const auto& c = std::get<CylinderPrimitive>(prim);
      return std::hypot(p.x() - c.cx, p.y() - c.cy) - c.radius;
    };
    Scene s;
    s.primitives.push_back(hall.primitives.front());
    for (std::size_t i = 1; i < hall.primitives.size(); ++i) {
      bool clear = true;
      for (int k = 0; k < 720 && clear; ++k) {
        const double u = 2.0 * M_PI * k / 720.0;
        clear = clearance(hall.primitives[i], Vec3(a * std::sin(u), a * std::sin(u) * std::cos(u), 0.0)) > 1.5;
      }
      if (clear) s.primitives.push_back(hall.primitives[i]);
    }
    return {name, s, traj};
  }
  throw InvalidInput("unknown preset: " + name);
}

}  // namespace loamkit::sim
