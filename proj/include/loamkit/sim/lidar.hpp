#pragma once

#include <cmath>
#include <functional>
#include <random>

#include "loamkit/geometry.hpp"
#include "loamkit/sim/scene.hpp"

namespace loamkit::sim {

/// Spinning multi-beam lidar. Defaults resemble a 16-channel unit with a
/// 30 degree vertical field of view.
struct LidarModel {
  int channels = 16;
  double horizontal_resolution = 0.4 * M_PI / 180.0;
  double vertical_fov = 30.0 * M_PI / 180.0;
  double min_range = 0.3;
  double max_range = 100.0;
  double scan_period = 0.1;
  /// Gaussian range noise (m); 0 gives exact analytic ranges.
  double range_noise = 0.0;

  void validate() const {
    if (channels < 1) throw InvalidInput("lidar needs at least one channel");
    if (!(horizontal_resolution > 0.0)) throw InvalidInput("horizontal resolution must be positive");
    if (!(vertical_fov >= 0.0)) throw InvalidInput("vertical fov must be non-negative");
    if (!(max_range > 0.0) || !(min_range >= 0.0) || min_range >= max_range) {
      throw InvalidInput("need 0 <= min_range < max_range");
    }
    if (!(scan_period > 0.0)) throw InvalidInput("scan period must be positive");
    if (!(range_noise >= 0.0)) throw InvalidInput("range noise must be non-negative");
  }

  int columns() const {
    return static_cast<int>(std::floor(2.0 * M_PI / horizontal_resolution + 1e-9));
  }

  double elevation(int channel) const {
    if (channels == 1) return 0.0;
    return -0.5 * vertical_fov + vertical_fov * channel / (channels - 1);
  }

  Vec3 direction(int channel, int column) const {
    const double el = elevation(channel);
    const double az = column * horizontal_resolution;
    return Vec3(std::cos(el) * std::cos(az), std::cos(el) * std::sin(az), std::sin(el));
  }
};

/// Sensor pose at a given time within the sweep.
using PoseAt = std::function<Pose(double)>;

/// Ray-casts one sweep. Column j fires at
/// scan_end - period + (j + 1) / columns * period, using the sensor pose at
/// that instant; the returned points are in that same instantaneous sensor
/// frame, as a real spinning lidar reports them. Timestamps are absolute.
inline PointCloud simulate_sweep(const Scene& scene, const PoseAt& pose_at,
                                 const LidarModel& lidar, double scan_end,
                                 std::mt19937_64* noise_rng = nullptr) {
  lidar.validate();
  const int cols = lidar.columns();
  PointCloud out;
  out.frame_id = "sensor";
  out.reserve(static_cast<std::size_t>(cols * lidar.channels));
  std::normal_distribution<double> noise(0.0, lidar.range_noise);
  for (int j = 0; j < cols; ++j) {
    const double t = scan_end - lidar.scan_period + lidar.scan_period * (j + 1) / cols;
    const Pose pose = pose_at(t);
    for (int c = 0; c < lidar.channels; ++c) {
      const Vec3 dir = lidar.direction(c, j);
      const auto hit = scene.raycast(pose.translation, pose.rotation * dir, lidar.max_range);
      if (!hit) continue;
      double range = hit->range;
      if (noise_rng && lidar.range_noise > 0.0) range += noise(*noise_rng);
      if (range < lidar.min_range || range > lidar.max_range) continue;
      out.points.push_back(range * dir);
      out.timestamps.push_back(t);
    }
  }
  return out;
}

/// Sweep from a fixed pose.
inline PointCloud simulate_scan(const Scene& scene, const Pose& pose, const LidarModel& lidar,
                                double scan_end = 0.0, std::mt19937_64* noise_rng = nullptr) {
  return simulate_sweep(scene, [&pose](double) { return pose; }, lidar, scan_end, noise_rng);
}

}  // namespace loamkit::sim
