#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "loamkit/geometry.hpp"

namespace loamkit {

struct ImuSample {
  double timestamp = 0.0;
  Vec3 angular_velocity{Vec3::Zero()};
  /// Not used by de-skew; carried through for dataset fidelity.
  Vec3 linear_acceleration{Vec3::Zero()};
};

/// One lidar stream with its health gate.
struct LidarFeed {
  std::string id;
  Pose extrinsic;  // sensor -> body
  double last_msg_time = 0.0;
  double timeout = 0.5;

  bool healthy(double now) const { return now - last_msg_time <= timeout; }
};

/// Leaf-size controller state.
struct AdaptiveVoxelState {
  double d_leaf = 0.25;
  double n_desired = 3000;
  double d_min = 0.01;
  double d_max = 2.0;
  double alpha = 1.0;

  void validate() const {
    if (!(d_min > 0.0 && d_min <= d_max)) throw InvalidInput("need 0 < d_min <= d_max");
    if (!(d_leaf >= d_min && d_leaf <= d_max)) {
      throw InvalidInput("d_leaf must lie within [d_min, d_max]");
    }
    if (!(n_desired > 0.0)) throw InvalidInput("n_desired must be positive");
    if (!(alpha > 0.0 && alpha <= 1.0)) throw InvalidInput("alpha must lie in (0, 1]");
  }
};

/// Rotates every point into the sensor frame at `scan_end` using the gyro
/// rotation accumulated between the point's timestamp and `scan_end`.
/// Angular rates are expressed in the sensor frame and held constant between
/// samples. Translation during the sweep is not corrected.
inline PointCloud motion_deskew(const PointCloud& scan, const std::vector<ImuSample>& imu,
                                double scan_start, double scan_end) {
  if (imu.empty()) return scan;
  if (!scan.has_timestamps()) throw InvalidInput("de-skew needs per-point timestamps");
  if (!(scan_start <= scan_end)) throw InvalidInput("scan_start must not exceed scan_end");
  scan.validate();
  for (double t : scan.timestamps) {
    if (!(t >= scan_start && t <= scan_end)) {
      throw InvalidInput("point timestamp outside [scan_start, scan_end]");
    }
  }

  // rate in force at time t: last sample at or before t, else the first one
  auto rate_at = [&imu](double t) {
    auto it = std::upper_bound(imu.begin(), imu.end(), t,
                               [](double v, const ImuSample& s) { return v < s.timestamp; });
    return it == imu.begin() ? imu.front().angular_velocity
                             : std::prev(it)->angular_velocity;
  };

  // knots: scan_start, every sample inside the window, scan_end
  std::vector<double> knots{scan_start};
  for (const auto& s : imu) {
    if (s.timestamp > scan_start && s.timestamp < scan_end) knots.push_back(s.timestamp);
  }
  knots.push_back(scan_end);
  std::vector<Mat3> orientation(knots.size(), Mat3::Identity());
  for (std::size_t j = 0; j + 1 < knots.size(); ++j) {
    orientation[j + 1] =
        orientation[j] * so3_exp(rate_at(knots[j]) * (knots[j + 1] - knots[j]));
  }
  const Mat3 end_inverse = orientation.back().transpose();

  PointCloud out = scan;
  for (std::size_t i = 0; i < scan.size(); ++i) {
    const double t = scan.timestamps[i];
    const auto j = static_cast<std::size_t>(
        std::upper_bound(knots.begin(), knots.end() - 1, t) - knots.begin() - 1);
    const Mat3 r_t = orientation[j] * so3_exp(rate_at(knots[j]) * (t - knots[j]));
    const Mat3 to_end = end_inverse * r_t;
    out.points[i] = to_end * scan.points[i];
    if (scan.has_normals()) out.normals[i] = to_end * scan.normals[i];
  }
  return out;
}

/// Concatenates the healthy feeds, each moved into the body frame by its
/// extrinsic. Stale feeds are skipped; if every feed is stale the result is
/// an empty cloud.
inline PointCloud merge_clouds(const std::vector<std::pair<LidarFeed, PointCloud>>& frames,
                               double now) {
  if (frames.empty()) throw InvalidInput("merge needs at least one lidar feed");
  PointCloud out;
  out.frame_id = "body";
  std::size_t total = 0;
  bool normals = true;
  bool stamps = true;
  for (const auto& [feed, cloud] : frames) {
    if (!feed.healthy(now)) continue;
    total += cloud.size();
    normals &= cloud.has_normals() || cloud.empty();
    stamps &= cloud.has_timestamps() || cloud.empty();
  }
  out.points.reserve(total);
  for (const auto& [feed, cloud] : frames) {
    if (!feed.healthy(now)) continue;
    const PointCloud moved = se3_apply(feed.extrinsic, cloud);
    out.points.insert(out.points.end(), moved.points.begin(), moved.points.end());
    if (normals) out.normals.insert(out.normals.end(), moved.normals.begin(), moved.normals.end());
    if (stamps) {
      out.timestamps.insert(out.timestamps.end(), moved.timestamps.begin(),
                            moved.timestamps.end());
    }
  }
  if (out.normals.size() != out.points.size()) out.normals.clear();
  if (out.timestamps.size() != out.points.size()) out.timestamps.clear();
  return out;
}

/// Drops points inside the closed body box |x| <= hx, |y| <= hy, |z| <= hz.
inline PointCloud body_filter(const PointCloud& cloud, const Vec3& half_extents) {
  if (!(half_extents.array() > 0.0).all()) {
    throw InvalidInput("body box half extents must be positive");
  }
  PointCloud out;
  out.frame_id = cloud.frame_id;
  out.reserve(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Vec3 a = cloud.points[i].cwiseAbs();
    if ((a.array() <= half_extents.array()).all()) continue;
    out.push_from(cloud, i);
  }
  return out;
}

namespace detail {

struct VoxelKey {
  std::int64_t x, y, z;
  bool operator==(const VoxelKey&) const = default;
};

struct VoxelKeyHash {
  std::size_t operator()(const VoxelKey& k) const {
    std::uint64_t h = static_cast<std::uint64_t>(k.x) * 73856093ULL;
    h ^= static_cast<std::uint64_t>(k.y) * 19349663ULL;
    h ^= static_cast<std::uint64_t>(k.z) * 83492791ULL;
    return static_cast<std::size_t>(h ^ (h >> 29));
  }
};

}  // namespace detail

/// One centroid per occupied cell floor(p / leaf). Cells are emitted in the
/// order their first point appears. Normals and timestamps are dropped.
inline PointCloud voxel_downsample(const PointCloud& cloud, double leaf) {
  if (!(leaf > 0.0)) throw InvalidInput("voxel leaf must be positive");
  std::unordered_map<detail::VoxelKey, std::size_t, detail::VoxelKeyHash> cells;
  cells.reserve(cloud.size());
  std::vector<Vec3> sums;
  std::vector<std::size_t> counts;
  for (const auto& p : cloud.points) {
    const detail::VoxelKey key{static_cast<std::int64_t>(std::floor(p.x() / leaf)),
                               static_cast<std::int64_t>(std::floor(p.y() / leaf)),
                               static_cast<std::int64_t>(std::floor(p.z() / leaf))};
    auto [it, inserted] = cells.try_emplace(key, sums.size());
    if (inserted) {
      sums.push_back(p);
      counts.push_back(1);
    } else {
      sums[it->second] += p;
      ++counts[it->second];
    }
  }
  PointCloud out;
  out.frame_id = cloud.frame_id;
  out.points.reserve(sums.size());
  for (std::size_t i = 0; i < sums.size(); ++i) {
    out.points.push_back(sums[i] / static_cast<double>(counts[i]));
  }
  return out;
}

/// Leaf update d <- clamp(d * (n_out / n_desired)^alpha, d_min, d_max).
inline double next_leaf_size(const AdaptiveVoxelState& s, std::size_t n_out) {
  const double ratio = static_cast<double>(n_out) / s.n_desired;
  return std::clamp(s.d_leaf * std::pow(ratio, s.alpha), s.d_min, s.d_max);
}

/// Downsamples at the current leaf size, then moves the leaf size so that the
/// downsampled count is driven toward n_desired.
inline std::pair<PointCloud, AdaptiveVoxelState> adaptive_voxel_filter(
    const PointCloud& cloud, const AdaptiveVoxelState& state) {
  state.validate();
  if (cloud.empty()) {
    PointCloud out;
    out.frame_id = cloud.frame_id;
    return {out, state};
  }
  PointCloud filtered = voxel_downsample(cloud, state.d_leaf);
  AdaptiveVoxelState next = state;
  next.d_leaf = next_leaf_size(state, filtered.size());
  return {std::move(filtered), next};
}

}  // namespace loamkit
