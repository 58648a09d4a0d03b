#pragma once

#include <chrono>
#include <memory>
#include <optional>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "loamkit/map/ikd_map.hpp"
#include "loamkit/map/mto_octree_map.hpp"
#include "loamkit/normals.hpp"
#include "loamkit/preprocess.hpp"
#include "loamkit/registration.hpp"

namespace loamkit {

/// Registration target over a sliding map. Holds the map structure fixed for
/// its lifetime so a solve sees one consistent snapshot.
class MapTarget {
 public:
  explicit MapTarget(const map::MapStore& m) : map_(m) { map_.hold_structure(true); }
  ~MapTarget() { map_.hold_structure(false); }
  MapTarget(const MapTarget&) = delete;
  MapTarget& operator=(const MapTarget&) = delete;

  std::optional<TargetPoint> nearest(const Vec3& q) const {
    const auto n = map_.nearest(q);
    if (!n) return std::nullopt;
    return TargetPoint{n->point, n->normal, n->id, n->squared_distance};
  }
  bool empty() const { return map_.memory_stats().alive == 0; }

 private:
  const map::MapStore& map_;
};

/// Delta pose since the previous scan from a non-lidar source.
struct ExternalPrior {
  Pose delta;
  std::string source = "external";
  double timestamp = 0.0;
};

enum class MapBackend { kIkd, kMto };

struct PipelineConfig {
  AdaptiveVoxelState voxel;
  /// Half extents of the body box; zero disables the filter.
  Vec3 body_box{Vec3::Zero()};
  std::size_t normal_k = 10;
  GicpConfig gicp;
  map::MapWindow window{Vec3::Zero(), 25.0};
  double slide_margin = 5.0;
  /// A window so large it never slides, for memory contrast runs.
  bool unbounded_map = false;
  MapBackend backend = MapBackend::kIkd;
  double octree_leaf = 0.01;
  bool deskew = true;
  /// On the first frame, which is not registered, repeat the leaf update on
  /// the same cloud until the count settles so the map starts at the
  /// steady-state density.
  bool settle_initial_leaf = true;
  /// Also run an identity-seeded scan-to-scan solve when a prior is given
  /// and record its iteration count.
  bool compare_identity_seed = false;

  void validate() const {
    voxel.validate();
    gicp.validate();
    if (normal_k < 3) throw InvalidInput("normal_k must be at least 3");
    if (!(body_box.array() >= 0.0).all()) throw InvalidInput("body_box must be non-negative");
    if (!(window.half_extent > 0.0)) throw InvalidInput("map window must be positive");
    if (!(slide_margin >= 0.0) || slide_margin >= window.half_extent) {
      throw InvalidInput("slide margin must lie in [0, half extent)");
    }
    if (!(octree_leaf > 0.0)) throw InvalidInput("octree leaf must be positive");
  }
};

/// Wall-clock durations of one callback, in seconds.
struct StageTimes {
  double callback = 0.0;
  double preprocess = 0.0;
  double normals = 0.0;
  double scan_to_scan = 0.0;
  double scan_to_submap = 0.0;
  double map_update = 0.0;
};

enum class Fallback { kNone, kPrior, kConstantVelocity, kHold };

inline std::string_view to_string(Fallback f) {
  switch (f) {
    case Fallback::kNone: return "none";
    case Fallback::kPrior: return "prior";
    case Fallback::kConstantVelocity: return "constant_velocity";
    case Fallback::kHold: return "hold";
  }
  return "unknown";
}

struct FrameReport {
  std::size_t frame = 0;
  double stamp = 0.0;
  Pose pose;  // world <- body
  StageTimes times;
  /// Time from scan end (callback entry) to report emission.
  double odometry_delay = 0.0;
  map::MemoryStats map;
  bool window_slid = false;
  bool slide_compacted = false;
  std::size_t scan_points = 0;
  double leaf_size = 0.0;
  bool bootstrap = false;
  bool degraded = false;
  Fallback fallback = Fallback::kNone;
  bool s2s_converged = false;
  int s2s_iterations = 0;
  /// Iterations of an identity-seeded solve; -1 when not run.
  int s2s_iterations_identity_seed = -1;
  double s2s_fitness = 0.0;
  /// Motion since the previous frame used to seed scan-to-submap, after any
  /// fallback.
  Pose s2s_delta;
  bool s2m_converged = false;
  int s2m_iterations = 0;
  double s2m_rotation_change = 0.0;
  bool gate_accepted = false;
  std::size_t gate_reject_streak = 0;
};

/// Lidar odometry: preprocess, scan-to-scan, scan-to-submap, map update.
/// Not reentrant; run one instance per sensor stream.
class OdometryPipeline {
 public:
  explicit OdometryPipeline(PipelineConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    if (cfg_.unbounded_map) cfg_.window.half_extent = 1e12;
    voxel_ = cfg_.voxel;
  }

  bool bootstrapped() const { return bootstrapped_; }

  /// Sets the starting pose and centers the map window on it.
  void bootstrap(const Pose& initial = Pose::identity()) {
    if (bootstrapped_) throw std::logic_error("pipeline already bootstrapped");
    if (!initial.is_valid()) throw InvalidInput("initial pose is not a valid rigid transform");
    pose_ = initial;
    map::MapWindow w = cfg_.window;
    w.center = initial.translation;
    if (cfg_.backend == MapBackend::kIkd) {
      map_ = std::make_unique<map::IkdMap>(w, cfg_.slide_margin);
    } else {
      map_ = std::make_unique<map::MtoOctreeMap>(w, cfg_.slide_margin, cfg_.octree_leaf);
    }
    bootstrapped_ = true;
  }

  /// Processes one sweep ending at `stamp`. Per-point timestamps in the raw
  /// clouds are absolute; `imu` rates are in the body frame.
  FrameReport process_scan(const std::vector<std::pair<LidarFeed, PointCloud>>& frames,
                           const std::vector<ImuSample>& imu,
                           const std::optional<ExternalPrior>& prior, double stamp) {
    using Clock = std::chrono::steady_clock;
    const auto entry = Clock::now();
    auto since = [](Clock::time_point t) {
      return std::chrono::duration<double>(Clock::now() - t).count();
    };
    if (!bootstrapped_) bootstrap();
    if (frames.empty()) throw InvalidInput("process_scan needs at least one lidar frame");

    FrameReport rep;
    rep.frame = frame_count_++;
    rep.stamp = stamp;

    auto t0 = Clock::now();
    PointCloud scan = preprocess(frames, imu, stamp);
    rep.leaf_size = voxel_.d_leaf;
    rep.times.preprocess = since(t0);
    rep.scan_points = scan.size();

    const Pose previous = pose_;
    if (scan.size() < cfg_.normal_k + 1) {
      // nothing usable: coast on the prior if there is one
      rep.degraded = true;
      if (prior) {
        pose_ = pose_ * prior->delta;
        rep.fallback = Fallback::kPrior;
      } else {
        rep.fallback = Fallback::kHold;
      }
      last_delta_ = previous.inverse() * pose_;
      last_map_input_ = PointCloud{};
      return finish(rep, entry);
    }

    t0 = Clock::now();
    scan = estimate_normals(scan, cfg_.normal_k, Vec3::Zero(), cfg_.gicp.num_threads);
    rep.times.normals = since(t0);

    if (!prev_scan_) {
      rep.bootstrap = true;
      t0 = Clock::now();
      update_map(scan, rep);
      rep.times.map_update = since(t0);
      prev_scan_ = std::move(scan);
      return finish(rep, entry);
    }

    // scan-to-scan
    t0 = Clock::now();
    const Pose seed = prior ? prior->delta : Pose::identity();
    Pose delta;
    {
      const CloudTarget target(*prev_scan_);
      const RegistrationResult s2s = gicp_align(scan, target, seed, cfg_.gicp);
      rep.s2s_converged = s2s.converged;
      rep.s2s_iterations = s2s.iterations;
      rep.s2s_fitness = s2s.fitness;
      if (s2s.ok()) {
        delta = s2s.pose;
      } else {
        rep.degraded = true;
        if (prior) {
          delta = prior->delta;
          rep.fallback = Fallback::kPrior;
        } else if (last_delta_) {
          delta = *last_delta_;
          rep.fallback = Fallback::kConstantVelocity;
        } else {
          rep.fallback = Fallback::kHold;
        }
      }
      if (prior && cfg_.compare_identity_seed) {
        rep.s2s_iterations_identity_seed =
            gicp_align(scan, target, Pose::identity(), cfg_.gicp).iterations;
      }
    }
    rep.s2s_delta = delta;
    rep.times.scan_to_scan = since(t0);

    // scan-to-submap, seeded by the scan-to-scan estimate
    t0 = Clock::now();
    const Pose s2m_seed = previous * delta;
    pose_ = s2m_seed;
    {
      const MapTarget target(*map_);
      const RegistrationResult s2m = gicp_align(scan, target, s2m_seed, cfg_.gicp);
      rep.s2m_converged = s2m.converged;
      rep.s2m_iterations = s2m.iterations;
      rep.s2m_rotation_change = s2m.rotation_change;
      rep.gate_accepted = s2m.ok() && rotational_gate(s2m, cfg_.gicp);
      if (rep.gate_accepted) pose_ = s2m.pose;
    }
    gate_streak_ = rep.gate_accepted ? 0 : gate_streak_ + 1;
    rep.gate_reject_streak = gate_streak_;
    rep.times.scan_to_submap = since(t0);

    t0 = Clock::now();
    update_map(scan, rep);
    rep.times.map_update = since(t0);
    last_delta_ = previous.inverse() * pose_;
    prev_scan_ = std::move(scan);
    return finish(rep, entry);
  }

  const Pose& pose() const { return pose_; }
  const map::MapStore& map() const { return *map_; }
  map::MapStore& map() { return *map_; }
  const AdaptiveVoxelState& voxel_state() const { return voxel_; }
  const PipelineConfig& config() const { return cfg_; }
  /// World-frame cloud handed to the map on the latest frame.
  const PointCloud& last_map_input() const { return last_map_input_; }

 private:
  PointCloud preprocess(const std::vector<std::pair<LidarFeed, PointCloud>>& frames,
                        const std::vector<ImuSample>& imu, double stamp) {
    std::vector<std::pair<LidarFeed, PointCloud>> ready;
    ready.reserve(frames.size());
    for (const auto& [feed, cloud] : frames) {
      if (!feed.healthy(stamp)) {
        ready.emplace_back(feed, PointCloud{});
        continue;
      }
      if (!cfg_.deskew || imu.empty() || !cloud.has_timestamps()) {
        ready.emplace_back(feed, cloud);
        continue;
      }
      // gyro rates into this sensor's frame
      std::vector<ImuSample> local = imu;
      for (auto& s : local) {
        s.angular_velocity = feed.extrinsic.rotation.transpose() * s.angular_velocity;
      }
      const double start = *std::min_element(cloud.timestamps.begin(), cloud.timestamps.end());
      ready.emplace_back(feed, motion_deskew(cloud, local, std::min(start, stamp), stamp));
    }
    PointCloud merged = merge_clouds(ready, stamp);
    if (cfg_.body_box.minCoeff() > 0.0) merged = body_filter(merged, cfg_.body_box);
    auto [filtered, next] = adaptive_voxel_filter(merged, voxel_);
    if (cfg_.settle_initial_leaf && frame_count_ == 1) {
      for (int i = 0; i < 10 && next.d_leaf != voxel_.d_leaf; ++i) {
        voxel_ = next;
        std::tie(filtered, next) = adaptive_voxel_filter(merged, voxel_);
      }
    }
    voxel_ = next;
    return filtered;
  }

  void update_map(const PointCloud& scan, FrameReport& rep) {
    last_map_input_ = se3_apply(pose_, scan);
    map_->insert_scan(last_map_input_);
    rep.window_slid = map_->slide_window(pose_.translation);
    rep.slide_compacted = rep.window_slid && map_->last_slide_compacted();
  }

  FrameReport& finish(FrameReport& rep, std::chrono::steady_clock::time_point entry) {
    rep.pose = pose_;
    rep.map = map_->memory_stats();
    rep.times.callback =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - entry).count();
    rep.odometry_delay = rep.times.callback;
    return rep;
  }

  PipelineConfig cfg_;
  AdaptiveVoxelState voxel_;
  bool bootstrapped_ = false;
  Pose pose_;
  std::unique_ptr<map::MapStore> map_;
  std::optional<PointCloud> prev_scan_;
  std::optional<Pose> last_delta_;
  PointCloud last_map_input_;
  std::size_t frame_count_ = 0;
  std::size_t gate_streak_ = 0;
};

}  // namespace loamkit
