#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "loamkit/eval/ape.hpp"
#include "loamkit/eval/dataset.hpp"
#include "loamkit/pipeline.hpp"

namespace loamkit::eval {

struct RunResult {
  std::vector<FrameReport> reports;
  std::vector<sim::TrajectorySample> estimate;
  std::optional<ApeStats> ape;
  /// Translation error of the last pose after first-pose alignment.
  double final_error_m = 0.0;
  double distance_m = 0.0;
  std::size_t peak_alive = 0;
};

/// Called after every frame; may throw to abort the run.
using FrameHook = std::function<void(const FrameReport&, const OdometryPipeline&)>;

/// Feeds every frame of `src` through a fresh pipeline. Bootstraps at the
/// first ground-truth pose when one is known.
inline RunResult run_pipeline(const FrameSource& src, const PipelineConfig& cfg,
                              const FrameHook& hook = {}) {
  OdometryPipeline pipe(cfg);
  RunResult out;
  std::vector<std::pair<LidarFeed, PointCloud>> frames;
  std::vector<sim::TrajectorySample> gt_at_frames;
  for (std::size_t i = 0; i < src.size(); ++i) {
    Frame f = src.frame(i);
    if (!pipe.bootstrapped()) pipe.bootstrap(f.ground_truth.value_or(Pose::identity()));
    frames.clear();
    for (std::size_t s = 0; s < f.clouds.size(); ++s) {
      LidarFeed feed = src.sensors()[s].feed;
      feed.last_msg_time = f.stamp;
      frames.emplace_back(feed, std::move(f.clouds[s]));
    }
    const FrameReport rep = pipe.process_scan(frames, f.imu, f.prior, f.stamp);
    out.peak_alive = std::max(out.peak_alive, rep.map.alive);
    out.estimate.push_back({f.stamp, rep.pose});
    if (f.ground_truth) gt_at_frames.push_back({f.stamp, *f.ground_truth});
    if (hook) hook(rep, pipe);
    out.reports.push_back(rep);
  }
  auto gt = src.ground_truth();
  if (gt.empty()) gt = gt_at_frames;
  if (!gt.empty() && !out.estimate.empty()) {
    out.ape = ape(out.estimate, gt, 0.5 * src.scan_period());
    for (std::size_t i = 1; i < gt_at_frames.size(); ++i) {
      out.distance_m += (gt_at_frames[i].pose.translation - gt_at_frames[i - 1].pose.translation).norm();
    }
    if (!gt_at_frames.empty()) {
      const Pose align = gt_at_frames.front().pose * out.estimate.front().pose.inverse();
      out.final_error_m =
          ((align * out.estimate.back().pose).translation - gt_at_frames.back().pose.translation).norm();
    }
  }
  return out;
}

namespace detail {

inline double percentile(std::vector<double> v, double p) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const double idx = p / 100.0 * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(idx));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (idx - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

/// Rounds to 9 significant digits so JSON output is stable across runs
/// that agree to that precision.
inline double sig9(double v) {
  if (!std::isfinite(v) || v == 0.0) return v;
  return std::stod(fmt9(v));
}

}  // namespace detail

inline const std::vector<std::string>& frame_csv_columns() {
  static const std::vector<std::string> cols{
      "frame", "stamp", "tx", "ty", "tz", "qx", "qy", "qz", "qw",
      "scan_points", "leaf_size", "map_alive", "map_allocated", "map_bytes",
      "window_slid", "slide_compacted", "bootstrap", "degraded", "fallback",
      "s2s_converged", "s2s_iterations", "s2s_iterations_identity_seed", "s2s_fitness",
      "s2m_converged", "s2m_iterations", "s2m_rotation_change", "gate_accepted",
      "gate_reject_streak", "t_callback", "t_preprocess", "t_normals", "t_scan_to_scan",
      "t_scan_to_submap", "t_map_update", "odometry_delay"};
  return cols;
}

inline std::string frame_csv_row(const FrameReport& r) {
  using detail::fmt9;
  std::string s = std::to_string(r.frame) + "," + fmt9(r.stamp) + detail::pose_cells(r.pose);
  auto add = [&s](const std::string& v) { s += "," + v; };
  add(std::to_string(r.scan_points));
  add(fmt9(r.leaf_size));
  add(std::to_string(r.map.alive));
  add(std::to_string(r.map.allocated));
  add(std::to_string(r.map.bytes));
  add(std::to_string(int(r.window_slid)));
  add(std::to_string(int(r.slide_compacted)));
  add(std::to_string(int(r.bootstrap)));
  add(std::to_string(int(r.degraded)));
  add(std::string(to_string(r.fallback)));
  add(std::to_string(int(r.s2s_converged)));
  add(std::to_string(r.s2s_iterations));
  add(std::to_string(r.s2s_iterations_identity_seed));
  add(fmt9(r.s2s_fitness));
  add(std::to_string(int(r.s2m_converged)));
  add(std::to_string(r.s2m_iterations));
  add(fmt9(r.s2m_rotation_change));
  add(std::to_string(int(r.gate_accepted)));
  add(std::to_string(r.gate_reject_streak));
  for (double t : {r.times.callback, r.times.preprocess, r.times.normals, r.times.scan_to_scan,
                   r.times.scan_to_submap, r.times.map_update, r.odometry_delay}) {
    add(fmt9(t));
  }
  return s;
}

/// Deterministic run summary: no wall-clock quantities.
inline nlohmann::json summary_json(const RunResult& r, const nlohmann::json& run_info) {
  using detail::sig9;
  nlohmann::json j;
  j["run"] = run_info;
  j["frames"] = r.reports.size();
  std::size_t degraded = 0, gate_accepted = 0, slides = 0, max_streak = 0, prior_cmp = 0, prior_le = 0;
  for (const auto& f : r.reports) {
    degraded += f.degraded;
    gate_accepted += f.gate_accepted;
    slides += f.window_slid;
    max_streak = std::max(max_streak, f.gate_reject_streak);
    if (f.s2s_iterations_identity_seed >= 0) {
      ++prior_cmp;
      prior_le += f.s2s_iterations <= f.s2s_iterations_identity_seed;
    }
  }
  j["degraded_frames"] = degraded;
  j["gate_accepted_frames"] = gate_accepted;
  j["max_gate_reject_streak"] = max_streak;
  j["window_slides"] = slides;
  j["peak_alive_map_points"] = r.peak_alive;
  j["final_alive_map_points"] = r.reports.empty() ? 0 : r.reports.back().map.alive;
  if (prior_cmp > 0) {
    j["prior_iterations_le_identity_fraction"] = sig9(double(prior_le) / double(prior_cmp));
  }
  if (!r.estimate.empty()) {
    const Pose& p = r.estimate.back().pose;
    j["final_pose"] = {sig9(p.translation.x()), sig9(p.translation.y()), sig9(p.translation.z())};
  }
  if (r.ape) {
    j["ape"] = {{"max_m", sig9(r.ape->max_m)},
                {"mean_m", sig9(r.ape->mean_m)},
                {"rmse_m", sig9(r.ape->rmse_m)},
                {"max_rot_deg", sig9(r.ape->max_rot_deg)},
                {"mean_rot_deg", sig9(r.ape->mean_rot_deg)},
                {"associated", r.ape->associated}};
    j["distance_m"] = sig9(r.distance_m);
    j["final_error_m"] = sig9(r.final_error_m);
    j["final_error_pct"] = r.distance_m > 0.0 ? sig9(100.0 * r.final_error_m / r.distance_m) : 0.0;
  } else {
    j["ape"] = nullptr;
  }
  return j;
}

/// Stage-time percentiles in seconds. Varies run to run.
inline nlohmann::json timing_json(const RunResult& r) {
  nlohmann::json j;
  auto stage = [&](const std::string& name, auto get) {
    std::vector<double> v;
    for (const auto& f : r.reports) v.push_back(get(f));
    j[name] = {{"p50", detail::percentile(v, 50)},
               {"p90", detail::percentile(v, 90)},
               {"p99", detail::percentile(v, 99)},
               {"max", detail::percentile(v, 100)}};
  };
  stage("callback", [](const FrameReport& f) { return f.times.callback; });
  stage("preprocess", [](const FrameReport& f) { return f.times.preprocess; });
  stage("normals", [](const FrameReport& f) { return f.times.normals; });
  stage("scan_to_scan", [](const FrameReport& f) { return f.times.scan_to_scan; });
  stage("scan_to_submap", [](const FrameReport& f) { return f.times.scan_to_submap; });
  stage("map_update", [](const FrameReport& f) { return f.times.map_update; });
  stage("odometry_delay", [](const FrameReport& f) { return f.odometry_delay; });
  return j;
}

/// Writes frames.csv, map_size.csv, trajectory.csv, summary.json and
/// timing.json into `dir`.
inline void write_reports(const RunResult& r, const nlohmann::json& run_info,
                          const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "frames.csv");
    if (!out) throw std::runtime_error("cannot write " + (dir / "frames.csv").string());
    const auto& cols = frame_csv_columns();
    for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
    out << '\n';
    for (const auto& f : r.reports) out << frame_csv_row(f) << '\n';
  }
  {
    std::ofstream out(dir / "map_size.csv");
    out << "frame,stamp,alive,allocated,bytes\n";
    for (const auto& f : r.reports) {
      out << f.frame << ',' << detail::fmt9(f.stamp) << ',' << f.map.alive << ',' << f.map.allocated
          << ',' << f.map.bytes << '\n';
    }
  }
  write_trajectory_csv(dir / "trajectory.csv", r.estimate);
  std::ofstream(dir / "summary.json") << summary_json(r, run_info).dump(2) << '\n';
  std::ofstream(dir / "timing.json") << timing_json(r).dump(2) << '\n';
}

}  // namespace loamkit::eval
