#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "loamkit/sim/trajectory.hpp"

namespace loamkit::eval {

struct ApeStats {
  double max_m = 0.0;
  double mean_m = 0.0;
  double rmse_m = 0.0;
  double max_rot_deg = 0.0;
  double mean_rot_deg = 0.0;
  std::size_t associated = 0;
};

/// Absolute pose error after aligning the first associated estimate onto its
/// ground-truth pose. Each estimate is paired with the ground-truth sample
/// nearest in time, if that sample is within `max_dt`. Ground truth must be
/// sorted by timestamp.
inline ApeStats ape(const std::vector<sim::TrajectorySample>& est,
                    const std::vector<sim::TrajectorySample>& gt, double max_dt = 0.05) {
  if (!(max_dt >= 0.0)) throw InvalidInput("max_dt must be non-negative");
  for (std::size_t i = 1; i < gt.size(); ++i) {
    if (!(gt[i].timestamp > gt[i - 1].timestamp)) {
      throw InvalidInput("ground-truth timestamps must be strictly increasing");
    }
  }
  std::vector<std::pair<const Pose*, const Pose*>> pairs;
  for (const auto& e : est) {
    auto it = std::lower_bound(gt.begin(), gt.end(), e.timestamp,
                               [](const sim::TrajectorySample& s, double t) { return s.timestamp < t; });
    const sim::TrajectorySample* best = nullptr;
    double best_dt = max_dt;
    for (auto c : {it, it == gt.begin() ? gt.end() : std::prev(it)}) {
      if (c == gt.end()) continue;
      const double dt = std::abs(c->timestamp - e.timestamp);
      if (dt <= best_dt) {
        best_dt = dt;
        best = &*c;
      }
    }
    if (best) pairs.emplace_back(&e.pose, &best->pose);
  }
  if (pairs.empty()) throw InvalidInput("no overlapping samples between estimate and ground truth");

  const Pose align = *pairs.front().second * pairs.front().first->inverse();
  ApeStats s;
  s.associated = pairs.size();
  double sq = 0.0;
  for (const auto& [e, g] : pairs) {
    const Pose aligned = align * *e;
    const double dt = (aligned.translation - g->translation).norm();
    const double dr = rotation_distance(aligned, *g) * 180.0 / M_PI;
    s.max_m = std::max(s.max_m, dt);
    s.mean_m += dt;
    sq += dt * dt;
    s.max_rot_deg = std::max(s.max_rot_deg, dr);
    s.mean_rot_deg += dr;
  }
  const auto n = static_cast<double>(pairs.size());
  s.mean_m /= n;
  s.mean_rot_deg /= n;
  s.rmse_m = std::sqrt(sq / n);
  return s;
}

}  // namespace loamkit::eval
