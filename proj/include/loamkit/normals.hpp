#pragma once

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <thread>
#include <vector>

#include "loamkit/geometry.hpp"
#include "loamkit/spatial/static_kdtree.hpp"

namespace loamkit {

/// Relative eigenvalue floor below which a neighborhood counts as collinear.
inline constexpr double kDegenerateNeighborhood = 1e-12;

/// Normal of one neighborhood: smallest-eigenvalue eigenvector of the scatter
/// matrix, facing the viewpoint. Zero vector when the neighborhood is
/// rank-deficient.
inline Vec3 neighborhood_normal(const std::vector<Vec3>& pts, const Vec3& at,
                                const Vec3& viewpoint) {
  Vec3 mean = Vec3::Zero();
  for (const auto& p : pts) mean += p;
  mean /= static_cast<double>(pts.size());
  Mat3 scatter = Mat3::Zero();
  for (const auto& p : pts) {
    const Vec3 d = p - mean;
    scatter.noalias() += d * d.transpose();
  }
  const double trace = scatter.trace();
  if (!(trace > 0.0)) return Vec3::Zero();
  const Eigen::SelfAdjointEigenSolver<Mat3> eig(scatter);
  const Vec3 values = eig.eigenvalues();  // ascending
  if (values[1] < kDegenerateNeighborhood * trace) return Vec3::Zero();
  Vec3 n = eig.eigenvectors().col(0).normalized();
  if (n.dot(viewpoint - at) < 0.0) n = -n;
  return n;
}

/// Per-point normals from the point and its k nearest neighbors.
///
/// Points whose neighborhood is collinear (or coincident) get a zero normal,
/// which marks them invalid downstream. `threads` splits the points into
/// fixed contiguous chunks; the result does not depend on it.
inline PointCloud estimate_normals(const PointCloud& cloud, std::size_t k,
                                   const Vec3& viewpoint, std::size_t threads = 1) {
  if (k < 3) throw InvalidInput("normal estimation needs k >= 3");
  if (cloud.size() < k + 1) throw InvalidInput("cloud smaller than k + 1 points");
  cloud.validate();
  const spatial::StaticKdTree tree(cloud.points);
  PointCloud out = cloud;
  out.normals.assign(cloud.size(), Vec3::Zero());

  auto work = [&](std::size_t lo, std::size_t hi) {
    std::vector<Vec3> hood;
    hood.reserve(k + 1);
    for (std::size_t i = lo; i < hi; ++i) {
      hood.clear();
      for (const auto& n : tree.knn(cloud.points[i], k + 1)) hood.push_back(n.point);
      out.normals[i] = neighborhood_normal(hood, cloud.points[i], viewpoint);
    }
  };

  threads = std::max<std::size_t>(1, std::min(threads, cloud.size()));
  if (threads == 1) {
    work(0, cloud.size());
    return out;
  }
  std::vector<std::thread> pool;
  const std::size_t chunk = (cloud.size() + threads - 1) / threads;
  for (std::size_t t = 0; t < threads; ++t) {
    const std::size_t lo = t * chunk;
    const std::size_t hi = std::min(cloud.size(), lo + chunk);
    if (lo < hi) pool.emplace_back(work, lo, hi);
  }
  for (auto& th : pool) th.join();
  return out;
}

}  // namespace loamkit
