#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include "loamkit/common.hpp"
#include "loamkit/spatial/neighbor.hpp"

namespace loamkit::spatial {

/// Balanced kd-tree over a frozen point set. Every node holds one point;
/// splits are at the median along the longest extent of the node's points.
/// Point ids are their indices in the input span.
class StaticKdTree {
 public:
  using Result = Neighbor<NoPayload>;

  StaticKdTree() = default;

  explicit StaticKdTree(std::span<const Vec3> points) { build(points); }

  void build(std::span<const Vec3> points) {
    points_.assign(points.begin(), points.end());
    nodes_.clear();
    nodes_.reserve(points_.size());
    std::vector<std::uint32_t> order(points_.size());
    std::iota(order.begin(), order.end(), 0u);
    root_ = build_range(order, 0, order.size());
  }

  std::size_t size() const { return points_.size(); }
  bool empty() const { return points_.empty(); }
  const Vec3& point(std::size_t i) const { return points_[i]; }

  /// Number of levels (a single node has depth 1).
  std::size_t depth() const { return depth_of(root_); }

  std::vector<Result> knn(const Vec3& query, std::size_t k) const {
    KnnCollector<NoPayload> collector(k);
    if (root_ >= 0 && k > 0) knn_visit(root_, query, collector);
    return collector.take_sorted();
  }

  std::vector<Result> radius_search(const Vec3& query, double radius) const {
    std::vector<Result> out;
    if (root_ >= 0) radius_visit(root_, query, radius * radius, out);
    sort_neighbors(out);
    return out;
  }

 private:
  struct Node {
    std::uint32_t index = 0;
    std::int32_t left = -1;
    std::int32_t right = -1;
    AxisBox box;
  };

  std::int32_t build_range(std::vector<std::uint32_t>& order, std::size_t lo,
                           std::size_t hi) {
    if (lo >= hi) return -1;
    AxisBox box;
    for (std::size_t i = lo; i < hi; ++i) box.expand(points_[order[i]]);
    const int axis = box.longest_axis();
    const std::size_t mid = lo + (hi - lo) / 2;
    std::nth_element(order.begin() + lo, order.begin() + mid, order.begin() + hi,
                     [&](std::uint32_t a, std::uint32_t b) {
                       const double pa = points_[a][axis];
                       const double pb = points_[b][axis];
                       return pa < pb || (pa == pb && a < b);
                     });
    const auto id = static_cast<std::int32_t>(nodes_.size());
    nodes_.push_back(Node{order[mid], -1, -1, box});
    const std::int32_t left = build_range(order, lo, mid);
    const std::int32_t right = build_range(order, mid + 1, hi);
    nodes_[id].left = left;
    nodes_[id].right = right;
    return id;
  }

  std::size_t depth_of(std::int32_t n) const {
    if (n < 0) return 0;
    return 1 + std::max(depth_of(nodes_[n].left), depth_of(nodes_[n].right));
  }

  void knn_visit(std::int32_t n, const Vec3& q,
                 KnnCollector<NoPayload>& out) const {
    const Node& node = nodes_[n];
    if (node.box.squared_distance_to(q) > out.bound()) return;
    const Vec3& p = points_[node.index];
    out.offer(p, node.index, squared_distance(p, q), NoPayload{});
    const double dl = node.left >= 0
                          ? nodes_[node.left].box.squared_distance_to(q)
                          : std::numeric_limits<double>::infinity();
    const double dr = node.right >= 0
                          ? nodes_[node.right].box.squared_distance_to(q)
                          : std::numeric_limits<double>::infinity();
    if (dl <= dr) {
      if (node.left >= 0) knn_visit(node.left, q, out);
      if (node.right >= 0) knn_visit(node.right, q, out);
    } else {
      if (node.right >= 0) knn_visit(node.right, q, out);
      if (node.left >= 0) knn_visit(node.left, q, out);
    }
  }

  void radius_visit(std::int32_t n, const Vec3& q, double r2,
                    std::vector<Result>& out) const {
    const Node& node = nodes_[n];
    if (node.box.squared_distance_to(q) > r2) return;
    const Vec3& p = points_[node.index];
    const double d2 = squared_distance(p, q);
    if (d2 <= r2) out.push_back(Result{p, node.index, d2, {}});
    if (node.left >= 0) radius_visit(node.left, q, r2, out);
    if (node.right >= 0) radius_visit(node.right, q, r2, out);
  }

  std::vector<Vec3> points_;
  std::vector<Node> nodes_;
  std::int32_t root_ = -1;
};

}  // namespace loamkit::spatial
