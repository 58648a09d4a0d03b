#pragma once

#include <array>
#include <cstdint>
#include <queue>
#include <span>
#include <vector>

#include "loamkit/common.hpp"
#include "loamkit/spatial/neighbor.hpp"

namespace loamkit::spatial {

/// Point octree with bucketed leaves. Cells split once they hold more than
/// `bucket` points, but never below an edge length of `leaf_size`, so the
/// leaf size bounds depth and node count. Points are addressed by their
/// insertion index. The root grows outward when a point lands outside it.
class Octree {
 public:
  explicit Octree(double leaf_size = 0.01, std::size_t bucket = 16)
      : leaf_size_(leaf_size), bucket_(bucket) {
    if (!(leaf_size > 0.0)) throw InvalidInput("octree leaf size must be positive");
  }

  void build(std::span<const Vec3> points) {
    points_.clear();
    nodes_.clear();
    root_ = 0;
    if (points.empty()) return;
    AxisBox box;
    for (const auto& p : points) box.expand(p);
    const double half =
        std::max(0.5 * (box.max - box.min).maxCoeff() * (1.0 + 1e-9), leaf_size_);
    nodes_.push_back(Node{0.5 * (box.min + box.max), half});
    points_.reserve(points.size());
    for (const auto& p : points) insert(p);
  }

  std::uint32_t insert(const Vec3& p) {
    const auto index = static_cast<std::uint32_t>(points_.size());
    points_.push_back(p);
    if (nodes_.empty()) {
      nodes_.push_back(Node{p, leaf_size_});
    }
    while (!cell_contains(nodes_[root_], p)) grow_toward(p);
    insert_into(root_, index);
    return index;
  }

  std::size_t size() const { return points_.size(); }
  const Vec3& point(std::uint32_t i) const { return points_[i]; }
  std::size_t node_count() const { return nodes_.size(); }
  double leaf_size() const { return leaf_size_; }

  std::size_t bytes_estimate() const {
    std::size_t items = 0;
    for (const auto& n : nodes_) items += n.items.capacity();
    return nodes_.capacity() * sizeof(Node) + points_.capacity() * sizeof(Vec3) +
           items * sizeof(std::uint32_t);
  }

  /// k nearest points among those with visible(index) true, ordered by
  /// distance then index.
  template <typename Visible>
  std::vector<Neighbor<NoPayload>> knn(const Vec3& q, std::size_t k,
                                       Visible&& visible) const {
    KnnCollector<NoPayload> out(k);
    if (nodes_.empty() || k == 0) return out.take_sorted();
    using Item = std::pair<double, std::int32_t>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> frontier;
    frontier.emplace(cell_distance(nodes_[root_], q), root_);
    while (!frontier.empty()) {
      const auto [d2, id] = frontier.top();
      frontier.pop();
      if (d2 > out.bound()) break;
      const Node& n = nodes_[id];
      if (n.leaf) {
        for (auto i : n.items) {
          if (visible(i)) out.offer(points_[i], i, squared_distance(points_[i], q), {});
        }
        continue;
      }
      for (auto c : n.children) {
        if (c >= 0) {
          const double dc = cell_distance(nodes_[c], q);
          if (dc <= out.bound()) frontier.emplace(dc, c);
        }
      }
    }
    return out.take_sorted();
  }

  template <typename Visible>
  std::vector<Neighbor<NoPayload>> radius_search(const Vec3& q, double radius,
                                                 Visible&& visible) const {
    std::vector<Neighbor<NoPayload>> out;
    const double r2 = radius * radius;
    if (!nodes_.empty()) {
      visit_cells(root_, [&](const Node& n) { return cell_distance(n, q) <= r2; },
                  [&](std::uint32_t i) {
                    if (!visible(i)) return;
                    const double d2 = squared_distance(points_[i], q);
                    if (d2 <= r2) out.push_back({points_[i], i, d2, {}});
                  });
    }
    sort_neighbors(out);
    return out;
  }

  /// Calls f(index) for every stored point inside the closed box.
  template <typename F>
  void for_each_in_box(const AxisBox& box, F&& f) const {
    if (nodes_.empty()) return;
    visit_cells(root_, [&](const Node& n) { return box.intersects(cell_box(n)); },
                [&](std::uint32_t i) {
                  if (box.contains(points_[i])) f(i);
                });
  }

 private:
  struct Node {
    Vec3 center;
    double half = 0.0;
    bool leaf = true;
    std::array<std::int32_t, 8> children{-1, -1, -1, -1, -1, -1, -1, -1};
    std::vector<std::uint32_t> items;

    Node(const Vec3& c, double h) : center(c), half(h) {}
  };

  static bool cell_contains(const Node& n, const Vec3& p) {
    return (p - n.center).cwiseAbs().maxCoeff() <= n.half;
  }

  static AxisBox cell_box(const Node& n) {
    return AxisBox::centered(n.center, n.half);
  }

  static double cell_distance(const Node& n, const Vec3& q) {
    return cell_box(n).squared_distance_to(q);
  }

  static int octant(const Node& n, const Vec3& p) {
    return (p.x() >= n.center.x() ? 1 : 0) | (p.y() >= n.center.y() ? 2 : 0) |
           (p.z() >= n.center.z() ? 4 : 0);
  }

  static Vec3 child_center(const Node& n, int oct) {
    const double h = 0.5 * n.half;
    return n.center + Vec3((oct & 1) ? h : -h, (oct & 2) ? h : -h, (oct & 4) ? h : -h);
  }

  void grow_toward(const Vec3& p) {
    const Node old = nodes_[root_];
    Vec3 c = old.center;
    for (int a = 0; a < 3; ++a) c[a] += (p[a] >= old.center[a]) ? old.half : -old.half;
    Node top{c, 2.0 * old.half};
    top.leaf = false;
    top.children[octant(top, old.center)] = root_;
    nodes_.push_back(std::move(top));
    root_ = static_cast<std::int32_t>(nodes_.size() - 1);
  }

  std::int32_t child_for(std::int32_t id, int oct) {
    if (nodes_[id].children[oct] < 0) {
      Node child{child_center(nodes_[id], oct), 0.5 * nodes_[id].half};
      nodes_.push_back(std::move(child));
      nodes_[id].children[oct] = static_cast<std::int32_t>(nodes_.size() - 1);
    }
    return nodes_[id].children[oct];
  }

  void insert_into(std::int32_t id, std::uint32_t index) {
    while (!nodes_[id].leaf) {
      id = child_for(id, octant(nodes_[id], points_[index]));
    }
    nodes_[id].items.push_back(index);
    // cells at or below the leaf size are never split
    if (nodes_[id].items.size() > bucket_ && 2.0 * nodes_[id].half > leaf_size_) {
      split(id);
    }
  }

  void split(std::int32_t id) {
    std::vector<std::uint32_t> items = std::move(nodes_[id].items);
    nodes_[id].items.clear();
    nodes_[id].leaf = false;
    for (auto i : items) insert_into(id, i);
  }

  template <typename Enter, typename Emit>
  void visit_cells(std::int32_t id, Enter&& enter, Emit&& emit) const {
    const Node& n = nodes_[id];
    if (!enter(n)) return;
    if (n.leaf) {
      for (auto i : n.items) emit(i);
      return;
    }
    for (auto c : n.children) {
      if (c >= 0) visit_cells(c, enter, emit);
    }
  }

  double leaf_size_;
  std::size_t bucket_;
  std::vector<Vec3> points_;
  std::vector<Node> nodes_;
  std::int32_t root_ = 0;
};

}  // namespace loamkit::spatial
