#pragma once

#include <string>
#include <vector>

#include "loamkit/map/map_store.hpp"
#include "loamkit/spatial/incremental_kdtree.hpp"

namespace loamkit::map {

/// Sliding map on an incremental kd-tree. Window slides delete lazily; the
/// root is rebuilt afterwards only when the deletion criterion fires.
class IkdMap final : public MapStore {
 public:
  IkdMap(MapWindow window, double slide_margin, spatial::IkdParams params = {})
      : MapStore(window, slide_margin), tree_(params) {}

  std::size_t delete_box(const AxisBox& box) override { return tree_.delete_box(box); }

  std::vector<MapNeighbor> query_neighbors(const Vec3& q, std::size_t k) const override {
    return convert(tree_.knn(q, k));
  }

  std::vector<MapNeighbor> radius_search(const Vec3& q, double radius) const override {
    return convert(tree_.radius_search(q, radius));
  }

  MemoryStats memory_stats() const override {
    MemoryStats s;
    s.alive = tree_.alive();
    s.allocated = tree_.allocated();
    // node: entry + axis + counters + flags + box + two child pointers
    s.bytes = s.allocated * kNodeBytes;
    return s;
  }

  std::string backend_name() const override { return "ikd"; }
  bool last_slide_compacted() const override { return compacted_; }

  const spatial::IncrementalKdTree<Vec3>& tree() const { return tree_; }

 protected:
  void insert_inside(std::span<const Vec3> points,
                     std::span<const Vec3> normals) override {
    tree_.insert_points(points, normals);
  }

  void apply_slide(const MapWindow& window) override {
    for (const auto& slab : outside_slabs(window.box())) tree_.delete_box(slab);
    compacted_ = tree_.rebuild_if_needed();
  }

 private:
  static constexpr std::size_t kNodeBytes = 3 * 8 + 8 + 3 * 8 + 4 + 2 * 8 + 2 + 6 * 8 + 2 * 8;

  static std::vector<MapNeighbor> convert(
      const std::vector<spatial::Neighbor<Vec3>>& in) {
    std::vector<MapNeighbor> out;
    out.reserve(in.size());
    for (const auto& n : in) out.push_back({n.point, n.payload, n.id, n.squared_distance});
    return out;
  }

  spatial::IncrementalKdTree<Vec3> tree_;
  bool compacted_ = false;
};

}  // namespace loamkit::map
