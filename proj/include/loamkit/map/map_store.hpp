#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "loamkit/common.hpp"
#include "loamkit/geometry.hpp"

namespace loamkit::map {

/// Robot-centered cube; points on the faces are inside.
struct MapWindow {
  Vec3 center{Vec3::Zero()};
  double half_extent = 25.0;

  AxisBox box() const { return AxisBox::centered(center, half_extent); }
  bool contains(const Vec3& p) const { return box().contains(p); }

  /// Distance from p to the nearest face, negative outside.
  double distance_to_boundary(const Vec3& p) const {
    return half_extent - (p - center).cwiseAbs().maxCoeff();
  }
};

struct MapNeighbor {
  Vec3 point;
  Vec3 normal;
  std::uint64_t id = 0;
  double squared_distance = 0.0;
};

struct MemoryStats {
  std::size_t alive = 0;
  /// Stored points including ones deleted but not yet reclaimed.
  std::size_t allocated = 0;
  std::size_t bytes = 0;
};

/// Six half-spaces whose union is everything outside the closed box.
inline std::vector<AxisBox> outside_slabs(const AxisBox& keep) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<AxisBox> slabs;
  for (int axis = 0; axis < 3; ++axis) {
    AxisBox below = AxisBox::from_corners(Vec3::Constant(-inf), Vec3::Constant(inf));
    below.max[axis] = std::nextafter(keep.min[axis], -inf);
    AxisBox above = AxisBox::from_corners(Vec3::Constant(-inf), Vec3::Constant(inf));
    above.min[axis] = std::nextafter(keep.max[axis], inf);
    slabs.push_back(below);
    slabs.push_back(above);
  }
  return slabs;
}

/// Bounded sliding-window point map with stored normals.
///
/// The window only moves when the robot comes within `slide_margin` of a
/// face; then it recenters on the robot and everything outside the new cube
/// is deleted. Ids are assigned in insertion order and break distance ties,
/// so two backends fed the same operations answer queries identically.
class MapStore {
 public:
  MapStore(MapWindow window, double slide_margin)
      : window_(window), slide_margin_(slide_margin) {
    if (!(window.half_extent > 0.0)) {
      throw InvalidInput("map window half extent must be positive");
    }
    if (!(slide_margin >= 0.0) || slide_margin >= window.half_extent) {
      throw InvalidInput("slide margin must lie in [0, half extent)");
    }
  }
  virtual ~MapStore() = default;
  MapStore(const MapStore&) = delete;
  MapStore& operator=(const MapStore&) = delete;

  /// Adds the points of a world-frame cloud that fall inside the window.
  /// Points whose normal is flagged invalid are skipped. Returns the number
  /// of points added.
  std::size_t insert_scan(const PointCloud& world) {
    if (!world.has_normals()) throw InvalidInput("map insertion requires normals");
    world.validate();
    std::vector<Vec3> pts;
    std::vector<Vec3> normals;
    pts.reserve(world.size());
    normals.reserve(world.size());
    for (std::size_t i = 0; i < world.size(); ++i) {
      if (world.normal_valid(i) && window_.contains(world.points[i])) {
        pts.push_back(world.points[i]);
        normals.push_back(world.normals[i]);
      }
    }
    if (!pts.empty()) insert_inside(pts, normals);
    return pts.size();
  }

  /// Recenters the window on the robot when it is within the margin of a
  /// face (or outside). Returns whether the window moved.
  bool slide_window(const Vec3& robot_position) {
    if (window_.distance_to_boundary(robot_position) > slide_margin_) return false;
    window_.center = robot_position;
    apply_slide(window_);
    ++slides_;
    return true;
  }

  /// Marks every alive point inside the closed box deleted; returns how many.
  virtual std::size_t delete_box(const AxisBox& box) = 0;

  virtual std::vector<MapNeighbor> query_neighbors(const Vec3& q,
                                                   std::size_t k) const = 0;
  virtual std::vector<MapNeighbor> radius_search(const Vec3& q,
                                                 double radius) const = 0;
  virtual MemoryStats memory_stats() const = 0;
  virtual std::string backend_name() const = 0;

  /// True when the most recent slide finished with storage compacted, so
  /// allocated equals alive at that moment.
  virtual bool last_slide_compacted() const = 0;

  std::optional<MapNeighbor> nearest(const Vec3& q) const {
    auto r = query_neighbors(q, 1);
    if (r.empty()) return std::nullopt;
    return r.front();
  }

  /// While held, the store keeps serving from its current structure and
  /// queries are safe to issue from several threads at once.
  virtual void hold_structure(bool /*hold*/) const {}

  const MapWindow& window() const { return window_; }
  double slide_margin() const { return slide_margin_; }
  std::size_t slide_count() const { return slides_; }

 protected:
  /// Points are already inside the window and carry valid normals.
  virtual void insert_inside(std::span<const Vec3> points,
                             std::span<const Vec3> normals) = 0;
  /// Delete everything outside the new window.
  virtual void apply_slide(const MapWindow& window) = 0;

 private:
  MapWindow window_;
  double slide_margin_;
  std::size_t slides_ = 0;
};

}  // namespace loamkit::map
