#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "loamkit/common.hpp"
#include "loamkit/spatial/neighbor.hpp"

namespace loamkit::spatial {

/// Exhaustive reference index. Same id assignment and query ordering as the
/// trees, so results compare element for element.
template <typename Payload = NoPayload>
class BruteForceIndex {
 public:
  using Result = Neighbor<Payload>;

  void build(std::span<const Vec3> points, std::span<const Payload> payloads = {}) {
    entries_.clear();
    alive_.clear();
    insert_points(points, payloads);
  }

  void insert_points(std::span<const Vec3> points,
                     std::span<const Payload> payloads = {}) {
    for (std::size_t i = 0; i < points.size(); ++i) {
      entries_.push_back(
          Entry<Payload>{points[i], next_id_++,
                         payloads.empty() ? Payload{} : payloads[i]});
      alive_.push_back(1);
    }
  }

  std::size_t delete_box(const AxisBox& box) {
    std::size_t n = 0;
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      if (alive_[i] && box.contains(entries_[i].point)) {
        alive_[i] = 0;
        ++n;
      }
    }
    return n;
  }

  std::vector<Result> knn(const Vec3& q, std::size_t k) const {
    std::vector<Result> all = scan(q, std::numeric_limits<double>::infinity());
    if (all.size() > k) all.resize(k);
    return all;
  }

  std::vector<Result> radius_search(const Vec3& q, double radius) const {
    return scan(q, radius * radius);
  }

  std::size_t alive() const {
    std::size_t n = 0;
    for (auto a : alive_) n += a;
    return n;
  }

  std::size_t allocated() const { return entries_.size(); }

  std::vector<Entry<Payload>> alive_entries() const {
    std::vector<Entry<Payload>> out;
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      if (alive_[i]) out.push_back(entries_[i]);
    }
    return out;
  }

 private:
  std::vector<Result> scan(const Vec3& q, double r2) const {
    std::vector<Result> out;
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      if (!alive_[i]) continue;
      const double d2 = squared_distance(entries_[i].point, q);
      if (d2 <= r2) {
        out.push_back(Result{entries_[i].point, entries_[i].id, d2,
                             entries_[i].payload});
      }
    }
    sort_neighbors(out);
    return out;
  }

  std::vector<Entry<Payload>> entries_;
  std::vector<std::uint8_t> alive_;
  std::uint64_t next_id_ = 0;
};

}  // namespace loamkit::spatial
