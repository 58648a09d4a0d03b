#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <queue>
#include <vector>

#include "loamkit/common.hpp"

namespace loamkit::spatial {

/// Stored entry of an index. `id` is the insertion sequence number and is
/// the tie-breaker for equal distances.
template <typename Payload>
struct Entry {
  Vec3 point;
  std::uint64_t id = 0;
  Payload payload{};
};

/// Empty payload for indexes that only store coordinates.
struct NoPayload {
  bool operator==(const NoPayload&) const = default;
};

template <typename Payload>
struct Neighbor {
  Vec3 point;
  std::uint64_t id = 0;
  double squared_distance = 0.0;
  Payload payload{};
};

/// Strict weak order used by every query: distance first, then id.
template <typename N>
inline bool neighbor_less(const N& a, const N& b) {
  if (a.squared_distance != b.squared_distance) {
    return a.squared_distance < b.squared_distance;
  }
  return a.id < b.id;
}

/// Keeps the k best neighbors seen so far.
template <typename Payload>
class KnnCollector {
 public:
  explicit KnnCollector(std::size_t k) : k_(k) { heap_.reserve(k + 1); }

  bool full() const { return heap_.size() >= k_; }

  /// Distance bound: subtrees whose box is strictly farther can be skipped.
  double bound() const {
    return full() ? heap_.front().squared_distance
                  : std::numeric_limits<double>::infinity();
  }

  void offer(const Vec3& p, std::uint64_t id, double d2, const Payload& payload) {
    if (k_ == 0) return;
    Neighbor<Payload> n{p, id, d2, payload};
    if (!full()) {
      heap_.push_back(n);
      std::push_heap(heap_.begin(), heap_.end(), cmp);
    } else if (cmp(n, heap_.front())) {
      std::pop_heap(heap_.begin(), heap_.end(), cmp);
      heap_.back() = n;
      std::push_heap(heap_.begin(), heap_.end(), cmp);
    }
  }

  std::vector<Neighbor<Payload>> take_sorted() {
    std::sort_heap(heap_.begin(), heap_.end(), cmp);
    return std::move(heap_);
  }

 private:
  static bool cmp(const Neighbor<Payload>& a, const Neighbor<Payload>& b) {
    return neighbor_less(a, b);
  }

  std::size_t k_;
  std::vector<Neighbor<Payload>> heap_;
};

template <typename Payload>
inline void sort_neighbors(std::vector<Neighbor<Payload>>& v) {
  std::sort(v.begin(), v.end(), neighbor_less<Neighbor<Payload>>);
}

}  // namespace loamkit::spatial
