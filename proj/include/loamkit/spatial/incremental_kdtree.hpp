#pragma once

#include <algorithm>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "loamkit/common.hpp"
#include "loamkit/spatial/neighbor.hpp"

namespace loamkit::spatial {

/// Rebuild thresholds. A subtree is rebuilt when one child holds more than
/// `balance` of its alive points, or when more than `deletion` of its stored
/// points are deleted. The balance test only applies to subtrees of at least
/// `min_balance_size` points.
struct IkdParams {
  double balance = 0.7;
  double deletion = 0.5;
  std::size_t min_balance_size = 10;
};

/// Incremental kd-tree with lazy deletion.
///
/// Points live in every node, not just leaves. Box deletion only labels
/// points (or whole subtrees) as deleted; labeled points stay allocated until
/// a rebuild of an enclosing subtree drops them. Rebuilds are synchronous.
/// Queries never return deleted points. Ties in distance resolve by
/// insertion id, and identical coordinates are stored as separate entries.
template <typename Payload = NoPayload>
class IncrementalKdTree {
 public:
  using Result = Neighbor<Payload>;
  using EntryT = Entry<Payload>;

  explicit IncrementalKdTree(IkdParams params = {}) : params_(params) {}

  IncrementalKdTree(IncrementalKdTree&&) noexcept = default;
  IncrementalKdTree& operator=(IncrementalKdTree&&) noexcept = default;

  /// Replaces the contents with a balanced tree over `points`.
  void build(std::span<const Vec3> points, std::span<const Payload> payloads = {}) {
    std::vector<EntryT> entries;
    entries.reserve(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) {
      entries.push_back(make_entry(points[i], payloads, i));
    }
    root_ = build_balanced(entries, 0, entries.size());
  }

  void insert_points(std::span<const Vec3> points,
                     std::span<const Payload> payloads = {}) {
    for (std::size_t i = 0; i < points.size(); ++i) {
      insert_entry(make_entry(points[i], payloads, i));
    }
  }

  void insert_point(const Vec3& p, const Payload& payload = {}) {
    insert_entry(EntryT{p, next_id_++, payload});
  }

  /// Labels every alive point inside the closed box as deleted and returns
  /// how many were newly labeled. Storage is reclaimed by later rebuilds.
  std::size_t delete_box(const AxisBox& box) {
    if (box.empty()) return 0;
    return delete_box_at(root_.get(), box);
  }

  /// Rebuilds the whole tree if the root violates a criterion.
  bool rebuild_if_needed() { return rebuild_slot_if_needed(root_); }

  /// Rebuilds the whole tree from its alive points unconditionally.
  void compact() { rebuild_slot(root_); }

  std::vector<Result> knn(const Vec3& q, std::size_t k) const {
    KnnCollector<Payload> collector(k);
    if (k > 0) knn_visit(root_.get(), q, collector);
    return collector.take_sorted();
  }

  std::vector<Result> radius_search(const Vec3& q, double radius) const {
    std::vector<Result> out;
    radius_visit(root_.get(), q, radius * radius, out);
    sort_neighbors(out);
    return out;
  }

  /// Stored points, including ones labeled deleted.
  std::size_t allocated() const { return root_ ? root_->size : 0; }
  std::size_t alive() const { return root_ ? root_->size - root_->invalid : 0; }
  bool empty() const { return alive() == 0; }
  std::size_t rebuild_count() const { return rebuilds_; }
  const IkdParams& params() const { return params_; }

  /// Number of levels; an empty tree has depth 0.
  std::size_t depth() const { return depth_of(root_.get()); }

  /// Recounts size and deleted counts bottom-up and compares them with the
  /// stored counters. Nodes below a lazily deleted subtree count as deleted.
  bool verify_counters() const {
    bool ok = true;
    recount(root_.get(), false, ok);
    return ok;
  }

  /// Checks the balance criterion at the root.
  bool root_balanced() const {
    return !root_ || !violates(*root_);
  }

  std::vector<EntryT> alive_entries() const {
    std::vector<EntryT> out;
    collect_alive(root_.get(), out);
    return out;
  }

 private:
  struct Node {
    EntryT entry;
    int axis = 0;
    std::size_t size = 1;
    std::size_t invalid = 0;
    bool deleted = false;
    bool tree_deleted = false;
    AxisBox box;
    std::unique_ptr<Node> left;
    std::unique_ptr<Node> right;
  };
  using Slot = std::unique_ptr<Node>;

  EntryT make_entry(const Vec3& p, std::span<const Payload> payloads,
                    std::size_t i) {
    return EntryT{p, next_id_++, payloads.empty() ? Payload{} : payloads[i]};
  }

  static std::size_t alive_of(const Slot& s) {
    return s ? s->size - s->invalid : 0;
  }

  bool violates(const Node& n) const {
    if (n.size == 0) return false;
    if (static_cast<double>(n.invalid) >
        params_.deletion * static_cast<double>(n.size)) {
      return true;
    }
    if (n.size < params_.min_balance_size) return false;
    const double alive = static_cast<double>(n.size - n.invalid);
    const double heavier =
        static_cast<double>(std::max(alive_of(n.left), alive_of(n.right)));
    return heavier > params_.balance * alive;
  }

  /// Hands a subtree-wide deletion label down one level.
  static void push_down(Node& n) {
    if (!n.tree_deleted) return;
    for (Slot* child : {&n.left, &n.right}) {
      if (*child) {
        (*child)->tree_deleted = true;
        (*child)->deleted = true;
        (*child)->invalid = (*child)->size;
      }
    }
  }

  static void pull_up(Node& n) {
    n.size = 1 + (n.left ? n.left->size : 0) + (n.right ? n.right->size : 0);
    n.invalid = (n.deleted ? 1 : 0) + (n.left ? n.left->invalid : 0) +
                (n.right ? n.right->invalid : 0);
    n.box = AxisBox{};
    n.box.expand(n.entry.point);
    if (n.left) n.box.expand(n.left->box);
    if (n.right) n.box.expand(n.right->box);
  }

  void insert_entry(const EntryT& e) {
    path_.clear();
    std::size_t to_rebuild = kNone;
    insert_at(root_, e, 0, to_rebuild);
    if (to_rebuild == kNone) return;
    rebuild_slot(*path_[to_rebuild]);
    // the rebuild dropped deleted points; refresh counters above it
    for (std::size_t i = to_rebuild; i-- > 0;) pull_up(**path_[i]);
  }

  void insert_at(Slot& slot, const EntryT& e, int axis, std::size_t& to_rebuild) {
    if (!slot) {
      slot = std::make_unique<Node>();
      slot->entry = e;
      slot->axis = axis;
      slot->box.expand(e.point);
      return;
    }
    Node& n = *slot;
    const std::size_t depth = path_.size();
    path_.push_back(&slot);
    push_down(n);
    n.tree_deleted = false;
    const int next_axis = (n.axis + 1) % 3;
    if (e.point[n.axis] < n.entry.point[n.axis]) {
      insert_at(n.left, e, next_axis, to_rebuild);
    } else {
      insert_at(n.right, e, next_axis, to_rebuild);
    }
    ++n.size;
    n.box.expand(e.point);
    // unwinding bottom-up, so the last hit is the topmost violating node
    if (violates(n)) to_rebuild = depth;
  }

  std::size_t delete_box_at(Node* n, const AxisBox& box) {
    if (!n || n->tree_deleted || n->invalid == n->size) return 0;
    if (!box.intersects(n->box)) return 0;
    if (box.contains(n->box)) {
      const std::size_t newly = n->size - n->invalid;
      n->tree_deleted = true;
      n->deleted = true;
      n->invalid = n->size;
      return newly;
    }
    push_down(*n);
    std::size_t newly = 0;
    if (!n->deleted && box.contains(n->entry.point)) {
      n->deleted = true;
      ++newly;
    }
    newly += delete_box_at(n->left.get(), box);
    newly += delete_box_at(n->right.get(), box);
    n->invalid += newly;
    return newly;
  }

  bool rebuild_slot_if_needed(Slot& slot) {
    if (!slot || !violates(*slot)) return false;
    rebuild_slot(slot);
    return true;
  }

  void rebuild_slot(Slot& slot) {
    if (!slot) return;
    std::vector<EntryT> entries;
    entries.reserve(slot->size - slot->invalid);
    collect_alive(slot.get(), entries);
    slot = build_balanced(entries, 0, entries.size());
    ++rebuilds_;
  }

  static void collect_alive(const Node* n, std::vector<EntryT>& out) {
    if (!n || n->tree_deleted || n->invalid == n->size) return;
    collect_alive(n->left.get(), out);
    if (!n->deleted) out.push_back(n->entry);
    collect_alive(n->right.get(), out);
  }

  /// Median split along the longest extent, applied recursively.
  static Slot build_balanced(std::vector<EntryT>& v, std::size_t lo,
                             std::size_t hi) {
    if (lo >= hi) return nullptr;
    AxisBox box;
    for (std::size_t i = lo; i < hi; ++i) box.expand(v[i].point);
    const int axis = box.longest_axis();
    const std::size_t mid = lo + (hi - lo) / 2;
    std::nth_element(v.begin() + lo, v.begin() + mid, v.begin() + hi,
                     [axis](const EntryT& a, const EntryT& b) {
                       const double pa = a.point[axis];
                       const double pb = b.point[axis];
                       return pa < pb || (pa == pb && a.id < b.id);
                     });
    auto n = std::make_unique<Node>();
    n->entry = v[mid];
    n->axis = axis;
    n->left = build_balanced(v, lo, mid);
    n->right = build_balanced(v, mid + 1, hi);
    pull_up(*n);
    return n;
  }

  static bool hidden(const Node* n) {
    return !n || n->tree_deleted || n->invalid == n->size;
  }

  void knn_visit(const Node* n, const Vec3& q, KnnCollector<Payload>& out) const {
    if (hidden(n)) return;
    if (n->box.squared_distance_to(q) > out.bound()) return;
    if (!n->deleted) {
      out.offer(n->entry.point, n->entry.id, squared_distance(n->entry.point, q),
                n->entry.payload);
    }
    const Node* a = n->left.get();
    const Node* b = n->right.get();
    const double da = hidden(a) ? std::numeric_limits<double>::infinity()
                                : a->box.squared_distance_to(q);
    const double db = hidden(b) ? std::numeric_limits<double>::infinity()
                                : b->box.squared_distance_to(q);
    if (db < da) std::swap(a, b);
    knn_visit(a, q, out);
    knn_visit(b, q, out);
  }

  void radius_visit(const Node* n, const Vec3& q, double r2,
                    std::vector<Result>& out) const {
    if (hidden(n)) return;
    if (n->box.squared_distance_to(q) > r2) return;
    if (!n->deleted) {
      const double d2 = squared_distance(n->entry.point, q);
      if (d2 <= r2) out.push_back(Result{n->entry.point, n->entry.id, d2, n->entry.payload});
    }
    radius_visit(n->left.get(), q, r2, out);
    radius_visit(n->right.get(), q, r2, out);
  }

  static std::size_t depth_of(const Node* n) {
    if (!n) return 0;
    return 1 + std::max(depth_of(n->left.get()), depth_of(n->right.get()));
  }

  /// Returns (size, invalid) of the subtree as seen by queries.
  static std::pair<std::size_t, std::size_t> recount(const Node* n,
                                                     bool under_label, bool& ok) {
    if (!n) return {0, 0};
    const bool labeled = under_label || n->tree_deleted;
    const auto [ls, li] = recount(n->left.get(), labeled, ok);
    const auto [rs, ri] = recount(n->right.get(), labeled, ok);
    const std::size_t size = 1 + ls + rs;
    const std::size_t invalid =
        labeled ? size : (n->deleted ? 1 : 0) + li + ri;
    if (n->size != size) ok = false;
    // counters below a label are refreshed lazily when the label is pushed down
    if (!under_label && n->invalid != invalid) ok = false;
    return {size, invalid};
  }

  static constexpr std::size_t kNone = static_cast<std::size_t>(-1);

  IkdParams params_;
  Slot root_;
  std::vector<Slot*> path_;
  std::uint64_t next_id_ = 0;
  std::size_t rebuilds_ = 0;
};

}  // namespace loamkit::spatial
