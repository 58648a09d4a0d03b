#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "loamkit/map/map_store.hpp"
#include "loamkit/spatial/octree.hpp"

namespace loamkit::map {

/// Generation tag of the structure that answered the latest query.
struct QueryAudit {
  std::uint64_t generation = 0;
  bool complete = false;
  std::size_t points_in_structure = 0;
};

/// Double-buffered ("multi-threaded") octree map.
///
/// One buffer is active and serves inserts and queries on the caller's
/// thread. A window slide marks out-of-window points dead in the active
/// buffer and hands a snapshot of the alive points to a background worker,
/// which box-filters them around the robot and builds a fresh octree in the
/// other buffer. Operations issued while the worker runs are journaled and
/// replayed into the new buffer before it is swapped in, so the swap never
/// loses or resurrects points. Queries never wait on the worker.
class MtoOctreeMap final : public MapStore {
 public:
  MtoOctreeMap(MapWindow window, double slide_margin, double leaf_size = 0.01)
      : MapStore(window, slide_margin), leaf_size_(leaf_size) {
    if (!(leaf_size > 0.0)) throw InvalidInput("octree leaf size must be positive");
    active_ = std::make_unique<Buffer>(leaf_size_);
    active_->complete.store(true);
    worker_ = std::thread([this] { worker_loop(); });
  }

  ~MtoOctreeMap() override {
    {
      std::lock_guard lock(mutex_);
      stop_ = true;
    }
    cv_.notify_all();
    worker_.join();
  }

  std::size_t delete_box(const AxisBox& box) override {
    poll();
    const std::size_t n = mark_dead_in_box(*active_, box);
    if (in_flight_) journal_.push_back(JournalOp::erase_box(box));
    return n;
  }

  std::vector<MapNeighbor> query_neighbors(const Vec3& q, std::size_t k) const override {
    poll();
    if (!held_) record_audit();
    const Buffer& b = *active_;
    return convert(b, b.index.knn(q, k, [&b](std::uint32_t i) { return !b.dead[i]; }));
  }

  std::vector<MapNeighbor> radius_search(const Vec3& q, double radius) const override {
    poll();
    if (!held_) record_audit();
    const Buffer& b = *active_;
    return convert(b, b.index.radius_search(q, radius,
                                            [&b](std::uint32_t i) { return !b.dead[i]; }));
  }

  MemoryStats memory_stats() const override {
    poll();
    MemoryStats s;
    s.allocated = active_->index.size();
    s.alive = s.allocated - active_->dead_count;
    s.bytes = active_->index.bytes_estimate() +
              active_->normals.capacity() * sizeof(Vec3) +
              active_->ids.capacity() * sizeof(std::uint64_t) + active_->dead.capacity();
    return s;
  }

  std::string backend_name() const override { return "mto"; }

  void hold_structure(bool hold) const override {
    if (!hold) held_ = false;
    poll();
    held_ = hold;
  }

  bool last_slide_compacted() const override {
    poll();
    return compacted_;
  }

  /// Starts a rebuild of the inactive buffer even without a slide.
  void force_rebuild() {
    poll();
    request_rebuild();
  }

  /// Blocks until no rebuild is queued or running and the latest result has
  /// been swapped in.
  void wait_for_rebuild() {
    while (in_flight_ || rebuild_again_) {
      {
        std::unique_lock lock(mutex_);
        done_cv_.wait(lock, [this] { return result_ != nullptr; });
      }
      poll();
    }
  }

  bool rebuild_in_flight() const { return in_flight_; }
  std::uint64_t generation() const { return active_->generation; }
  std::size_t swap_count() const { return swaps_; }
  const QueryAudit& last_query_audit() const { return audit_; }
  double leaf_size() const { return leaf_size_; }

 protected:
  void insert_inside(std::span<const Vec3> points,
                     std::span<const Vec3> normals) override {
    poll();
    for (std::size_t i = 0; i < points.size(); ++i) {
      const std::uint64_t id = next_id_++;
      append(*active_, points[i], normals[i], id);
      if (in_flight_) journal_.push_back(JournalOp::add(points[i], normals[i], id));
    }
  }

  void apply_slide(const MapWindow& window) override {
    poll();
    mark_dead_outside(*active_, window.box());
    if (in_flight_) journal_.push_back(JournalOp::keep_inside(window.box()));
    compacted_ = false;
    request_rebuild();
  }

 private:
  struct Buffer {
    explicit Buffer(double leaf) : index(leaf) {}
    spatial::Octree index;
    std::vector<Vec3> normals;
    std::vector<std::uint64_t> ids;
    std::vector<std::uint8_t> dead;
    std::size_t dead_count = 0;
    std::uint64_t generation = 0;
    std::atomic<bool> complete{false};
  };

  struct Job {
    std::vector<Vec3> points;
    std::vector<Vec3> normals;
    std::vector<std::uint64_t> ids;
    AxisBox keep;
    std::uint64_t generation = 0;
  };

  struct JournalOp {
    enum class Kind { kAdd, kEraseBox, kKeepInside } kind;
    Vec3 point{Vec3::Zero()};
    Vec3 normal{Vec3::Zero()};
    std::uint64_t id = 0;
    AxisBox box;

    static JournalOp add(const Vec3& p, const Vec3& n, std::uint64_t id) {
      return {Kind::kAdd, p, n, id, {}};
    }
    static JournalOp erase_box(const AxisBox& b) {
      return {Kind::kEraseBox, Vec3::Zero(), Vec3::Zero(), 0, b};
    }
    static JournalOp keep_inside(const AxisBox& b) {
      return {Kind::kKeepInside, Vec3::Zero(), Vec3::Zero(), 0, b};
    }
  };

  static void append(Buffer& b, const Vec3& p, const Vec3& n, std::uint64_t id) {
    b.index.insert(p);
    b.normals.push_back(n);
    b.ids.push_back(id);
    b.dead.push_back(0);
  }

  static std::size_t mark_dead_in_box(Buffer& b, const AxisBox& box) {
    std::size_t n = 0;
    b.index.for_each_in_box(box, [&](std::uint32_t i) {
      if (!b.dead[i]) {
        b.dead[i] = 1;
        ++n;
      }
    });
    b.dead_count += n;
    return n;
  }

  static void mark_dead_outside(Buffer& b, const AxisBox& keep) {
    for (std::uint32_t i = 0; i < b.index.size(); ++i) {
      if (!b.dead[i] && !keep.contains(b.index.point(i))) {
        b.dead[i] = 1;
        ++b.dead_count;
      }
    }
  }

  static std::vector<MapNeighbor> convert(
      const Buffer& b, const std::vector<spatial::Neighbor<spatial::NoPayload>>& in) {
    std::vector<MapNeighbor> out;
    out.reserve(in.size());
    // octree indices increase with ids inside a buffer, so order carries over
    for (const auto& n : in) {
      out.push_back({n.point, b.normals[n.id], b.ids[n.id], n.squared_distance});
    }
    return out;
  }

  void record_audit() const {
    audit_.generation = active_->generation;
    audit_.complete = active_->complete.load(std::memory_order_acquire);
    audit_.points_in_structure = active_->index.size();
  }

  void request_rebuild() {
    if (in_flight_) {
      rebuild_again_ = true;
      return;
    }
    Job job;
    const Buffer& a = *active_;
    job.keep = window().box();
    job.generation = a.generation + 1;
    job.points.reserve(a.index.size() - a.dead_count);
    for (std::uint32_t i = 0; i < a.index.size(); ++i) {
      if (a.dead[i]) continue;
      job.points.push_back(a.index.point(i));
      job.normals.push_back(a.normals[i]);
      job.ids.push_back(a.ids[i]);
    }
    journal_.clear();
    in_flight_ = true;
    rebuild_again_ = false;
    {
      std::lock_guard lock(mutex_);
      job_ = std::move(job);
    }
    cv_.notify_all();
  }

  /// Installs a finished rebuild, if any. Runs on the caller's thread only.
  void poll() const {
    if (held_ || !in_flight_) return;
    std::unique_ptr<Buffer> fresh;
    {
      std::lock_guard lock(mutex_);
      if (!result_) return;
      fresh = std::move(result_);
    }
    for (const auto& op : journal_) {
      switch (op.kind) {
        case JournalOp::Kind::kAdd:
          append(*fresh, op.point, op.normal, op.id);
          break;
        case JournalOp::Kind::kEraseBox:
          mark_dead_in_box(*fresh, op.box);
          break;
        case JournalOp::Kind::kKeepInside:
          mark_dead_outside(*fresh, op.box);
          break;
      }
    }
    journal_.clear();
    active_ = std::move(fresh);
    in_flight_ = false;
    ++swaps_;
    compacted_ = active_->dead_count == 0;
    if (rebuild_again_) {
      const_cast<MtoOctreeMap*>(this)->request_rebuild();
    }
  }

  void worker_loop() {
    for (;;) {
      Job job;
      {
        std::unique_lock lock(mutex_);
        cv_.wait(lock, [this] { return stop_ || job_.has_value(); });
        if (stop_) return;
        job = std::move(*job_);
        job_.reset();
      }
      auto fresh = std::make_unique<Buffer>(leaf_size_);
      fresh->generation = job.generation;
      std::vector<Vec3> kept;
      kept.reserve(job.points.size());
      for (std::size_t i = 0; i < job.points.size(); ++i) {
        if (!job.keep.contains(job.points[i])) continue;
        kept.push_back(job.points[i]);
        fresh->normals.push_back(job.normals[i]);
        fresh->ids.push_back(job.ids[i]);
      }
      fresh->index.build(kept);
      fresh->dead.assign(kept.size(), 0);
      fresh->complete.store(true, std::memory_order_release);
      {
        std::lock_guard lock(mutex_);
        result_ = std::move(fresh);
      }
      done_cv_.notify_all();
    }
  }

  double leaf_size_;
  std::uint64_t next_id_ = 0;

  // caller-thread state
  mutable std::unique_ptr<Buffer> active_;
  mutable std::vector<JournalOp> journal_;
  mutable bool in_flight_ = false;
  mutable bool rebuild_again_ = false;
  mutable bool compacted_ = false;
  mutable bool held_ = false;
  mutable std::size_t swaps_ = 0;
  mutable QueryAudit audit_;

  // shared with the worker, guarded by mutex_
  mutable std::mutex mutex_;
  std::condition_variable cv_;
  mutable std::condition_variable done_cv_;
  std::optional<Job> job_;
  mutable std::unique_ptr<Buffer> result_;
  bool stop_ = false;
  std::thread worker_;
};

}  // namespace loamkit::map
