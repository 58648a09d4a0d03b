#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <memory>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "loamkit/pipeline.hpp"
#include "loamkit/sim/trajectory.hpp"

namespace loamkit::eval {

/// Malformed or missing on-disk data.
class DatasetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SensorSetup {
  LidarFeed feed;
  sim::LidarModel model;
};

/// Everything the pipeline consumes for one sweep, plus ground truth when
/// known.
struct Frame {
  double stamp = 0.0;
  std::vector<PointCloud> clouds;  // one per sensor, sensor frame
  std::vector<ImuSample> imu;      // body-frame rates around the sweep
  std::optional<ExternalPrior> prior;
  std::optional<Pose> ground_truth;
};

class FrameSource {
 public:
  virtual ~FrameSource() = default;
  virtual std::size_t size() const = 0;
  virtual const std::vector<SensorSetup>& sensors() const = 0;
  virtual double scan_period() const = 0;
  virtual Frame frame(std::size_t i) const = 0;
  /// Ground-truth body poses, possibly denser than the scan stamps.
  virtual std::vector<sim::TrajectorySample> ground_truth() const = 0;
};

enum class PriorMode { kNone, kTruth, kNoisy };

struct SimOptions {
  std::string preset = "corridor";
  std::size_t frames = 100;
  double speed = 1.0;
  std::uint64_t seed = 1;
  sim::LidarModel lidar;
  double imu_rate = 200.0;
  PriorMode prior = PriorMode::kNone;
  /// Per-frame prior noise: translation (m) and rotation (rad) std devs.
  double prior_noise_t = 0.01;
  double prior_noise_r = 0.002;
  sim::LoopShape loop;
  /// Sensor mounts; the body origin when empty.
  std::vector<Pose> extrinsics;

  void validate() const {
    const auto& names = sim::preset_names();
    if (std::find(names.begin(), names.end(), preset) == names.end()) {
      throw InvalidInput("unknown preset: " + preset);
    }
    lidar.validate();
    loop.validate();
    if (frames < 1) throw InvalidInput("need at least one frame");
    if (!(speed >= 0.0) || !std::isfinite(speed)) throw InvalidInput("speed must be non-negative");
    if (!(imu_rate > 0.0)) throw InvalidInput("imu rate must be positive");
    if (!(prior_noise_t >= 0.0) || !(prior_noise_r >= 0.0)) {
      throw InvalidInput("prior noise must be non-negative");
    }
    for (const auto& e : extrinsics) {
      if (!e.is_valid()) throw InvalidInput("extrinsic is not a rigid transform");
    }
  }
};

/// Frames synthesized on demand from a named preset. Sweep i ends at
/// (i + 1) * scan_period; the first sweep starts at time zero.
class SimSource final : public FrameSource {
 public:
  explicit SimSource(SimOptions opt) : opt_(std::move(opt)) {
    opt_.validate();
    const double duration = (static_cast<double>(opt_.frames) + 1.0) * opt_.lidar.scan_period;
    preset_ = sim::make_preset(opt_.preset, opt_.speed, duration, opt_.seed, opt_.loop);
    std::vector<Pose> mounts = opt_.extrinsics;
    if (mounts.empty()) mounts.push_back(Pose::identity());
    for (std::size_t i = 0; i < mounts.size(); ++i) {
      SensorSetup s;
      s.feed.id = "lidar" + std::to_string(i);
      s.feed.extrinsic = mounts[i];
      s.model = opt_.lidar;
      sensors_.push_back(s);
    }
  }

  std::size_t size() const override { return opt_.frames; }
  const std::vector<SensorSetup>& sensors() const override { return sensors_; }
  double scan_period() const override { return opt_.lidar.scan_period; }
  const SimOptions& options() const { return opt_; }
  const sim::SimPreset& preset() const { return preset_; }

  double stamp(std::size_t i) const { return static_cast<double>(i + 1) * scan_period(); }

  Frame frame(std::size_t i) const override {
    if (i >= size()) throw std::out_of_range("frame index");
    Frame f;
    f.stamp = stamp(i);
    const auto& traj = preset_.trajectory;
    // one noise stream per (frame, sensor) keeps frames independent of order
    for (std::size_t s = 0; s < sensors_.size(); ++s) {
      const Pose mount = sensors_[s].feed.extrinsic;
      std::mt19937_64 rng(opt_.seed * 1000003ULL + i * 131ULL + s);
      f.clouds.push_back(sim::simulate_sweep(
          preset_.scene, [&traj, &mount](double t) { return traj.pose(t) * mount; },
          sensors_[s].model, f.stamp, &rng));
    }
    f.imu = sim::imu_samples(traj, f.stamp - scan_period(), f.stamp, opt_.imu_rate);
    f.ground_truth = traj.pose(f.stamp);
    if (opt_.prior != PriorMode::kNone && i > 0) {
      Pose delta = traj.pose(stamp(i - 1)).inverse() * *f.ground_truth;
      if (opt_.prior == PriorMode::kNoisy) {
        std::mt19937_64 rng(opt_.seed * 7919ULL + i);
        std::normal_distribution<double> g;
        Vec6 xi;
        for (int k = 0; k < 3; ++k) xi[k] = opt_.prior_noise_r * g(rng);
        for (int k = 3; k < 6; ++k) xi[k] = opt_.prior_noise_t * g(rng);
        delta = se3_exp(xi) * delta;
      }
      f.prior = ExternalPrior{delta, "simulated", f.stamp};
    }
    return f;
  }

  std::vector<sim::TrajectorySample> ground_truth() const override {
    std::vector<sim::TrajectorySample> gt;
    for (std::size_t i = 0; i < size(); ++i) {
      gt.push_back({stamp(i), preset_.trajectory.pose(stamp(i))});
    }
    return gt;
  }

 private:
  SimOptions opt_;
  sim::SimPreset preset_;
  std::vector<SensorSetup> sensors_;
};

namespace detail {

inline std::string fmt9(double v) {
  std::ostringstream os;
  os << std::setprecision(9) << v;
  return os.str();
}

inline std::vector<std::vector<double>> read_csv(const std::filesystem::path& path,
                                                 std::size_t columns) {
  std::ifstream in(path);
  if (!in) throw DatasetError("cannot open " + path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    // header rows start with a letter
    if (std::isalpha(static_cast<unsigned char>(line[0]))) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(cell, &used));
      } catch (const std::exception&) {
        throw DatasetError(path.string() + ":" + std::to_string(lineno) + ": bad number '" + cell + "'");
      }
    }
    if (row.size() != columns) {
      throw DatasetError(path.string() + ":" + std::to_string(lineno) + ": expected " +
                         std::to_string(columns) + " columns");
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Pose pose_from_row(const std::vector<double>& r, std::size_t at) {
  Eigen::Quaterniond q(r[at + 6], r[at + 3], r[at + 4], r[at + 5]);
  if (!(std::abs(q.norm() - 1.0) < 1e-3)) throw DatasetError("quaternion is not unit length");
  return Pose::from_quaternion(q.normalized(), Vec3(r[at], r[at + 1], r[at + 2]));
}

inline std::string pose_cells(const Pose& p) {
  const auto q = p.quaternion();
  std::string s;
  for (double v : {p.translation.x(), p.translation.y(), p.translation.z(), q.x(), q.y(), q.z(), q.w()}) {
    s += "," + fmt9(v);
  }
  return s;
}

template <typename T>
T to_little(T v) {
  if constexpr (std::endian::native == std::endian::big) {
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    std::reverse(b, b + sizeof(T));
    std::memcpy(&v, b, sizeof(T));
  }
  return v;
}

inline nlohmann::json pose_json(const Pose& p) {
  const auto q = p.quaternion();
  return {{"translation", {p.translation.x(), p.translation.y(), p.translation.z()}},
          {"rotation_xyzw", {q.x(), q.y(), q.z(), q.w()}}};
}

inline Pose pose_from_json(const nlohmann::json& j) {
  const auto t = j.at("translation").get<std::vector<double>>();
  const auto r = j.at("rotation_xyzw").get<std::vector<double>>();
  if (t.size() != 3 || r.size() != 4) throw DatasetError("extrinsic needs 3 + 4 numbers");
  return pose_from_row({t[0], t[1], t[2], r[0], r[1], r[2], r[3]}, 0);
}

}  // namespace detail

/// Trajectory CSV: t, tx, ty, tz, qx, qy, qz, qw.
inline std::vector<sim::TrajectorySample> read_trajectory_csv(const std::filesystem::path& path) {
  std::vector<sim::TrajectorySample> out;
  for (const auto& r : detail::read_csv(path, 8)) out.push_back({r[0], detail::pose_from_row(r, 1)});
  return out;
}

inline void write_trajectory_csv(const std::filesystem::path& path,
                                 const std::vector<sim::TrajectorySample>& traj) {
  std::ofstream out(path);
  if (!out) throw DatasetError("cannot write " + path.string());
  out << "t,tx,ty,tz,qx,qy,qz,qw\n";
  for (const auto& s : traj) out << detail::fmt9(s.timestamp) << detail::pose_cells(s.pose) << '\n';
}

/// Count-prefixed little-endian float32 (x, y, z, t) records.
inline void write_scan_bin(const std::filesystem::path& path, const PointCloud& cloud) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DatasetError("cannot write " + path.string());
  const auto n = detail::to_little(static_cast<std::uint32_t>(cloud.size()));
  out.write(reinterpret_cast<const char*>(&n), sizeof n);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const double t = cloud.has_timestamps() ? cloud.timestamps[i] : 0.0;
    const float rec[4] = {static_cast<float>(cloud.points[i].x()), static_cast<float>(cloud.points[i].y()),
                          static_cast<float>(cloud.points[i].z()), static_cast<float>(t)};
    for (float v : rec) {
      v = detail::to_little(v);
      out.write(reinterpret_cast<const char*>(&v), sizeof v);
    }
  }
}

inline PointCloud read_scan_bin(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DatasetError("cannot open " + path.string());
  std::uint32_t n = 0;
  if (!in.read(reinterpret_cast<char*>(&n), sizeof n)) throw DatasetError("truncated scan " + path.string());
  n = detail::to_little(n);
  const auto expected = static_cast<std::uintmax_t>(n) * 16u + 4u;
  if (std::filesystem::file_size(path) != expected) {
    throw DatasetError("scan size does not match its count: " + path.string());
  }
  PointCloud c;
  c.frame_id = "sensor";
  c.points.reserve(n);
  c.timestamps.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    float rec[4];
    in.read(reinterpret_cast<char*>(rec), sizeof rec);
    for (float& v : rec) v = detail::to_little(v);
    c.points.emplace_back(rec[0], rec[1], rec[2]);
    c.timestamps.push_back(rec[3]);
  }
  c.validate();
  return c;
}

/// Writes every frame of `src` as an on-disk dataset.
inline void write_dataset(const FrameSource& src, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  using nlohmann::json;
  fs::create_directories(dir);
  json meta;
  meta["format"] = "loamkit-dataset";
  meta["version"] = 1;
  meta["scan_period"] = src.scan_period();
  json lidars = json::array();
  for (std::size_t s = 0; s < src.sensors().size(); ++s) {
    const auto& sen = src.sensors()[s];
    const std::string sub = s == 0 ? "scans" : "scans_" + sen.feed.id;
    fs::create_directories(dir / sub);
    const auto& m = sen.model;
    lidars.push_back({{"id", sen.feed.id},
                      {"scan_dir", sub},
                      {"timeout", sen.feed.timeout},
                      {"extrinsic", detail::pose_json(sen.feed.extrinsic)},
                      {"model",
                       {{"channels", m.channels},
                        {"horizontal_resolution", m.horizontal_resolution},
                        {"vertical_fov", m.vertical_fov},
                        {"min_range", m.min_range},
                        {"max_range", m.max_range},
                        {"scan_period", m.scan_period}}}});
  }
  meta["lidars"] = lidars;

  std::ofstream imu(dir / "imu.csv");
  imu << "t,wx,wy,wz,ax,ay,az\n";
  std::ofstream prior;
  std::vector<double> stamps;
  std::vector<sim::TrajectorySample> gt;
  double last_imu = -std::numeric_limits<double>::infinity();
  bool any_prior = false;
  for (std::size_t i = 0; i < src.size(); ++i) {
    const Frame f = src.frame(i);
    stamps.push_back(f.stamp);
    char name[32];
    std::snprintf(name, sizeof name, "%06zu.bin", i);
    for (std::size_t s = 0; s < f.clouds.size(); ++s) {
      write_scan_bin(dir / lidars[s]["scan_dir"].get<std::string>() / name, f.clouds[s]);
    }
    for (const auto& m : f.imu) {
      if (m.timestamp <= last_imu) continue;
      last_imu = m.timestamp;
      imu << detail::fmt9(m.timestamp);
      for (int k = 0; k < 3; ++k) imu << ',' << detail::fmt9(m.angular_velocity[k]);
      for (int k = 0; k < 3; ++k) imu << ',' << detail::fmt9(m.linear_acceleration[k]);
      imu << '\n';
    }
    if (f.prior) {
      if (!any_prior) {
        prior.open(dir / "prior.csv");
        prior << "t,tx,ty,tz,qx,qy,qz,qw\n";
        any_prior = true;
      }
      prior << detail::fmt9(f.stamp) << detail::pose_cells(f.prior->delta) << '\n';
    }
  }
  meta["scan_stamps"] = stamps;
  write_trajectory_csv(dir / "gt.csv", src.ground_truth());
  std::ofstream(dir / "meta.json") << meta.dump(2) << '\n';
}

/// Reads a dataset directory lazily, one frame per call.
class DiskSource final : public FrameSource {
 public:
  explicit DiskSource(std::filesystem::path dir) : dir_(std::move(dir)) {
    namespace fs = std::filesystem;
    std::ifstream in(dir_ / "meta.json");
    if (!in) throw DatasetError("missing meta.json in " + dir_.string());
    try {
      const auto meta = nlohmann::json::parse(in);
      period_ = meta.at("scan_period").get<double>();
      stamps_ = meta.at("scan_stamps").get<std::vector<double>>();
      for (const auto& l : meta.at("lidars")) {
        SensorSetup s;
        s.feed.id = l.at("id").get<std::string>();
        s.feed.timeout = l.value("timeout", 0.5);
        s.feed.extrinsic = detail::pose_from_json(l.at("extrinsic"));
        const auto& m = l.at("model");
        s.model.channels = m.at("channels").get<int>();
        s.model.horizontal_resolution = m.at("horizontal_resolution").get<double>();
        s.model.vertical_fov = m.at("vertical_fov").get<double>();
        s.model.min_range = m.value("min_range", 0.0);
        s.model.max_range = m.at("max_range").get<double>();
        s.model.scan_period = m.value("scan_period", period_);
        sensors_.push_back(s);
        dirs_.push_back(l.value("scan_dir", "scans"));
      }
    } catch (const nlohmann::json::exception& e) {
      throw DatasetError(std::string("meta.json: ") + e.what());
    }
    if (!(period_ > 0.0)) throw DatasetError("scan_period must be positive");
    if (sensors_.empty()) throw DatasetError("meta.json lists no lidars");
    for (std::size_t i = 1; i < stamps_.size(); ++i) {
      if (!(stamps_[i] > stamps_[i - 1])) throw DatasetError("scan stamps must increase");
    }
    for (const auto& r : detail::read_csv(dir_ / "imu.csv", 7)) {
      imu_.push_back({r[0], Vec3(r[1], r[2], r[3]), Vec3(r[4], r[5], r[6])});
    }
    if (fs::exists(dir_ / "prior.csv")) {
      for (const auto& s : read_trajectory_csv(dir_ / "prior.csv")) priors_.push_back(s);
    }
    if (fs::exists(dir_ / "gt.csv")) gt_ = read_trajectory_csv(dir_ / "gt.csv");
  }

  std::size_t size() const override { return stamps_.size(); }
  const std::vector<SensorSetup>& sensors() const override { return sensors_; }
  double scan_period() const override { return period_; }
  std::vector<sim::TrajectorySample> ground_truth() const override { return gt_; }

  Frame frame(std::size_t i) const override {
    if (i >= size()) throw std::out_of_range("frame index");
    Frame f;
    f.stamp = stamps_[i];
    char name[32];
    std::snprintf(name, sizeof name, "%06zu.bin", i);
    for (const auto& d : dirs_) f.clouds.push_back(read_scan_bin(dir_ / d / name));
    // stored float32 times drift by up to a few microseconds; pull them back
    // into the sweep so de-skew accepts them
    for (auto& c : f.clouds) {
      for (double& t : c.timestamps) t = std::clamp(t, f.stamp - period_, f.stamp);
    }
    const double margin = 2.0 * period_;
    for (const auto& m : imu_) {
      if (m.timestamp >= f.stamp - period_ - margin && m.timestamp <= f.stamp + margin) f.imu.push_back(m);
    }
    for (const auto& p : priors_) {
      if (std::abs(p.timestamp - f.stamp) < 1e-6) f.prior = ExternalPrior{p.pose, "dataset", f.stamp};
    }
    for (const auto& g : gt_) {
      if (std::abs(g.timestamp - f.stamp) < 1e-6) f.ground_truth = g.pose;
    }
    return f;
  }

 private:
  std::filesystem::path dir_;
  double period_ = 0.1;
  std::vector<double> stamps_;
  std::vector<SensorSetup> sensors_;
  std::vector<std::string> dirs_;
  std::vector<ImuSample> imu_;
  std::vector<sim::TrajectorySample> priors_;
  std::vector<sim::TrajectorySample> gt_;
};

}  // namespace loamkit::eval
