#pragma once

#include <filesystem>
#include <fstream>
#include <set>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

#include "loamkit/eval/dataset.hpp"
#include "loamkit/pipeline.hpp"

namespace loamkit::eval {

/// Malformed run configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class RunMode { kSimulate, kReplay };

struct RunConfig {
  RunMode mode = RunMode::kSimulate;
  std::filesystem::path output = "loamkit_out";
  SimOptions sim;
  std::filesystem::path dataset;
  PipelineConfig pipeline;
};

namespace detail {

using nlohmann::json;

inline void allow_keys(const json& j, const std::string& where, std::set<std::string> keys) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [k, v] : j.items()) {
    if (!keys.count(k)) throw ConfigError("unknown key " + where + "." + k);
  }
}

template <typename T>
void read(const json& j, const std::string& key, const std::string& where, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("bad value for " + where + "." + key);
  }
}

inline double deg(double d) { return d * M_PI / 180.0; }

inline PriorMode parse_prior(const std::string& s) {
  if (s == "none") return PriorMode::kNone;
  if (s == "truth") return PriorMode::kTruth;
  if (s == "noisy") return PriorMode::kNoisy;
  throw ConfigError("prior must be none, truth or noisy");
}

inline std::string prior_name(PriorMode m) {
  switch (m) {
    case PriorMode::kNone: return "none";
    case PriorMode::kTruth: return "truth";
    case PriorMode::kNoisy: return "noisy";
  }
  return "none";
}

}  // namespace detail

inline MapBackend parse_backend(const std::string& s) {
  if (s == "ikd") return MapBackend::kIkd;
  if (s == "mto") return MapBackend::kMto;
  throw ConfigError("map backend must be ikd or mto");
}

inline std::string backend_name(MapBackend b) { return b == MapBackend::kIkd ? "ikd" : "mto"; }

/// Fills `cfg` from the "pipeline" section. Missing keys keep their values.
inline void parse_pipeline(const nlohmann::json& j, PipelineConfig& cfg) {
  using detail::read;
  detail::allow_keys(j, "pipeline",
                     {"voxel", "gicp", "map", "normal_k", "deskew", "body_box",
                      "settle_initial_leaf", "compare_identity_seed"});
  read(j, "normal_k", "pipeline", cfg.normal_k);
  read(j, "deskew", "pipeline", cfg.deskew);
  read(j, "settle_initial_leaf", "pipeline", cfg.settle_initial_leaf);
  read(j, "compare_identity_seed", "pipeline", cfg.compare_identity_seed);
  if (j.contains("body_box")) {
    std::vector<double> b;
    read(j, "body_box", "pipeline", b);
    if (b.size() != 3) throw ConfigError("pipeline.body_box needs three half extents");
    cfg.body_box = Vec3(b[0], b[1], b[2]);
  }
  if (j.contains("voxel")) {
    const auto& v = j["voxel"];
    detail::allow_keys(v, "pipeline.voxel", {"initial_leaf", "n_desired", "d_min", "d_max", "alpha"});
    read(v, "initial_leaf", "pipeline.voxel", cfg.voxel.d_leaf);
    read(v, "n_desired", "pipeline.voxel", cfg.voxel.n_desired);
    read(v, "d_min", "pipeline.voxel", cfg.voxel.d_min);
    read(v, "d_max", "pipeline.voxel", cfg.voxel.d_max);
    read(v, "alpha", "pipeline.voxel", cfg.voxel.alpha);
  }
  if (j.contains("gicp")) {
    const auto& g = j["gicp"];
    detail::allow_keys(g, "pipeline.gicp",
                       {"epsilon", "max_corr_dist", "max_iterations", "step_tolerance",
                        "rot_fitness_threshold", "rotational_gate", "threads", "covariance"});
    read(g, "epsilon", "pipeline.gicp", cfg.gicp.epsilon);
    read(g, "max_corr_dist", "pipeline.gicp", cfg.gicp.max_corr_dist);
    read(g, "max_iterations", "pipeline.gicp", cfg.gicp.max_iterations);
    read(g, "step_tolerance", "pipeline.gicp", cfg.gicp.step_tolerance);
    read(g, "rot_fitness_threshold", "pipeline.gicp", cfg.gicp.rot_fitness_threshold);
    read(g, "rotational_gate", "pipeline.gicp", cfg.gicp.rotational_gate);
    read(g, "threads", "pipeline.gicp", cfg.gicp.num_threads);
    std::string cov;
    read(g, "covariance", "pipeline.gicp", cov);
    if (cov == "explicit_basis") {
      cfg.gicp.covariance = CovarianceForm::kExplicitBasis;
    } else if (cov == "closed_form") {
      cfg.gicp.covariance = CovarianceForm::kClosedForm;
    } else if (!cov.empty()) {
      throw ConfigError("pipeline.gicp.covariance must be closed_form or explicit_basis");
    }
  }
  if (j.contains("map")) {
    const auto& m = j["map"];
    detail::allow_keys(m, "pipeline.map", {"backend", "half_extent", "slide_margin", "unbounded", "octree_leaf"});
    std::string backend;
    read(m, "backend", "pipeline.map", backend);
    if (!backend.empty()) cfg.backend = parse_backend(backend);
    read(m, "half_extent", "pipeline.map", cfg.window.half_extent);
    read(m, "slide_margin", "pipeline.map", cfg.slide_margin);
    read(m, "unbounded", "pipeline.map", cfg.unbounded_map);
    read(m, "octree_leaf", "pipeline.map", cfg.octree_leaf);
  }
}

inline void parse_simulate(const nlohmann::json& j, SimOptions& o) {
  using detail::read;
  detail::allow_keys(j, "simulate",
                     {"preset", "frames", "speed", "seed", "prior", "prior_noise_t", "prior_noise_r",
                      "imu_rate", "lidar", "loop"});
  read(j, "preset", "simulate", o.preset);
  read(j, "frames", "simulate", o.frames);
  read(j, "speed", "simulate", o.speed);
  read(j, "seed", "simulate", o.seed);
  read(j, "imu_rate", "simulate", o.imu_rate);
  read(j, "prior_noise_t", "simulate", o.prior_noise_t);
  read(j, "prior_noise_r", "simulate", o.prior_noise_r);
  std::string prior;
  read(j, "prior", "simulate", prior);
  if (!prior.empty()) o.prior = detail::parse_prior(prior);
  if (j.contains("lidar")) {
    const auto& l = j["lidar"];
    detail::allow_keys(l, "simulate.lidar",
                       {"channels", "horizontal_resolution_deg", "vertical_fov_deg", "min_range",
                        "max_range", "scan_period", "range_noise"});
    read(l, "channels", "simulate.lidar", o.lidar.channels);
    double v = -1.0;
    read(l, "horizontal_resolution_deg", "simulate.lidar", v);
    if (v != -1.0) o.lidar.horizontal_resolution = detail::deg(v);
    v = -1.0;
    read(l, "vertical_fov_deg", "simulate.lidar", v);
    if (v != -1.0) o.lidar.vertical_fov = detail::deg(v);
    read(l, "min_range", "simulate.lidar", o.lidar.min_range);
    read(l, "max_range", "simulate.lidar", o.lidar.max_range);
    read(l, "scan_period", "simulate.lidar", o.lidar.scan_period);
    read(l, "range_noise", "simulate.lidar", o.lidar.range_noise);
  }
  if (j.contains("loop")) {
    const auto& l = j["loop"];
    detail::allow_keys(l, "simulate.loop", {"sx", "sy", "corner_radius"});
    read(l, "sx", "simulate.loop", o.loop.sx);
    read(l, "sy", "simulate.loop", o.loop.sy);
    read(l, "corner_radius", "simulate.loop", o.loop.corner_radius);
  }
}

/// Parses and validates a run configuration document.
inline RunConfig parse_config(const nlohmann::json& j) {
  detail::allow_keys(j, "config", {"mode", "output", "simulate", "replay", "pipeline"});
  RunConfig c;
  std::string mode = "simulate";
  detail::read(j, "mode", "config", mode);
  if (mode == "simulate") {
    c.mode = RunMode::kSimulate;
  } else if (mode == "replay") {
    c.mode = RunMode::kReplay;
  } else {
    throw ConfigError("mode must be simulate or replay");
  }
  std::string out;
  detail::read(j, "output", "config", out);
  if (!out.empty()) c.output = out;
  if (j.contains("simulate")) parse_simulate(j["simulate"], c.sim);
  if (j.contains("replay")) {
    detail::allow_keys(j["replay"], "replay", {"dataset"});
    std::string ds;
    detail::read(j["replay"], "dataset", "replay", ds);
    c.dataset = ds;
  }
  if (c.mode == RunMode::kReplay && c.dataset.empty()) {
    throw ConfigError("replay mode needs replay.dataset");
  }
  if (j.contains("pipeline")) parse_pipeline(j["pipeline"], c.pipeline);
  try {
    c.pipeline.validate();
    if (c.mode == RunMode::kSimulate) c.sim.validate();
  } catch (const InvalidInput& e) {
    throw ConfigError(e.what());
  }
  return c;
}

inline RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in, nullptr, true, true);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  return parse_config(j);
}

/// Echo of the settings that shape results; goes into the run summary.
inline nlohmann::json describe(const RunConfig& c) {
  nlohmann::json j;
  const auto& p = c.pipeline;
  j["mode"] = c.mode == RunMode::kSimulate ? "simulate" : "replay";
  if (c.mode == RunMode::kSimulate) {
    j["simulate"] = {{"preset", c.sim.preset},
                     {"frames", c.sim.frames},
                     {"speed", c.sim.speed},
                     {"seed", c.sim.seed},
                     {"prior", detail::prior_name(c.sim.prior)}};
  } else {
    j["replay"] = {{"dataset", c.dataset.string()}};
  }
  j["pipeline"] = {{"map_backend", backend_name(p.backend)},
                   {"window_half_extent", p.window.half_extent},
                   {"unbounded_map", p.unbounded_map},
                   {"n_desired", p.voxel.n_desired},
                   {"alpha", p.voxel.alpha},
                   {"max_iterations", p.gicp.max_iterations},
                   {"threads", p.gicp.num_threads},
                   {"deskew", p.deskew}};
  return j;
}

}  // namespace loamkit::eval
