#pragma once

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <limits>
#include <optional>
#include <string_view>
#include <thread>
#include <vector>

#include "loamkit/geometry.hpp"
#include "loamkit/spatial/static_kdtree.hpp"

namespace loamkit {

/// How the per-point surface covariance is assembled from a stored normal.
enum class CovarianceForm {
  kClosedForm,     // I + (eps - 1) n n^T
  kExplicitBasis,  // eps n n^T + u2 u2^T + u3 u3^T
};

struct GicpConfig {
  double epsilon = 1e-3;
  double max_corr_dist = 0.3;
  int max_iterations = 20;
  /// Stop once the squared norm of the SE(3) update falls below this.
  double step_tolerance = 1e-10;
  /// Largest accepted rotation (radians) between seed and result.
  double rot_fitness_threshold = 0.005;
  bool rotational_gate = true;
  std::size_t num_threads = 1;
  std::size_t min_source_points = 20;
  CovarianceForm covariance = CovarianceForm::kClosedForm;

  void validate() const {
    check_epsilon(epsilon);
    if (!(max_corr_dist > 0.0)) throw InvalidInput("max_corr_dist must be positive");
    if (max_iterations < 1) throw InvalidInput("max_iterations must be at least 1");
    if (!(step_tolerance > 0.0)) throw InvalidInput("step_tolerance must be positive");
    if (!(rot_fitness_threshold > 0.0)) {
      throw InvalidInput("rot_fitness_threshold must be positive");
    }
    if (num_threads < 1) throw InvalidInput("num_threads must be at least 1");
  }
};

/// Nearest target point with its stored normal.
struct TargetPoint {
  Vec3 point;
  Vec3 normal;
  std::uint64_t id = 0;
  double squared_distance = 0.0;
};

/// Anything that answers single nearest-neighbor queries over points that
/// carry valid normals.
template <typename T>
concept RegistrationTarget = requires(const T& t, const Vec3& q) {
  { t.nearest(q) } -> std::same_as<std::optional<TargetPoint>>;
  { t.empty() } -> std::convertible_to<bool>;
};

/// Registration target over a single cloud. Points with invalid normals are
/// left out of the index.
class CloudTarget {
 public:
  explicit CloudTarget(const PointCloud& cloud) {
    if (!cloud.empty() && !cloud.has_normals()) {
      throw InvalidInput("registration target needs normals");
    }
    std::vector<Vec3> pts;
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      if (!cloud.normal_valid(i)) continue;
      pts.push_back(cloud.points[i]);
      normals_.push_back(cloud.normals[i]);
      source_index_.push_back(i);
    }
    tree_.build(pts);
  }

  std::optional<TargetPoint> nearest(const Vec3& q) const {
    const auto r = tree_.knn(q, 1);
    if (r.empty()) return std::nullopt;
    const auto& n = r.front();
    return TargetPoint{n.point, normals_[n.id], source_index_[n.id], n.squared_distance};
  }

  bool empty() const { return tree_.empty(); }
  std::size_t size() const { return tree_.size(); }

 private:
  spatial::StaticKdTree tree_;
  std::vector<Vec3> normals_;
  std::vector<std::uint64_t> source_index_;
};

struct Correspondence {
  std::size_t source = 0;
  std::uint64_t target = 0;
  Vec3 target_point;
  Vec3 target_normal;
  double squared_distance = 0.0;
};

enum class RegistrationFailure {
  kNone,
  kTooFewSourcePoints,
  kEmptyTarget,
  kTooFewCorrespondences,
  kNonFiniteCost,
};

inline std::string_view to_string(RegistrationFailure f) {
  switch (f) {
    case RegistrationFailure::kNone: return "none";
    case RegistrationFailure::kTooFewSourcePoints: return "too_few_source_points";
    case RegistrationFailure::kEmptyTarget: return "empty_target";
    case RegistrationFailure::kTooFewCorrespondences: return "too_few_correspondences";
    case RegistrationFailure::kNonFiniteCost: return "non_finite_cost";
  }
  return "unknown";
}

/// One Gauss-Newton iteration as seen by the solver.
struct IterationRecord {
  std::size_t correspondences = 0;
  double cost_before = 0.0;  // mean pair cost at the start of the iteration
  double cost_after = 0.0;   // mean pair cost after the accepted step
  double step_squared_norm = 0.0;
  double lambda = 0.0;
  bool accepted = false;
};

struct RegistrationResult {
  Pose pose;  // source -> target
  bool converged = false;
  int iterations = 0;
  double final_cost = std::numeric_limits<double>::infinity();
  /// Mean squared inlier correspondence distance at `pose` (m^2).
  double fitness = std::numeric_limits<double>::infinity();
  /// Rotation between seed and result (radians).
  double rotation_change = 0.0;
  std::size_t correspondences = 0;
  RegistrationFailure failure = RegistrationFailure::kNone;
  std::vector<IterationRecord> trace;

  bool ok() const { return failure == RegistrationFailure::kNone; }
};

/// Cost, gradient, and Gauss-Newton Hessian of one pair under a left
/// perturbation exp(delta) * pose with delta = (omega, v).
struct PairTerms {
  double cost = 0.0;
  Vec6 gradient{Vec6::Zero()};
  Mat6 hessian{Mat6::Zero()};
};

inline Mat3 surface_covariance(const Vec3& n, double eps, CovarianceForm form) {
  return form == CovarianceForm::kClosedForm ? detail::plane_covariance(n, eps)
                                             : detail::plane_covariance_from_basis(n, eps);
}

/// d^T M^-1 d with d = b - T a and M = C_b + R C_a R^T.
inline double pair_cost(const Pose& pose, const Vec3& a, const Mat3& cov_a, const Vec3& b,
                        const Mat3& cov_b) {
  const Vec3 d = b - pose * a;
  const Mat3 m = cov_b + pose.rotation * cov_a * pose.rotation.transpose();
  return d.dot(m.inverse() * d);
}

/// Exact gradient of pair_cost, including the rotation dependence of M.
/// The Hessian is the Gauss-Newton term 2 J^T M^-1 J.
inline PairTerms pair_terms(const Pose& pose, const Vec3& a, const Mat3& cov_a,
                            const Vec3& b, const Mat3& cov_b) {
  const Vec3 p = pose * a;
  const Vec3 d = b - p;
  const Mat3 s = pose.rotation * cov_a * pose.rotation.transpose();
  const Mat3 w = (cov_b + s).inverse();
  const Vec3 y = w * d;
  PairTerms t;
  t.cost = d.dot(y);
  t.gradient.head<3>() = 2.0 * y.cross(p + s * y);
  t.gradient.tail<3>() = -2.0 * y;
  Eigen::Matrix<double, 3, 6> j;
  j.leftCols<3>() = hat(p);
  j.rightCols<3>() = -Mat3::Identity();
  t.hessian = 2.0 * j.transpose() * w * j;
  return t;
}

namespace detail {

template <typename F>
inline void parallel_chunks(std::size_t n, std::size_t threads, F&& f) {
  threads = std::max<std::size_t>(1, std::min(threads, n));
  if (threads <= 1) {
    f(0, 0, n);
    return;
  }
  const std::size_t chunk = (n + threads - 1) / threads;
  std::vector<std::thread> pool;
  for (std::size_t c = 0; c < threads; ++c) {
    const std::size_t lo = c * chunk;
    const std::size_t hi = std::min(n, lo + chunk);
    if (lo < hi) pool.emplace_back([&f, c, lo, hi] { f(c, lo, hi); });
  }
  for (auto& t : pool) t.join();
}

struct SourcePoint {
  std::size_t index;
  Vec3 point;
  Mat3 cov;
};

template <RegistrationTarget Target>
std::vector<Correspondence> associate(const std::vector<SourcePoint>& source,
                                      const Target& target, const Pose& pose,
                                      double max_sq, std::size_t threads) {
  std::vector<std::vector<Correspondence>> parts(std::max<std::size_t>(1, threads));
  parallel_chunks(source.size(), threads, [&](std::size_t c, std::size_t lo, std::size_t hi) {
    auto& out = parts[c];
    for (std::size_t i = lo; i < hi; ++i) {
      const auto nn = target.nearest(pose * source[i].point);
      if (!nn || nn->squared_distance > max_sq) continue;
      out.push_back({i, nn->id, nn->point, nn->normal, nn->squared_distance});
    }
  });
  std::vector<Correspondence> all;
  for (auto& p : parts) all.insert(all.end(), p.begin(), p.end());
  return all;
}

struct Linearization {
  double cost = 0.0;  // mean over pairs
  Mat6 hessian{Mat6::Zero()};
  Vec6 gradient{Vec6::Zero()};
};

inline Linearization linearize(const std::vector<SourcePoint>& source,
                               const std::vector<Correspondence>& corr,
                               const std::vector<Mat3>& target_cov, const Pose& pose,
                               std::size_t threads, bool with_derivatives) {
  std::vector<Linearization> parts(std::max<std::size_t>(1, threads));
  parallel_chunks(corr.size(), threads, [&](std::size_t c, std::size_t lo, std::size_t hi) {
    auto& acc = parts[c];
    for (std::size_t i = lo; i < hi; ++i) {
      const auto& sp = source[corr[i].source];
      if (with_derivatives) {
        const PairTerms t =
            pair_terms(pose, sp.point, sp.cov, corr[i].target_point, target_cov[i]);
        acc.cost += t.cost;
        acc.hessian += t.hessian;
        acc.gradient += t.gradient;
      } else {
        acc.cost += pair_cost(pose, sp.point, sp.cov, corr[i].target_point, target_cov[i]);
      }
    }
  });
  Linearization total;
  for (const auto& part : parts) {
    total.cost += part.cost;
    total.hessian += part.hessian;
    total.gradient += part.gradient;
  }
  const double inv = corr.empty() ? 0.0 : 1.0 / static_cast<double>(corr.size());
  total.cost *= inv;
  total.hessian *= inv;
  total.gradient *= inv;
  return total;
}

}  // namespace detail

/// Plane-to-plane GICP. Each iteration re-associates every source point to
/// its nearest target point within max_corr_dist, then takes one damped
/// Gauss-Newton step on SE(3) (left update). Damping starts at 1e-6 and
/// grows tenfold whenever a step would raise the cost, so every accepted
/// step is non-increasing for the iteration's correspondence set.
template <RegistrationTarget Target>
RegistrationResult gicp_align(const PointCloud& source, const Target& target,
                              const Pose& seed, const GicpConfig& cfg) {
  cfg.validate();
  RegistrationResult result;
  result.pose = seed;

  std::vector<detail::SourcePoint> src;
  if (source.has_normals()) {
    src.reserve(source.size());
    for (std::size_t i = 0; i < source.size(); ++i) {
      if (!source.normal_valid(i)) continue;
      src.push_back({i, source.points[i],
                     surface_covariance(source.normals[i], cfg.epsilon, cfg.covariance)});
    }
  }
  if (src.size() < cfg.min_source_points) {
    result.failure = RegistrationFailure::kTooFewSourcePoints;
    return result;
  }
  if (target.empty()) {
    result.failure = RegistrationFailure::kEmptyTarget;
    return result;
  }

  constexpr std::size_t kMinCorrespondences = 6;
  constexpr double kLambdaStart = 1e-6;
  constexpr int kMaxDampingRetries = 12;
  const double max_sq = cfg.max_corr_dist * cfg.max_corr_dist;
  Pose pose = seed;
  double lambda = kLambdaStart;

  for (int iter = 0; iter < cfg.max_iterations; ++iter) {
    const auto corr = detail::associate(src, target, pose, max_sq, cfg.num_threads);
    if (corr.size() < kMinCorrespondences) {
      result.failure = RegistrationFailure::kTooFewCorrespondences;
      break;
    }
    std::vector<Mat3> target_cov;
    target_cov.reserve(corr.size());
    for (const auto& c : corr) {
      target_cov.push_back(surface_covariance(c.target_normal, cfg.epsilon, cfg.covariance));
    }
    const auto lin = detail::linearize(src, corr, target_cov, pose, cfg.num_threads, true);
    if (!std::isfinite(lin.cost) || !lin.gradient.allFinite()) {
      result.failure = RegistrationFailure::kNonFiniteCost;
      break;
    }

    IterationRecord rec;
    rec.correspondences = corr.size();
    rec.cost_before = lin.cost;
    rec.cost_after = lin.cost;
    Vec6 step = Vec6::Zero();
    Pose candidate = pose;
    for (int attempt = 0; attempt < kMaxDampingRetries; ++attempt) {
      const Mat6 damped = lin.hessian + lambda * Mat6::Identity();
      // gradient and hessian both carry the factor 2 of d^T W d
      step = damped.ldlt().solve(-lin.gradient);
      if (!step.allFinite()) {
        lambda *= 10.0;
        continue;
      }
      candidate = se3_exp(step) * pose;
      const double cost =
          detail::linearize(src, corr, target_cov, candidate, cfg.num_threads, false).cost;
      if (std::isfinite(cost) && cost <= lin.cost) {
        rec.accepted = true;
        rec.cost_after = cost;
        break;
      }
      lambda *= 10.0;
    }
    rec.lambda = lambda;
    rec.step_squared_norm = rec.accepted ? step.squaredNorm() : 0.0;
    result.trace.push_back(rec);
    result.iterations = iter + 1;
    result.correspondences = corr.size();
    result.final_cost = rec.cost_after;
    if (!rec.accepted) {
      // no descent direction left at this damping: stationary point
      result.converged = true;
      break;
    }
    pose = candidate;
    lambda = std::max(kLambdaStart, lambda * 0.1);
    if (rec.step_squared_norm < cfg.step_tolerance) {
      result.converged = true;
      break;
    }
  }

  result.pose = pose;
  result.rotation_change = rotation_distance(seed, pose);
  if (result.ok()) {
    const auto corr = detail::associate(src, target, pose, max_sq, cfg.num_threads);
    double sum = 0.0;
    for (const auto& c : corr) sum += c.squared_distance;
    result.fitness = corr.empty() ? std::numeric_limits<double>::infinity()
                                  : sum / static_cast<double>(corr.size());
  } else {
    result.converged = false;
  }
  return result;
}

/// Accepts a scan-to-submap correction whose rotation away from its seed
/// stays within the threshold (radians). Always accepts when the gate is off.
inline bool rotational_gate(const RegistrationResult& result, const GicpConfig& cfg) {
  if (!cfg.rotational_gate) return true;
  return result.rotation_change <= cfg.rot_fitness_threshold;
}

struct Fitness {
  double value = std::numeric_limits<double>::infinity();
  std::size_t inliers = 0;
  bool valid = false;
};

/// Mean squared distance over source points whose nearest target point lies
/// within max_corr_dist after applying `pose`. No inliers gives +inf, invalid.
template <RegistrationTarget Target>
Fitness fitness(const PointCloud& source, const Target& target, const Pose& pose,
                const GicpConfig& cfg) {
  Fitness f;
  if (target.empty()) return f;
  const double max_sq = cfg.max_corr_dist * cfg.max_corr_dist;
  double sum = 0.0;
  for (const auto& p : source.points) {
    const auto nn = target.nearest(pose * p);
    if (!nn || nn->squared_distance > max_sq) continue;
    sum += nn->squared_distance;
    ++f.inliers;
  }
  if (f.inliers > 0) {
    f.value = sum / static_cast<double>(f.inliers);
    f.valid = true;
  }
  return f;
}

}  // namespace loamkit
