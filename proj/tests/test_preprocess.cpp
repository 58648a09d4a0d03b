#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <random>

#include "loamkit/preprocess.hpp"

namespace loamkit {
namespace {

PointCloud random_cloud(std::mt19937_64& rng, std::size_t n, double t0, double t1) {
  std::uniform_real_distribution<double> u(-10, 10);
  std::uniform_real_distribution<double> ut(t0, t1);
  PointCloud c;
  for (std::size_t i = 0; i < n; ++i) {
    c.points.emplace_back(u(rng), u(rng), u(rng));
    c.timestamps.push_back(ut(rng));
  }
  return c;
}

std::vector<ImuSample> constant_rate(const Vec3& w, double t0, double t1, double dt) {
  std::vector<ImuSample> imu;
  for (double t = t0 - dt; t <= t1 + dt; t += dt) imu.push_back({t, w, Vec3::Zero()});
  return imu;
}

TEST(Deskew, ZeroRateIsIdentity) {
  std::mt19937_64 rng(1);
  const PointCloud c = random_cloud(rng, 200, 10.0, 10.1);
  const PointCloud out = motion_deskew(c, constant_rate(Vec3::Zero(), 10.0, 10.1, 0.005), 10.0, 10.1);
  for (std::size_t i = 0; i < c.size(); ++i) EXPECT_EQ(out.points[i], c.points[i]);
}

TEST(Deskew, EmptyImuReturnsScan) {
  std::mt19937_64 rng(2);
  const PointCloud c = random_cloud(rng, 20, 0.0, 0.1);
  EXPECT_EQ(motion_deskew(c, {}, 0.0, 0.1).points, c.points);
}

TEST(Deskew, ConstantYawClosedForm) {
  const double w = 0.8;
  const double t0 = 5.0;
  const double t1 = 5.1;
  PointCloud c;
  c.points = {Vec3(3, 1, 0.5), Vec3(-2, 4, 1)};
  c.timestamps = {t0, t0 + 0.025};
  const PointCloud out =
      motion_deskew(c, constant_rate(Vec3(0, 0, w), t0, t1, 0.005), t0, t1);
  for (std::size_t i = 0; i < c.size(); ++i) {
    // rotation about z by -w (t_end - t_i)
    const double a = -w * (t1 - c.timestamps[i]);
    const Vec3 expected(std::cos(a) * c.points[i].x() - std::sin(a) * c.points[i].y(),
                        std::sin(a) * c.points[i].x() + std::cos(a) * c.points[i].y(),
                        c.points[i].z());
    EXPECT_LT((out.points[i] - expected).norm(), 1e-12);
  }
}

TEST(Deskew, PointsAtScanEndUnchanged) {
  PointCloud c;
  c.points = {Vec3(1, 2, 3), Vec3(-1, 0, 2)};
  c.timestamps = {1.0, 1.0};
  const PointCloud out = motion_deskew(c, constant_rate(Vec3(0.3, -0.2, 1.0), 0.9, 1.0, 0.01), 0.9, 1.0);
  for (std::size_t i = 0; i < c.size(); ++i) EXPECT_LT((out.points[i] - c.points[i]).norm(), 1e-12);
}

TEST(Deskew, RejectsTimestampsOutsideWindow) {
  PointCloud c;
  c.points = {Vec3(1, 2, 3)};
  c.timestamps = {2.0};
  EXPECT_THROW(motion_deskew(c, constant_rate(Vec3::UnitZ(), 0, 1, 0.1), 0.0, 1.0), InvalidInput);
}

TEST(Deskew, PiecewiseRatesCompose) {
  // rate 1 rad/s on [0, 0.05), 3 rad/s on [0.05, 0.1]: a point at t=0 sees
  // a total yaw of 0.05 + 0.15
  std::vector<ImuSample> imu{{0.0, Vec3(0, 0, 1), {}}, {0.05, Vec3(0, 0, 3), {}}};
  PointCloud c;
  c.points = {Vec3(1, 0, 0)};
  c.timestamps = {0.0};
  const PointCloud out = motion_deskew(c, imu, 0.0, 0.1);
  const double a = -0.2;
  EXPECT_LT((out.points[0] - Vec3(std::cos(a), std::sin(a), 0)).norm(), 1e-12);
}

LidarFeed feed(const std::string& id, double last, double timeout = 0.5,
               const Pose& extrinsic = Pose::identity()) {
  return LidarFeed{id, extrinsic, last, timeout};
}

TEST(Merge, SingleHealthyIdentity) {
  std::mt19937_64 rng(3);
  const PointCloud c = random_cloud(rng, 50, 0, 0.1);
  const PointCloud out = merge_clouds({{feed("a", 1.0), c}}, 1.1);
  EXPECT_EQ(out.points, c.points);
  EXPECT_EQ(out.timestamps, c.timestamps);
}

TEST(Merge, StaleFeedSkipped) {
  std::mt19937_64 rng(4);
  const PointCloud a = random_cloud(rng, 30, 0, 0.1);
  const PointCloud b = random_cloud(rng, 40, 0, 0.1);
  const Pose ext = Pose::from_translation(Vec3(0, 0, 1));
  // b's last message is 2x its timeout old
  const PointCloud out = merge_clouds({{feed("a", 10.0, 0.5, ext), a}, {feed("b", 9.0, 0.5), b}}, 10.0);
  ASSERT_EQ(out.size(), a.size());
  EXPECT_EQ(out.points[0], a.points[0] + Vec3(0, 0, 1));
}

TEST(Merge, SizesAdd) {
  std::mt19937_64 rng(5);
  std::vector<std::pair<LidarFeed, PointCloud>> frames;
  for (std::size_t n : {100u, 200u, 300u}) frames.push_back({feed("x", 0.0), random_cloud(rng, n, 0, 0.1)});
  EXPECT_EQ(merge_clouds(frames, 0.1).size(), 600u);
  std::swap(frames[0], frames[2]);
  EXPECT_EQ(merge_clouds(frames, 0.1).size(), 600u);
}

TEST(Merge, AllStaleGivesEmptyCloud) {
  std::mt19937_64 rng(6);
  const PointCloud out = merge_clouds({{feed("a", 0.0), random_cloud(rng, 10, 0, 0.1)}}, 5.0);
  EXPECT_TRUE(out.empty());
  EXPECT_THROW(merge_clouds({}, 0.0), InvalidInput);
}

TEST(BodyFilter, ClosedBox) {
  PointCloud c;
  c.points = {Vec3(0, 0, 0), Vec3(2, 0, 0), Vec3(1, 0, 0), Vec3(0, -3, 0), Vec3(1, 1, -1)};
  const PointCloud out = body_filter(c, Vec3(1, 1, 1));
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out.points[0], Vec3(2, 0, 0));
  EXPECT_EQ(out.points[1], Vec3(0, -3, 0));
  EXPECT_THROW(body_filter(c, Vec3(1, 0, 1)), InvalidInput);
}

TEST(Voxel, CentroidPerCell) {
  PointCloud c;
  c.points = {Vec3(0.1, 0.1, 0.1), Vec3(0.3, 0.1, 0.1), Vec3(1.5, 0, 0), Vec3(-0.2, 0, 0)};
  const PointCloud out = voxel_downsample(c, 1.0);
  ASSERT_EQ(out.size(), 3u);
  EXPECT_LT((out.points[0] - Vec3(0.2, 0.1, 0.1)).norm(), 1e-15);
  EXPECT_EQ(out.points[1], Vec3(1.5, 0, 0));
  EXPECT_EQ(out.points[2], Vec3(-0.2, 0, 0));
}

TEST(Voxel, AtMostOnePointPerCell) {
  std::mt19937_64 rng(7);
  const PointCloud c = random_cloud(rng, 5000, 0, 0.1);
  for (double leaf : {0.3, 1.0, 4.0}) {
    const PointCloud out = voxel_downsample(c, leaf);
    EXPECT_LE(out.size(), c.size());
    std::set<std::array<std::int64_t, 3>> cells;
    for (const auto& p : out.points) {
      cells.insert({std::int64_t(std::floor(p.x() / leaf)), std::int64_t(std::floor(p.y() / leaf)),
                    std::int64_t(std::floor(p.z() / leaf))});
    }
    EXPECT_EQ(cells.size(), out.size());
  }
}

TEST(Controller, DirectFormula) {
  AdaptiveVoxelState s;
  s.d_leaf = 0.25;
  s.n_desired = 1000;
  EXPECT_DOUBLE_EQ(next_leaf_size(s, 2000), 0.5);
}

TEST(Controller, FixedPointAndMonotonicity) {
  for (double alpha : {0.5, 1.0}) {
    for (double n_desired : {1000.0, 3000.0, 10000.0}) {
      AdaptiveVoxelState s;
      s.alpha = alpha;
      s.n_desired = n_desired;
      for (double d : {0.05, 0.25, 1.0}) {
        s.d_leaf = d;
        EXPECT_EQ(next_leaf_size(s, std::size_t(n_desired)), d);
        EXPECT_GT(next_leaf_size(s, std::size_t(n_desired) + 1), d);
        EXPECT_LT(next_leaf_size(s, std::size_t(n_desired) - 1), d);
      }
    }
  }
}

TEST(Controller, Clamps) {
  AdaptiveVoxelState s;
  s.n_desired = 1000;
  s.d_leaf = 1.5;
  EXPECT_EQ(next_leaf_size(s, 100000), s.d_max);
  s.d_leaf = 0.02;
  EXPECT_EQ(next_leaf_size(s, 1), s.d_min);
  s.d_leaf = 3.0;
  EXPECT_THROW(s.validate(), InvalidInput);
  s.d_leaf = 0.25;
  s.alpha = 0.0;
  EXPECT_THROW(s.validate(), InvalidInput);
}

TEST(Controller, EmptyCloudKeepsState) {
  AdaptiveVoxelState s;
  s.d_leaf = 0.4;
  const auto [out, next] = adaptive_voxel_filter(PointCloud{}, s);
  EXPECT_TRUE(out.empty());
  EXPECT_EQ(next.d_leaf, 0.4);
}

// Idealized surface model count = k / d^2. With alpha = 1 the law maps
// d -> k / (n d), a period-two orbit; alpha = 1/2 lands on sqrt(k / n) in a
// single step.
TEST(Controller, SurfaceModelOracle) {
  const double n = 3000;
  const double k0 = 3000 * 0.25 * 0.25;
  auto run = [&](double alpha, double k, double d, int frames) {
    std::vector<double> counts;
    for (int i = 0; i < frames; ++i) {
      const double count = k / (d * d);
      counts.push_back(count);
      d = d * std::pow(count / n, alpha);
    }
    return counts;
  };
  const auto damped = run(0.5, 4 * k0, 0.25, 4);
  EXPECT_NEAR(damped[0], 12000, 1e-6);
  EXPECT_NEAR(damped[1], 3000, 1e-6);
  const auto raw = run(1.0, 4 * k0, 0.25, 4);
  EXPECT_NEAR(raw[0], 12000, 1e-6);
  EXPECT_NEAR(raw[1], 750, 1e-6);
  EXPECT_NEAR(raw[2], 12000, 1e-6);
}

PointCloud planar_patch(double side, double spacing) {
  PointCloud c;
  const int n = static_cast<int>(std::round(side / spacing));
  for (int i = 0; i <= n; ++i) {
    for (int j = 0; j <= n; ++j) c.points.emplace_back(i * spacing + 0.003, j * spacing + 0.007, 0.5);
  }
  return c;
}

TEST(Controller, RegulatesPlanarStreamWithHalfExponent) {
  const PointCloud small = planar_patch(5.0, 0.02);
  const PointCloud large = planar_patch(10.0, 0.02);
  for (double n_desired : {1000.0, 3000.0, 10000.0}) {
    AdaptiveVoxelState s;
    s.n_desired = n_desired;
    s.alpha = 0.5;
    std::vector<const PointCloud*> stream;
    for (int i = 0; i < 8; ++i) stream.push_back(&small);
    for (int i = 0; i < 8; ++i) stream.push_back(&large);
    for (int i = 0; i < 8; ++i) stream.push_back(&small);
    int since_step = 0;
    for (std::size_t f = 0; f < stream.size(); ++f) {
      if (f > 0 && stream[f] != stream[f - 1]) since_step = 0;
      auto [out, next] = adaptive_voxel_filter(*stream[f], s);
      if (since_step >= 5) {
        EXPECT_NEAR(double(out.size()), n_desired, 0.2 * n_desired)
            << "n_desired " << n_desired << " frame " << f;
      }
      s = next;
      ++since_step;
    }
  }
}

}  // namespace
}  // namespace loamkit
