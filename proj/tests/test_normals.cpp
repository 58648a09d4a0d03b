#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "loamkit/normals.hpp"

namespace loamkit {
namespace {

PointCloud plane_z0(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> u(-5, 5);
  PointCloud c;
  for (std::size_t i = 0; i < n; ++i) c.points.emplace_back(u(rng), u(rng), 0.0);
  return c;
}

PointCloud unit_sphere(std::mt19937_64& rng, std::size_t n) {
  std::normal_distribution<double> g;
  PointCloud c;
  for (std::size_t i = 0; i < n; ++i) c.points.push_back(Vec3(g(rng), g(rng), g(rng)).normalized());
  return c;
}

TEST(Normals, PlaneZ) {
  std::mt19937_64 rng(1);
  const PointCloud out = estimate_normals(plane_z0(rng, 500), 10, Vec3(0, 0, 10));
  for (const auto& n : out.normals) EXPECT_LT((n - Vec3::UnitZ()).norm(), 1e-6);
}

TEST(Normals, PlaneXFacesOrigin) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-5, 5);
  PointCloud c;
  for (int i = 0; i < 500; ++i) c.points.emplace_back(5.0, u(rng), u(rng));
  const PointCloud out = estimate_normals(c, 10, Vec3::Zero());
  for (const auto& n : out.normals) EXPECT_LT((n + Vec3::UnitX()).norm(), 1e-6);
}

// Evenly spread samples; random sampling leaves lopsided neighborhoods.
PointCloud fibonacci_sphere(int n) {
  PointCloud c;
  const double golden = M_PI * (3.0 - std::sqrt(5.0));
  for (int i = 0; i < n; ++i) {
    const double z = 1.0 - (2.0 * i + 1.0) / n;
    const double r = std::sqrt(1.0 - z * z);
    c.points.emplace_back(r * std::cos(golden * i), r * std::sin(golden * i), z);
  }
  return c;
}

TEST(Normals, SphereInward) {
  const PointCloud out = estimate_normals(fibonacci_sphere(5000), 10, Vec3::Zero());
  for (std::size_t i = 0; i < out.size(); ++i) {
    ASSERT_TRUE(out.normal_valid(i));
    const double cosang = std::clamp(out.normals[i].dot(-out.points[i].normalized()), -1.0, 1.0);
    EXPECT_LT(std::acos(cosang) * 180.0 / M_PI, 2.0);
  }
}

TEST(Normals, UnitNormAndOrientation) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-3, 3);
  PointCloud c;
  for (int i = 0; i < 1000; ++i) c.points.emplace_back(u(rng), u(rng), 0.3 * std::sin(u(rng)));
  const Vec3 view(1, 2, 8);
  const PointCloud out = estimate_normals(c, 8, view);
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!out.normal_valid(i)) continue;
    EXPECT_NEAR(out.normals[i].norm(), 1.0, 1e-9);
    EXPECT_GE(out.normals[i].dot(view - out.points[i]), 0.0);
  }
}

TEST(Normals, RotationEquivariant) {
  std::mt19937_64 rng(5);
  const PointCloud c = unit_sphere(rng, 1500);
  const Pose rot = Pose::from_axis_angle(Vec3(0.3, -1, 0.4), 1.1);
  const Vec3 view(0.1, 0.05, -0.02);
  const PointCloud a = estimate_normals(c, 10, view);
  const PointCloud b = estimate_normals(se3_apply(rot, c), 10, rot * view);
  for (std::size_t i = 0; i < c.size(); ++i) {
    EXPECT_LT((b.normals[i] - rot.rotation * a.normals[i]).norm(), 1e-6);
  }
}

TEST(Normals, CollinearNeighborhoodFlagged) {
  PointCloud c;
  for (int i = 0; i < 30; ++i) c.points.emplace_back(0.1 * i, 0.2 * i, -0.1 * i);
  const PointCloud out = estimate_normals(c, 5, Vec3(0, 0, 10));
  EXPECT_EQ(out.valid_normal_count(), 0u);
}

TEST(Normals, CoincidentPointsFlagged) {
  PointCloud c;
  for (int i = 0; i < 10; ++i) c.points.emplace_back(1, 1, 1);
  EXPECT_EQ(estimate_normals(c, 4, Vec3::Zero()).valid_normal_count(), 0u);
}

TEST(Normals, RejectsTooFewPoints) {
  std::mt19937_64 rng(6);
  EXPECT_THROW(estimate_normals(plane_z0(rng, 10), 10, Vec3::Zero()), InvalidInput);
  EXPECT_THROW(estimate_normals(plane_z0(rng, 10), 2, Vec3::Zero()), InvalidInput);
}

TEST(Normals, ThreadCountDoesNotChangeResult) {
  std::mt19937_64 rng(7);
  const PointCloud c = unit_sphere(rng, 2000);
  const PointCloud one = estimate_normals(c, 10, Vec3::Zero(), 1);
  for (std::size_t t : {2u, 3u, 7u}) EXPECT_EQ(estimate_normals(c, 10, Vec3::Zero(), t).normals, one.normals);
}

}  // namespace
}  // namespace loamkit
