#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "actauth/kernels.hpp"

using namespace actauth;

namespace {

std::vector<Point2> random_points(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d;
  std::vector<Point2> out(n);
  for (auto& p : out) p = {d(rng), d(rng)};
  return out;
}

}  // namespace

TEST(Kernels, GramParallelEqualsSerial) {
  auto pts = random_points(300, 1);
  std::vector<double> a(pts.size() * pts.size()), b(a.size());
  kernels::rbf_gram_serial(pts, 0.7, a);
  kernels::rbf_gram_parallel(pts, 0.7, b);
  EXPECT_EQ(a, b);
  for (std::size_t i = 0; i < pts.size(); ++i) EXPECT_EQ(a[i * pts.size() + i], 1.0);
  EXPECT_NEAR(a[1], std::exp(-0.7 * squared_distance(pts[0], pts[1])), 1e-15);
}

TEST(Kernels, DecisionParallelEqualsSerial) {
  auto sv = random_points(200, 2);
  auto probes = random_points(1000, 3);
  std::vector<double> coef(sv.size());
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-1, 1);
  for (auto& c : coef) c = u(rng);
  std::vector<double> a(probes.size()), b(probes.size());
  kernels::decision_values_serial(sv, coef, 0.5, 0.1, probes, a);
  kernels::decision_values_parallel(sv, coef, 0.5, 0.1, probes, b);
  EXPECT_EQ(a, b);
  double direct = 0.1;
  for (std::size_t i = 0; i < sv.size(); ++i) direct += coef[i] * std::exp(-0.5 * squared_distance(sv[i], probes[0]));
  EXPECT_NEAR(a[0], direct, 1e-12);
}
