#include <random>

#include <gtest/gtest.h>

#include "mscale/tv1d.hpp"
#include "mscale/varsolve.hpp"
#include "oracles.hpp"

using namespace mscale;

TEST(Tv1d, IdentityAndConstant) {
  const std::vector<double> z{1.0, -2.0, 0.5};
  EXPECT_EQ(tv1d_denoise(z, 0.0), z);
  const std::vector<double> c(9, 2.5);
  for (double t : {0.1, 1.0, 100.0})
    for (double v : tv1d_denoise(c, t)) EXPECT_NEAR(v, 2.5, 1e-14);
  EXPECT_TRUE(tv1d_denoise(std::vector<double>{}, 1.0).empty());
  EXPECT_EQ(tv1d_denoise(std::vector<double>{4.0}, 3.0), std::vector<double>{4.0});
}

TEST(Tv1d, LargeWeightGivesMean) {
  const std::vector<double> z{1.0, 5.0, -3.0, 2.0};
  for (double v : tv1d_denoise(z, 1e6)) EXPECT_NEAR(v, 1.25, 1e-12);
}

TEST(Tv1d, StepShrinksByKnownAmount) {
  // each plateau of length L moves toward the other by t / L
  std::vector<double> z(8, 0.0);
  for (std::size_t i = 4; i < 8; ++i) z[i] = 1.0;
  const auto u = tv1d_denoise(z, 0.4);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(u[i], 0.1, 1e-15);
  for (std::size_t i = 4; i < 8; ++i) EXPECT_NEAR(u[i], 0.9, 1e-15);
}

TEST(Tv1d, MatchesDualProjectedGradient) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> tdist(0.0, 2.0);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 1 + trial % 10;
    const auto z = oracle::random_vector(rng, n);
    const double t = tdist(rng);
    const auto u = tv1d_denoise(z, t);
    const auto ref = oracle::tv_prox(z, t);
    for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(u[i], ref[i], 1e-10) << "trial " << trial;
  }
}

TEST(Tv1d, OptimalAgainstRandomCompetitors) {
  std::mt19937_64 rng(22);
  const auto z = oracle::random_vector(rng, 12);
  const double t = 0.7;
  const auto u = tv1d_denoise(z, t);
  auto obj = [&](const std::vector<double>& v) {
    double s = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) s += 0.5 * (v[i] - z[i]) * (v[i] - z[i]);
    return s + t * total_variation(v);
  };
  const double best = obj(u);
  for (int k = 0; k < 100; ++k) {
    auto w = u;
    const auto d = oracle::random_vector(rng, w.size(), 1e-3 * (1 + k % 10));
    for (std::size_t i = 0; i < w.size(); ++i) w[i] += d[i];
    EXPECT_GE(obj(w), best - 1e-14);
  }
}
