#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <vector>

#include "wmlab/stats/stats.hpp"

using namespace wmlab;
using namespace wmlab::stats;

namespace {

std::vector<double> normals(Rng& rng, std::size_t n, double mu = 0) {
  std::vector<double> v(n);
  for (auto& x : v) x = mu + rng.normal();
  return v;
}

// Mann-Whitney AUROC of positives vs sampled negatives (ties count half).
double rank_auroc(std::vector<double> pos, std::vector<double> neg) {
  std::sort(neg.begin(), neg.end());
  double s = 0;
  for (double z : pos) {
    auto lo = std::lower_bound(neg.begin(), neg.end(), z);
    auto hi = std::upper_bound(neg.begin(), neg.end(), z);
    s += static_cast<double>(lo - neg.begin()) + 0.5 * static_cast<double>(hi - lo);
  }
  return s / (static_cast<double>(pos.size()) * static_cast<double>(neg.size()));
}

}  // namespace

TEST(NormalCdf, KnownValues) {
  EXPECT_DOUBLE_EQ(normal_cdf(0.0), 0.5);
  EXPECT_NEAR(normal_cdf(1.6449), 0.95, 1e-4);
  // 1 - Phi(-8) from the erfc series tabulated value 6.22096e-16
  EXPECT_NEAR(normal_cdf(-8.0) / 6.220960574271785e-16, 1.0, 1e-9);
  EXPECT_THROW(normal_cdf(NAN), NonFinite);
  EXPECT_THROW(normal_cdf(INFINITY), NonFinite);
}

TEST(NormalCdf, Symmetry) {
  Rng rng(1);
  for (int i = 0; i < 10000; ++i) {
    double z = 8 * rng.normal();
    EXPECT_NEAR(normal_cdf(z) + normal_cdf(-z), 1.0, 1e-12);
  }
}

TEST(NormalQuantile, Values) {
  EXPECT_NEAR(normal_quantile(0.5), 0.0, 1e-14);
  EXPECT_NEAR(normal_quantile(0.95), 1.6448536269514722, 1e-12);
  EXPECT_NEAR(normal_quantile(0.99), 2.3263478740408408, 1e-12);
  EXPECT_NEAR(normal_quantile(1e-10), -6.361340902404056, 1e-9);
  for (double p : {1e-12, 0.01, 0.3, 0.7, 0.999}) EXPECT_NEAR(normal_cdf(normal_quantile(p)) / p, 1.0, 1e-10);
  EXPECT_THROW(normal_quantile(0.0), OutOfRange);
  EXPECT_THROW(normal_quantile(1.0), OutOfRange);
}

TEST(ChiSquare, SurvivalAndTest) {
  // chi2 sf at the 95% point of 1 and 3 degrees of freedom
  EXPECT_NEAR(chi_square_sf(3.841458820694124, 1), 0.05, 1e-10);
  EXPECT_NEAR(chi_square_sf(7.814727903251178, 3), 0.05, 1e-10);
  std::vector<double> obs{25, 25, 25, 25}, pr{0.25, 0.25, 0.25, 0.25};
  auto r = chi_square_test(obs, pr);
  EXPECT_DOUBLE_EQ(r.statistic, 0.0);
  EXPECT_DOUBLE_EQ(r.p, 1.0);
  EXPECT_EQ(r.dof, 3);
  std::vector<double> skew{10, 40};
  std::vector<double> half{0.5, 0.5};
  EXPECT_NEAR(chi_square_test(skew, half).statistic, 18.0, 1e-12);
}

TEST(Auroc, Examples) {
  std::vector<double> zeros(7, 0.0);
  EXPECT_DOUBLE_EQ(auroc_vs_null(zeros), 0.5);
  std::vector<double> one{1.6449};
  EXPECT_NEAR(auroc_vs_null(one), 0.95, 1e-4);
  EXPECT_THROW(auroc_vs_null(std::vector<double>{}), EmptyInput);
}

TEST(Auroc, MatchesRankOracle) {
  Rng rng(7);
  auto pos = normals(rng, 2000, 1.0);
  auto neg = normals(rng, 1000000);
  EXPECT_NEAR(auroc_vs_null(pos), rank_auroc(pos, neg), 0.003);
}

TEST(Auroc, MonotoneAndPermutationInvariant) {
  Rng rng(3);
  auto base = normals(rng, 50);
  auto a = base, b = base;
  a.push_back(2.0);
  b.push_back(-1.0);
  EXPECT_GE(auroc_vs_null(a), auroc_vs_null(b));
  auto c = base;
  std::shuffle(c.begin(), c.end(), std::mt19937(5));
  EXPECT_NEAR(auroc_vs_null(c), auroc_vs_null(base), 1e-14);
}

TEST(AndersonDarling, DegenerateRejectsEverywhere) {
  std::vector<double> z(5, 0.0);
  auto r = anderson_darling(z);
  for (bool b : r.reject) EXPECT_TRUE(b);
  EXPECT_THROW(anderson_darling(std::vector<double>(4, 0.0)), TooFewSamples);
  EXPECT_THROW(anderson_darling(std::vector<double>{0, 1, 2, 3, NAN}), NonFinite);
  EXPECT_THROW(r.rejects_at(0.2), OutOfRange);
}

TEST(AndersonDarling, HandComputed) {
  // A2 for {-1, 0, 1, 2, -0.5} evaluated independently in closed form
  std::vector<double> z{-1, 0, 1, 2, -0.5};
  std::vector<double> u;
  for (double x : {-1.0, -0.5, 0.0, 1.0, 2.0}) u.push_back(0.5 * std::erfc(-x / std::sqrt(2.0)));
  double s = 0;
  for (int i = 0; i < 5; ++i) s += (2 * i + 1) * (std::log(u[i]) + std::log(1 - u[4 - i]));
  EXPECT_NEAR(anderson_darling(z).a_squared, -5 - s / 5, 1e-12);
}

TEST(AndersonDarling, CalibrationAndPower) {
  Rng rng(11);
  int null_rejects = 0, alt_rejects = 0;
  for (int rep = 0; rep < 200; ++rep) {
    null_rejects += anderson_darling(normals(rng, 100)).rejects_at(0.05);
    alt_rejects += anderson_darling(normals(rng, 30, 2.0)).rejects_at(0.05);
  }
  EXPECT_NEAR(null_rejects / 200.0, 0.05, 0.03);
  EXPECT_GE(alt_rejects / 200.0, 0.95);
}

TEST(AndersonDarling, MonotoneInLevel) {
  Rng rng(2);
  for (int rep = 0; rep < 500; ++rep) {
    auto r = anderson_darling(normals(rng, 20, 0.4 * rng.normal()));
    for (std::size_t i = 1; i < r.reject.size(); ++i) {
      if (r.reject[i]) EXPECT_TRUE(r.reject[i - 1]);
    }
  }
}

TEST(Rates, EmpiricalAndWilson) {
  EXPECT_DOUBLE_EQ(empirical_rate({1, 1, 1, 1}).value, 1.0);
  EXPECT_DOUBLE_EQ(empirical_rate({1, 0}).value, 0.5);
  EXPECT_THROW(empirical_rate(std::span<const int>{}), EmptyInput);
  auto r = wilson(155, 158);
  EXPECT_NEAR(r.value, 0.9810, 5e-5);
  EXPECT_LT(r.lo, r.value);
  EXPECT_GT(r.hi, r.value);
  EXPECT_LE(r.hi, 1.0);
  // Wilson interval for 5/10 at z=1.96: 0.2366 .. 0.7634
  auto h = wilson(5, 10);
  EXPECT_NEAR(h.lo, 0.2366, 1e-4);
  EXPECT_NEAR(h.hi, 0.7634, 1e-4);
}

TEST(Moments, MeanVariance) {
  std::vector<double> x{1, 2, 3, 4};
  EXPECT_DOUBLE_EQ(mean(x), 2.5);
  EXPECT_NEAR(variance(x), 5.0 / 3.0, 1e-15);
  EXPECT_THROW(variance(std::vector<double>{1}), TooFewSamples);
}
