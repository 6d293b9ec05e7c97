#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include <boost/math/special_functions/gamma.hpp>

#include "wmlab/core.hpp"

namespace wmlab::stats {

WMLAB_DEFINE_ERROR(NonFinite);
WMLAB_DEFINE_ERROR(TooFewSamples);
WMLAB_DEFINE_ERROR(OutOfRange);

/// Phi(z) = erfc(-z / sqrt 2) / 2. erfc keeps full relative precision in
/// the lower tail.
inline double normal_cdf(double z) {
  if (!std::isfinite(z)) throw NonFinite("normal_cdf argument must be finite");
  return 0.5 * std::erfc(-z * M_SQRT1_2);
}

inline double normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI); }

/// Phi^-1(p): Acklam's rational approximation (relative error 1.15e-9)
/// followed by one Halley step against normal_cdf.
inline double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw OutOfRange("normal_quantile needs p in (0,1)");
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                                 1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                                 6.680131188771972e+01,  -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                                 -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                                 3.754408661907416e+00};
  constexpr double lo = 0.02425, hi = 1 - lo;
  double x;
  if (p < lo) {
    double q = std::sqrt(-2 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
  } else if (p <= hi) {
    double q = p - 0.5, r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1);
  } else {
    double q = std::sqrt(-2 * std::log1p(-p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
  }
  double e = normal_cdf(x) - p;
  double u = e * std::sqrt(2 * M_PI) * std::exp(x * x / 2);
  return x - u / (1 + x * u / 2);
}

/// Upper tail of the chi-square distribution with k degrees of freedom.
inline double chi_square_sf(double x, double k) {
  if (!(k > 0) || !std::isfinite(x)) throw OutOfRange("chi_square_sf needs k > 0 and finite x");
  if (x <= 0) return 1.0;
  return boost::math::gamma_q(k / 2, x / 2);
}

/// Pearson statistic and upper-tail p-value for observed counts against
/// expected probabilities.
struct ChiSquareResult {
  double statistic = 0;
  double dof = 0;
  double p = 1;
};

inline ChiSquareResult chi_square_test(std::span<const double> observed, std::span<const double> probs) {
  if (observed.size() != probs.size() || observed.size() < 2) throw DimensionMismatch("chi-square needs matching bins");
  double n = 0;
  for (double o : observed) n += o;
  ChiSquareResult r;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    double e = n * probs[i];
    if (e <= 0) {
      if (observed[i] > 0) return {INFINITY, 0, 0};
      continue;
    }
    r.statistic += (observed[i] - e) * (observed[i] - e) / e;
    r.dof += 1;
  }
  r.dof -= 1;
  r.p = r.dof > 0 ? chi_square_sf(r.statistic, r.dof) : 1.0;
  return r;
}

/// AUROC of the samples against a continuous N(0,1) negative class:
/// P(Z_neg < z) averaged over the samples.
inline double auroc_vs_null(std::span<const double> zs) {
  if (zs.empty()) throw EmptyInput("auroc_vs_null needs at least one sample");
  double s = 0;
  for (double z : zs) s += normal_cdf(z);
  return s / static_cast<double>(zs.size());
}

/// Anderson-Darling significance levels and the case-0 (fully specified
/// null) critical values.
inline constexpr std::array<double, 5> kAdLevels = {0.15, 0.10, 0.05, 0.025, 0.01};
inline constexpr std::array<double, 5> kAdCritical = {1.610, 1.933, 2.492, 3.070, 3.857};
inline constexpr double kAdClamp = 1e-15;

struct AdResult {
  double a_squared = 0;
  std::array<bool, 5> reject{};  // aligned with kAdLevels

  bool rejects_at(double level) const {
    for (std::size_t i = 0; i < kAdLevels.size(); ++i) {
      if (std::abs(kAdLevels[i] - level) < 1e-12) return reject[i];
    }
    throw OutOfRange("unsupported Anderson-Darling level " + std::to_string(level));
  }
};

/// Anderson-Darling test of the sample against N(0,1). A sample whose
/// values are all equal gets A2 = +inf.
inline AdResult anderson_darling(std::span<const double> zs) {
  if (zs.size() < 5) throw TooFewSamples("anderson_darling needs n >= 5");
  std::vector<double> u(zs.begin(), zs.end());
  for (double z : u) {
    if (!std::isfinite(z)) throw NonFinite("anderson_darling sample must be finite");
  }
  std::sort(u.begin(), u.end());
  AdResult r;
  if (u.front() == u.back()) {
    // a fully tied sample has probability zero under a continuous null
    r.a_squared = INFINITY;
    r.reject.fill(true);
    return r;
  }
  for (double& z : u) z = std::clamp(normal_cdf(z), kAdClamp, 1 - kAdClamp);
  const std::size_t n = u.size();
  double s = 0;
  for (std::size_t i = 0; i < n; ++i) {
    s += static_cast<double>(2 * i + 1) * (std::log(u[i]) + std::log1p(-u[n - 1 - i]));
  }
  r.a_squared = -static_cast<double>(n) - s / static_cast<double>(n);
  for (std::size_t i = 0; i < kAdCritical.size(); ++i) r.reject[i] = r.a_squared > kAdCritical[i];
  return r;
}

/// Mean of a bit vector with its 95% Wilson score interval.
struct Rate {
  double value = 0;
  double lo = 0;
  double hi = 0;
  std::size_t n = 0;
  std::size_t successes = 0;
};

inline Rate wilson(std::size_t successes, std::size_t n, double z = 1.959963984540054) {
  if (n == 0) throw EmptyInput("rate needs at least one observation");
  const double nn = static_cast<double>(n), p = static_cast<double>(successes) / nn;
  const double denom = 1 + z * z / nn;
  const double centre = (p + z * z / (2 * nn)) / denom;
  const double half = z * std::sqrt(p * (1 - p) / nn + z * z / (4 * nn * nn)) / denom;
  return {p, std::max(0.0, centre - half), std::min(1.0, centre + half), n, successes};
}

inline Rate empirical_rate(std::span<const int> bits) {
  if (bits.empty()) throw EmptyInput("empirical_rate needs at least one bit");
  std::size_t k = 0;
  for (int b : bits) k += b != 0;
  return wilson(k, bits.size());
}

inline Rate empirical_rate(std::initializer_list<int> bits) {
  return empirical_rate(std::span<const int>(bits.begin(), bits.size()));
}

/// Normal-approximation half-width of a binomial proportion interval.
inline double binomial_half_width(double p, std::size_t n, double confidence = 0.99) {
  if (n == 0) throw EmptyInput("binomial_half_width needs n > 0");
  return normal_quantile(0.5 + confidence / 2) * std::sqrt(p * (1 - p) / static_cast<double>(n));
}

inline double mean(std::span<const double> xs) {
  if (xs.empty()) throw EmptyInput("mean of empty list");
  double s = 0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

inline double variance(std::span<const double> xs) {
  if (xs.size() < 2) throw TooFewSamples("variance needs n >= 2");
  double m = mean(xs), s = 0;
  for (double x : xs) s += (x - m) * (x - m);
  return s / static_cast<double>(xs.size() - 1);
}

}  // namespace wmlab::stats
