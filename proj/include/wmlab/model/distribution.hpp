#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "wmlab/core.hpp"
#include "wmlab/lang/vocabulary.hpp"

namespace wmlab::model {

using lang::TokenId;

/// Categorical distribution over a finite support of token ids.
struct Categorical {
  std::vector<TokenId> tokens;
  std::vector<double> weights;

  std::size_t size() const noexcept { return tokens.size(); }
  bool is_point_mass() const noexcept { return tokens.size() == 1; }

  double probability(TokenId t) const noexcept {
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      if (tokens[i] == t) return weights[i];
    }
    return 0.0;
  }

  static Categorical point(TokenId t) { return {{t}, {1.0}}; }
};

inline constexpr double kDistributionTolerance = 1e-12;

inline void check_distribution(const Categorical& d) {
  if (d.tokens.empty() || d.tokens.size() != d.weights.size()) {
    throw NotADistribution("support must be non-empty and match weight count");
  }
  double s = 0;
  for (double w : d.weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw NotADistribution("weights must be finite and non-negative");
    s += w;
  }
  if (std::abs(s - 1.0) > kDistributionTolerance * static_cast<double>(d.weights.size() + 1)) {
    throw NotADistribution("weights sum to " + std::to_string(s));
  }
}

/// Shannon entropy in nats, with 0 ln 0 = 0.
inline double entropy(const Categorical& d) {
  check_distribution(d);
  double h = 0;
  for (double w : d.weights) {
    if (w > 0) h -= w * std::log(w);
  }
  return h;
}

/// Inverse-CDF draw.
inline TokenId sample(const Categorical& d, Rng& rng) {
  if (d.is_point_mass()) return d.tokens.front();
  double u = rng.uniform();
  double acc = 0;
  for (std::size_t i = 0; i < d.tokens.size(); ++i) {
    acc += d.weights[i];
    if (u < acc) return d.tokens[i];
  }
  for (std::size_t i = d.tokens.size(); i-- > 0;) {
    if (d.weights[i] > 0) return d.tokens[i];
  }
  return d.tokens.back();
}

}  // namespace wmlab::model
