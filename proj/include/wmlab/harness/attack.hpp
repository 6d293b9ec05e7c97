#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <unordered_map>
#include <vector>

#include "wmlab/chain/chain.hpp"
#include "wmlab/rules/rules.hpp"

namespace wmlab::harness {

/// Walk length chosen for one sample.
struct AttackLength {
  std::int64_t t = 0;
  bool exact = true;  // false: surrogate estimate, not an enumerated t_c
};

/// Fixed-hash of a token sequence; stable across platforms and runs.
inline std::uint64_t token_hash(const lang::TokenSeq& t) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (auto x : t) h = mix64(h ^ (static_cast<std::uint64_t>(x) + kGolden));
  return h;
}

inline std::uint64_t string_hash(const std::string& s) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : s) h = (h ^ c) * 0x100000001B3ULL;
  return mix64(h);
}

inline constexpr double kSurrogateRatio = 0.75;
inline constexpr double kSurrogateMultiple = 4.0;
inline constexpr std::size_t kSurrogateSamples = 4000;

/// Expected degree under the degree-proportional stationary law,
/// E_pi[d] = E_u[d^2] / E_u[d], with u uniform over the class (each slot
/// uniform over empty + pool, names a uniform injective assignment).
inline double stationary_mean_degree(const lang::Program& p, const rules::RuleSet& rs, std::uint64_t seed,
                                     std::size_t samples = kSurrogateSamples) {
  const auto base = rules::normalize_state(p.receptor_state());
  const auto& pl = rs.pools();
  const bool comments = rs.has(rules::RuleKind::AddComment) && rs.has(rules::RuleKind::DelComment);
  const bool dead = rs.has(rules::RuleKind::AddDead) && rs.has(rules::RuleKind::DelDead);
  const bool names = rs.has(rules::RuleKind::RenameVar) && static_cast<int>(base.names.size()) < pl.identifiers;
  Rng rng(seed);
  double s1 = 0, s2 = 0;
  std::vector<int> perm(static_cast<std::size_t>(pl.identifiers));
  for (std::size_t k = 0; k < samples; ++k) {
    auto s = base;
    if (comments) {
      for (auto& c : s.comments) c = static_cast<int>(rng.below(static_cast<std::uint64_t>(pl.words) + 1)) - 1;
    }
    if (dead) {
      for (auto& d : s.dead) d = static_cast<int>(rng.below(static_cast<std::uint64_t>(pl.snippets) + 1)) - 1;
    }
    if (names) {
      for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = static_cast<int>(i);
      for (std::size_t i = 0; i < s.names.size(); ++i) {
        auto j = i + rng.below(perm.size() - i);
        std::swap(perm[i], perm[j]);
        s.names[i] = perm[i];
      }
    }
    const double d = static_cast<double>(rules::total_actions(rs, s));
    s1 += d;
    s2 += d * d;
  }
  return s2 / s1;
}

/// Walk length for spaces too large to enumerate:
/// ceil(4 * 0.75 * E_pi[d] * ln(R / epsilon)), R = receptor count.
inline std::int64_t surrogate_length(const lang::Program& p, const rules::RuleSet& rs, double epsilon,
                                     std::uint64_t seed) {
  const auto r = static_cast<double>(p.receptor_state().receptor_count());
  if (r == 0 || rules::class_size(p, rs) <= 1) return 0;
  const double ed = stationary_mean_degree(p, rs, seed);
  return static_cast<std::int64_t>(std::ceil(kSurrogateMultiple * kSurrogateRatio * ed * std::log(r / epsilon)));
}

/// Caches enumerated spaces and per-start TV traces so that every sample
/// of a corpus gets its exact t_c(epsilon) when the space fits under the
/// cap, and the surrogate otherwise. Safe to share between threads.
class SpaceCache {
 public:
  SpaceCache(rules::RuleSet rs, std::size_t cap) : rs_(std::move(rs)), cap_(cap) {}

  const rules::RuleSet& rule_set() const noexcept { return rs_; }

  AttackLength length(const lang::Program& p, double epsilon) {
    const auto canonical = rules::normalize(p);
    const auto key = token_hash(canonical.tokens());
    std::lock_guard lock(mu_);
    if (rules::class_size(p, rs_) > cap_) {
      auto& cached = surrogate_[{key, epsilon}];
      if (cached == 0) cached = surrogate_length(canonical, rs_, epsilon, derive_seed(key, 0x5u)) + 1;
      return {cached - 1, false};
    }
    Space& sp = space_for(p, key);
    const auto start = sp.graph.index.at(p.receptor_state());
    auto& trace = sp.traces[start];
    if (trace.empty() || trace.back() > epsilon) {
      trace = chain::mixing_time(sp.P, start, sp.pi, epsilon).tv_trace;
    }
    std::int64_t t = 0;
    while (trace[static_cast<std::size_t>(t)] > epsilon) ++t;
    return {t, true};
  }

  /// Largest exact t_c(epsilon) over every start of the sample's space.
  std::int64_t max_exact(const lang::Program& p, double epsilon) {
    const auto key = token_hash(rules::normalize(p).tokens());
    std::lock_guard lock(mu_);
    Space& sp = space_for(p, key);
    std::int64_t best = 0;
    for (std::size_t i = 0; i < sp.graph.size(); ++i) {
      best = std::max(best, chain::mixing_time(sp.P, i, sp.pi, epsilon).t_mix);
    }
    return best;
  }

  std::size_t spaces() const {
    std::lock_guard lock(mu_);
    std::size_t n = 0;
    for (const auto& [k, v] : exact_) n += v.size();
    return n;
  }

 private:
  struct Space {
    chain::Graph graph;
    chain::TransitionMatrix P;
    chain::Distribution pi;
    std::unordered_map<std::size_t, std::vector<double>> traces;
  };

  Space& space_for(const lang::Program& p, std::uint64_t key) {
    auto& bucket = exact_[key];
    const auto state = p.receptor_state();
    for (auto& sp : bucket) {
      if (sp->graph.skeleton.size() == p.skeleton().size() && sp->graph.index.count(state) &&
          sp->graph.token_count == p.size()) {
        return *sp;
      }
    }
    auto sp = std::make_unique<Space>();
    sp->graph = chain::enumerate_space(p, rs_, cap_);
    sp->P = chain::transition_matrix(sp->graph);
    sp->pi = chain::stationary(sp->P);
    bucket.push_back(std::move(sp));
    return *bucket.back();
  }

  rules::RuleSet rs_;
  std::size_t cap_;
  mutable std::mutex mu_;
  std::map<std::uint64_t, std::vector<std::unique_ptr<Space>>> exact_;
  std::map<std::pair<std::uint64_t, double>, std::int64_t> surrogate_;
};

}  // namespace wmlab::harness
