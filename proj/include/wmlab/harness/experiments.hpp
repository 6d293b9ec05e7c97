#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "wmlab/harness/pipeline.hpp"

namespace wmlab::harness {

inline constexpr std::uint64_t kNullStream = 0x4E55;
inline constexpr std::uint64_t kWmStream = 0x574D;
inline constexpr std::uint64_t kSpaceStream = 0x5350;

// ---------------------------------------------------------------------------
// Impossibility

struct StageRate {
  std::string label;
  double epsilon = 0;  // 0 for the unattacked stage
  std::int64_t t_min = 0, t_max = 0;
  double t_mean = 0;
  bool exact = true;
  stats::Rate detect;
};

struct SpaceRate {
  std::string space;  // canonical form
  double r = 0;       // share of watermarked samples in the space
  std::size_t n = 0;
  double detect_after = 0;
};

struct ImpossibilityReport {
  std::string scheme;
  double epsilon_pos = 0;  // target
  double threshold = 0;
  double null_rate = 0;  // realized on the calibration corpus
  double epsilon = 0;
  std::size_t trials = 0, null_trials = 0;
  std::vector<StageRate> stages;  // t = 0, t_c(0.1), t_c(epsilon)
  double detect_after = 0;
  double fnr_after = 0;
  double ci = 0;  // 99% binomial half-width at epsilon_pos
  double target_main = 0;   // 1 - epsilon_pos
  double target_lower = 0;  // 1 - epsilon - epsilon_pos
  bool lower_ok = false;    // FNR >= 1 - eps - eps_pos - CI
  bool main_ok = false;     // |FNR - (1 - eps_pos)| <= CI + eps
  bool monotone = false;    // detect rate non-increasing over stages within CI
  bool consistency_violated = false;
  std::vector<SpaceRate> spaces;

  nlohmann::json to_json() const {
    auto st = nlohmann::json::array();
    for (const auto& s : stages) {
      st.push_back({{"stage", s.label},
                    {"epsilon", s.epsilon},
                    {"t_min", s.t_min},
                    {"t_max", s.t_max},
                    {"t_mean", s.t_mean},
                    {"exact", s.exact},
                    {"detect_rate", s.detect.value},
                    {"detect_lo", s.detect.lo},
                    {"detect_hi", s.detect.hi}});
    }
    auto sp = nlohmann::json::array();
    for (const auto& s : spaces) sp.push_back({{"space", s.space}, {"r", s.r}, {"n", s.n}, {"detect_after", s.detect_after}});
    return {{"scheme", scheme},         {"epsilon_pos", epsilon_pos},
            {"threshold", threshold},   {"null_rate", null_rate},
            {"epsilon", epsilon},       {"trials", trials},
            {"null_trials", null_trials}, {"stages", st},
            {"detect_after", detect_after}, {"fnr_after", fnr_after},
            {"ci", ci},                 {"target_main", target_main},
            {"target_lower", target_lower}, {"lower_ok", lower_ok},
            {"main_ok", main_ok},       {"monotone", monotone},
            {"consistency_violated", consistency_violated}, {"spaces", sp}};
  }
};

inline constexpr double kCoarseEpsilon = 0.1;

/// Calibrates the threshold on an unwatermarked corpus (one fresh key per
/// sample), then walks each watermarked sample for t_c of its own space and
/// reports how often the detector still fires.
inline ImpossibilityReport run_impossibility(const ExperimentConfig& cfg) {
  const auto bundles = cfg.bundles();
  const auto& sc = cfg.schemes.front();
  const auto& params = sc.params;
  const double eps = cfg.attack.epsilon;
  ImpossibilityReport rep;
  rep.scheme = cell_label(params);
  rep.epsilon_pos = cfg.epsilon_pos;
  rep.epsilon = eps;
  rep.trials = cfg.impossibility.trials;
  rep.null_trials = cfg.impossibility.null_trials;
  if (rep.trials == 0 || rep.null_trials == 0) throw ConfigError("impossibility needs trials and null_trials > 0");

  std::vector<lang::Program> probes;
  {
    Rng rng(derive_seed(cfg.master_seed, kSpaceStream));
    for (const auto& b : bundles) probes.push_back(model::generate(b.tmpl, rng));
  }
  if (!rules::check_ergodicity(cfg.rule_set, probes).ok()) throw chain::NotErgodic("rule set fails the ergodicity check");

  // null calibration
  std::vector<double> null_z(rep.null_trials);
  const auto null_stream = derive_seed(cfg.master_seed, kNullStream);
  parallel_for(rep.null_trials, [&](std::size_t i) {
    const auto& b = bundles[i % bundles.size()];
    const auto seed = derive_seed(null_stream, i);
    Rng rng(derive_seed(seed, kGenStream));
    auto p = model::generate(b.tmpl, rng);
    null_z[i] = watermark::detect(p, params, watermark::Key{derive_seed(seed, kKeyStream)}, &b.tmpl, 0).z;
  });
  rep.threshold = empirical_threshold(null_z, cfg.epsilon_pos);
  std::size_t fp = 0;
  for (double z : null_z) fp += z >= rep.threshold;
  rep.null_rate = static_cast<double>(fp) / static_cast<double>(rep.null_trials);

  // watermarked samples and staged attacks
  const std::array<double, 3> stage_eps = {0.0, kCoarseEpsilon, eps};
  const std::array<const char*, 3> stage_names = {"t=0", "t_c(0.1)", "t_c(eps)"};
  SpaceCache cache(cfg.rule_set, cfg.cap);
  struct Out {
    std::array<int, 3> bit{};
    std::array<std::int64_t, 3> t{};
    std::array<bool, 3> exact{};
    std::string space;
  };
  std::vector<Out> outs(rep.trials);
  const auto wm_stream = derive_seed(cfg.master_seed, kWmStream);
  const auto attack_stream = derive_seed(cfg.master_seed, kAttackStream);
  parallel_for(rep.trials, [&](std::size_t i) {
    const auto& b = bundles[i % bundles.size()];
    const auto seed = derive_seed(wm_stream, i);
    const watermark::Key key{derive_seed(seed, kKeyStream)};
    Rng rng(derive_seed(seed, kGenStream));
    auto p = watermark::generate_watermarked(b.tmpl, params, key, rng);
    Out& o = outs[i];
    o.space = rules::normalize(p).text();
    for (std::size_t s = 0; s < stage_eps.size(); ++s) {
      AttackLength len{0, true};
      if (stage_eps[s] > 0) len = cache.length(p, stage_eps[s]);
      Rng walk(derive_seed(attack_stream, i * 4 + s));
      auto q = rules::random_walk(p, cfg.rule_set, len.t, walk);
      o.bit[s] = watermark::detect(q, params, key, &b.tmpl, rep.threshold).bit;
      o.t[s] = len.t;
      o.exact[s] = len.exact;
    }
  });

  for (std::size_t s = 0; s < stage_eps.size(); ++s) {
    StageRate st;
    st.label = stage_names[s];
    st.epsilon = stage_eps[s];
    std::vector<int> bits;
    st.t_min = INT64_MAX;
    double tsum = 0;
    for (const auto& o : outs) {
      bits.push_back(o.bit[s]);
      st.t_min = std::min(st.t_min, o.t[s]);
      st.t_max = std::max(st.t_max, o.t[s]);
      tsum += static_cast<double>(o.t[s]);
      st.exact = st.exact && o.exact[s];
    }
    st.t_mean = tsum / static_cast<double>(outs.size());
    st.detect = stats::empirical_rate(bits);
    rep.stages.push_back(st);
  }
  rep.detect_after = rep.stages.back().detect.value;
  rep.fnr_after = 1 - rep.detect_after;
  rep.ci = stats::binomial_half_width(cfg.epsilon_pos, rep.trials);
  rep.target_main = 1 - cfg.epsilon_pos;
  rep.target_lower = 1 - eps - cfg.epsilon_pos;
  rep.lower_ok = rep.fnr_after >= rep.target_lower - rep.ci;
  rep.main_ok = std::abs(rep.fnr_after - rep.target_main) <= rep.ci + eps;
  rep.consistency_violated = !rep.main_ok;
  rep.monotone = true;
  for (std::size_t s = 1; s < rep.stages.size(); ++s) {
    const auto& a = rep.stages[s - 1].detect;
    const auto& b = rep.stages[s].detect;
    if (b.value > a.value + stats::binomial_half_width(a.value, a.n) + stats::binomial_half_width(b.value, b.n)) {
      rep.monotone = false;
    }
  }

  std::map<std::string, std::pair<std::size_t, std::size_t>> per_space;
  for (const auto& o : outs) {
    auto& [n, k] = per_space[o.space];
    ++n;
    k += o.bit.back();
  }
  for (const auto& [space, nk] : per_space) {
    rep.spaces.push_back({space, static_cast<double>(nk.first) / static_cast<double>(outs.size()), nk.first,
                          static_cast<double>(nk.second) / static_cast<double>(nk.first)});
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Distribution consistency

struct ConsistencyReport {
  std::string scheme;
  std::size_t requested = 0;
  std::size_t evaluated = 0;
  std::size_t excluded = 0;  // SpaceTooSmall, excluded policy
  std::size_t duplicated = 0;  // SpaceTooSmall, members taken as walks of the sample
  std::size_t members = 0;
  std::array<double, 5> acceptance{};  // aligned with stats::kAdLevels
  std::vector<double> a_squared;

  double acceptance_at(double level) const {
    for (std::size_t i = 0; i < stats::kAdLevels.size(); ++i) {
      if (std::abs(stats::kAdLevels[i] - level) < 1e-12) return acceptance[i];
    }
    throw stats::OutOfRange("unsupported level");
  }

  nlohmann::json to_json() const {
    nlohmann::json acc = nlohmann::json::object();
    for (std::size_t i = 0; i < stats::kAdLevels.size(); ++i) {
      std::ostringstream level;
      level << stats::kAdLevels[i];
      acc[level.str()] = acceptance[i];
    }
    auto a2 = nlohmann::json::array();
    for (double a : a_squared) a2.push_back(std::isfinite(a) ? nlohmann::json(a) : nlohmann::json("inf"));
    return {{"scheme", scheme},     {"requested", requested}, {"evaluated", evaluated}, {"excluded", excluded},
            {"duplicated", duplicated}, {"members", members}, {"acceptance", acc},     {"a_squared", a2}};
  }
};

/// For each watermarked sample: n de-normalized members of its space, their
/// z under the sample's key, and an Anderson-Darling test against N(0,1).
inline ConsistencyReport run_consistency(const ExperimentConfig& cfg) {
  const auto bundles = cfg.bundles();
  const auto& params = cfg.schemes.front().params;
  const auto& cs = cfg.consistency;
  ConsistencyReport rep;
  rep.scheme = cell_label(params);
  rep.requested = cs.samples;
  rep.members = cs.members;
  enum Status { Evaluated, Excluded, Duplicated };
  struct Out {
    Status status = Evaluated;
    stats::AdResult ad;
  };
  std::vector<Out> outs(cs.samples);
  const auto stream = derive_seed(cfg.master_seed, kSpaceStream);
  parallel_for(cs.samples, [&](std::size_t i) {
    const auto& b = bundles[i % bundles.size()];
    const auto seed = derive_seed(stream, i);
    const watermark::Key key{derive_seed(seed, kKeyStream)};
    Rng rng(derive_seed(seed, kGenStream));
    auto p = watermark::generate_watermarked(b.tmpl, params, key, rng);
    const auto receptors = static_cast<double>(p.receptor_state().receptor_count());
    std::vector<lang::Program> members;
    try {
      members = rules::build_equivalent_space_sample(p, cs.members, cfg.rule_set, rng,
                                                     cs.denormalize_mean_per_receptor * receptors);
    } catch (const rules::SpaceTooSmall&) {
      if (!cs.duplicates_on_small_space) {
        outs[i].status = Excluded;
        return;
      }
      outs[i].status = Duplicated;
      const auto t = static_cast<std::int64_t>(cs.denormalize_mean_per_receptor * receptors);
      for (std::size_t m = 0; m < cs.members; ++m) members.push_back(rules::random_walk(p, cfg.rule_set, t, rng));
    }
    std::vector<double> z;
    for (const auto& m : members) z.push_back(watermark::detect(m, params, key, &b.tmpl, 0).z);
    outs[i].ad = stats::anderson_darling(z);
  });
  std::array<std::size_t, 5> accepted{};
  for (const auto& o : outs) {
    if (o.status == Excluded) {
      ++rep.excluded;
      continue;
    }
    if (o.status == Duplicated) ++rep.duplicated;
    ++rep.evaluated;
    rep.a_squared.push_back(o.ad.a_squared);
    for (std::size_t l = 0; l < accepted.size(); ++l) accepted[l] += !o.ad.reject[l];
  }
  for (std::size_t l = 0; l < accepted.size(); ++l) {
    rep.acceptance[l] = rep.evaluated ? static_cast<double>(accepted[l]) / static_cast<double>(rep.evaluated) : 0.0;
  }
  return rep;
}

// ---------------------------------------------------------------------------
// SynthID sampler marginal

struct MarginalCheck {
  std::size_t support = 0;
  std::size_t keys = 0;
  stats::ChiSquareResult chi;
  double max_abs_diff = 0;  // empirical vs base frequency
};

/// Draws one token per random key from the full watermarked sampler at a
/// fixed context and tests the pooled counts against the base distribution.
inline MarginalCheck sampler_marginal(const model::Categorical& base, std::span<const lang::TokenId> context,
                                      const watermark::SchemeParams& params, std::size_t keys, std::uint64_t seed) {
  std::vector<lang::TokenId> drawn(keys);
  const lang::TokenSeq ctx(context.begin(), context.end());
  parallel_for(keys, [&](std::size_t k) {
    Rng rng(derive_seed(seed, k));
    const watermark::Key key{rng.next()};
    drawn[k] = watermark::sample_token(base, params, key, ctx, rng);
  });
  std::vector<double> counts(base.size(), 0.0);
  for (auto t : drawn) {
    for (std::size_t i = 0; i < base.size(); ++i) {
      if (base.tokens[i] == t) counts[i] += 1;
    }
  }
  MarginalCheck m;
  m.support = base.size();
  m.keys = keys;
  m.chi = stats::chi_square_test(counts, base.weights);
  for (std::size_t i = 0; i < base.size(); ++i) {
    m.max_abs_diff = std::max(m.max_abs_diff, std::abs(counts[i] / static_cast<double>(keys) - base.weights[i]));
  }
  return m;
}

// ---------------------------------------------------------------------------
// Before/after AUROC over the configured cells, in memory.

struct CollapseResult {
  std::vector<CellSummary> cells;
  std::int64_t t_min = 0, t_max = 0;
  bool all_exact = true;
  bool pass_conserved = true;  // per-sample, not only the aggregate
};

inline CollapseResult run_collapse(const ExperimentConfig& cfg) {
  const auto labels = cell_labels(cfg);
  auto before = generate_corpus(cfg);
  auto after = attack_corpus(before, cfg);
  auto rows = detect_corpus(before, &after, cfg);
  CollapseResult r;
  r.cells = summarize(rows, labels, cfg);
  r.t_min = INT64_MAX;
  for (const auto& a : after) {
    r.t_min = std::min(r.t_min, a.t_used);
    r.t_max = std::max(r.t_max, a.t_used);
    r.all_exact = r.all_exact && a.t_exact;
  }
  if (after.empty()) r.t_min = 0;
  for (std::size_t i = 0; i < before.size(); ++i) {
    if (rows[i].passed != rows[before.size() + i].passed) r.pass_conserved = false;
  }
  return r;
}

}  // namespace wmlab::harness
