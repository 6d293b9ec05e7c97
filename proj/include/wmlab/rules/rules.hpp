#pragma once

#include <algorithm>
#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "wmlab/lang/program.hpp"

namespace wmlab::rules {

using lang::Program;
using lang::ReceptorState;

WMLAB_DEFINE_ERROR(IllegalAction);
WMLAB_DEFINE_ERROR(NotCanonical);
WMLAB_DEFINE_ERROR(SpaceTooSmall);

enum class RuleKind { Empty, RenameVar, AddComment, DelComment, AddDead, DelDead };

inline std::string to_string(RuleKind k) {
  switch (k) {
    case RuleKind::Empty: return "empty";
    case RuleKind::RenameVar: return "rename_var";
    case RuleKind::AddComment: return "add_comment";
    case RuleKind::DelComment: return "del_comment";
    case RuleKind::AddDead: return "add_dead";
    case RuleKind::DelDead: return "del_dead";
  }
  return "?";
}

inline RuleKind rule_kind_from_string(const std::string& s) {
  for (auto k : {RuleKind::Empty, RuleKind::RenameVar, RuleKind::AddComment, RuleKind::DelComment,
                 RuleKind::AddDead, RuleKind::DelDead}) {
    if (to_string(k) == s) return k;
  }
  throw ConfigError("unknown rule kind '" + s + "'");
}

inline RuleKind inverse_kind(RuleKind k) {
  switch (k) {
    case RuleKind::AddComment: return RuleKind::DelComment;
    case RuleKind::DelComment: return RuleKind::AddComment;
    case RuleKind::AddDead: return RuleKind::DelDead;
    case RuleKind::DelDead: return RuleKind::AddDead;
    default: return k;
  }
}

struct Rule {
  int id = 0;
  RuleKind kind = RuleKind::Empty;
  int inverse_id = -1;  // -1: no inverse in the set
};

/// Pools the rules draw from. Must match the pools the generator used.
struct Pools {
  int identifiers = 64;
  int words = 64;
  int snippets = 16;
};

struct Action {
  int rule_id = 0;
  RuleKind kind = RuleKind::Empty;
  int receptor = -1;  // slot or variable index; -1 for the noop
  int payload = -1;   // word, snippet or name index; -1 if none

  friend bool operator==(const Action&, const Action&) = default;
};

class RuleSet {
 public:
  RuleSet() = default;

  RuleSet(const std::vector<RuleKind>& kinds, Pools pools) : pools_(pools) {
    if (pools.identifiers < 1 || pools.words < 1 || pools.snippets < 1) throw ConfigError("rule pools must be >= 1");
    for (auto k : kinds) {
      if (std::any_of(rules_.begin(), rules_.end(), [k](const Rule& r) { return r.kind == k; })) {
        throw ConfigError("duplicate rule kind " + to_string(k));
      }
      rules_.push_back({static_cast<int>(rules_.size()), k, -1});
    }
    for (auto& r : rules_) {
      for (const auto& s : rules_) {
        if (s.kind == inverse_kind(r.kind)) r.inverse_id = s.id;
      }
    }
  }

  /// {empty, rename_var, add/del comment, add/del dead}.
  static RuleSet ergodic(Pools pools = {}) {
    return RuleSet({RuleKind::Empty, RuleKind::RenameVar, RuleKind::AddComment, RuleKind::DelComment,
                    RuleKind::AddDead, RuleKind::DelDead},
                   pools);
  }

  static RuleSet empty_only(Pools pools = {}) { return RuleSet({RuleKind::Empty}, pools); }

  const std::vector<Rule>& rules() const noexcept { return rules_; }
  const Pools& pools() const noexcept { return pools_; }

  bool has(RuleKind k) const {
    return std::any_of(rules_.begin(), rules_.end(), [k](const Rule& r) { return r.kind == k; });
  }

  bool closed_under_inverse() const {
    return std::all_of(rules_.begin(), rules_.end(), [](const Rule& r) { return r.inverse_id >= 0; });
  }

 private:
  std::vector<Rule> rules_;
  Pools pools_;
};

// ---------------------------------------------------------------------------
// Action algebra on receptor states. Rules read only the receptor state,
// never tokens, keys or hashes.

namespace detail {

inline int free_names(const ReceptorState& s, int pool) {
  int used = 0;
  for (int n : s.names) used += (n >= 0 && n < pool);
  return pool - used;
}

inline bool name_used(const ReceptorState& s, int name) {
  return std::find(s.names.begin(), s.names.end(), name) != s.names.end();
}

inline int count_empty(const std::vector<int>& v) {
  return static_cast<int>(std::count(v.begin(), v.end(), -1));
}

}  // namespace detail

/// |actions(rule, state)|, without materializing them.
inline std::int64_t action_count(const Rule& r, const ReceptorState& s, const Pools& pools) {
  switch (r.kind) {
    case RuleKind::Empty: return 1;
    case RuleKind::RenameVar:
      return static_cast<std::int64_t>(s.names.size()) * detail::free_names(s, pools.identifiers);
    case RuleKind::AddComment: return static_cast<std::int64_t>(detail::count_empty(s.comments)) * pools.words;
    case RuleKind::DelComment:
      return static_cast<std::int64_t>(s.comments.size()) - detail::count_empty(s.comments);
    case RuleKind::AddDead: return static_cast<std::int64_t>(detail::count_empty(s.dead)) * pools.snippets;
    case RuleKind::DelDead: return static_cast<std::int64_t>(s.dead.size()) - detail::count_empty(s.dead);
  }
  return 0;
}

/// |Lambda(state)|: size of the pooled action set.
inline std::int64_t total_actions(const RuleSet& rs, const ReceptorState& s) {
  std::int64_t n = 0;
  for (const auto& r : rs.rules()) n += action_count(r, s, rs.pools());
  return n;
}

namespace detail {
[[noreturn]] inline void out_of_range() { throw IllegalAction("action index out of range"); }
}  // namespace detail

/// The k-th action of `r` in its canonical enumeration order (receptor
/// index, then payload index).
inline Action nth_action(const Rule& r, const ReceptorState& s, const Pools& pools, std::int64_t k) {
  if (k < 0) detail::out_of_range();
  switch (r.kind) {
    case RuleKind::Empty:
      if (k != 0) detail::out_of_range();
      return {r.id, r.kind, -1, -1};
    case RuleKind::RenameVar: {
      const int f = detail::free_names(s, pools.identifiers);
      if (f <= 0 || k >= static_cast<std::int64_t>(s.names.size()) * f) detail::out_of_range();
      int var = static_cast<int>(k / f), skip = static_cast<int>(k % f);
      for (int n = 0; n < pools.identifiers; ++n) {
        if (detail::name_used(s, n)) continue;
        if (skip-- == 0) return {r.id, r.kind, var, n};
      }
      detail::out_of_range();
    }
    case RuleKind::AddComment:
    case RuleKind::AddDead: {
      const auto& slots = r.kind == RuleKind::AddComment ? s.comments : s.dead;
      const int pool = r.kind == RuleKind::AddComment ? pools.words : pools.snippets;
      std::int64_t idx = k / pool;
      for (std::size_t i = 0; i < slots.size(); ++i) {
        if (slots[i] != -1) continue;
        if (idx-- == 0) return {r.id, r.kind, static_cast<int>(i), static_cast<int>(k % pool)};
      }
      detail::out_of_range();
    }
    case RuleKind::DelComment:
    case RuleKind::DelDead: {
      const auto& slots = r.kind == RuleKind::DelComment ? s.comments : s.dead;
      std::int64_t idx = k;
      for (std::size_t i = 0; i < slots.size(); ++i) {
        if (slots[i] == -1) continue;
        if (idx-- == 0) return {r.id, r.kind, static_cast<int>(i), -1};
      }
      detail::out_of_range();
    }
  }
  detail::out_of_range();
}

inline std::vector<Action> derive_actions(const Rule& r, const ReceptorState& s, const Pools& pools) {
  std::vector<Action> out;
  const auto n = action_count(r, s, pools);
  out.reserve(static_cast<std::size_t>(n));
  for (std::int64_t k = 0; k < n; ++k) out.push_back(nth_action(r, s, pools, k));
  return out;
}

inline std::vector<Action> derive_actions(const Rule& r, const Program& p, const Pools& pools) {
  return derive_actions(r, p.receptor_state(), pools);
}

/// Pooled Lambda: actions of every rule, in rule order.
inline std::vector<Action> pooled_actions(const RuleSet& rs, const ReceptorState& s) {
  std::vector<Action> out;
  for (const auto& r : rs.rules()) {
    auto a = derive_actions(r, s, rs.pools());
    out.insert(out.end(), a.begin(), a.end());
  }
  return out;
}

inline bool is_legal(const Action& a, const ReceptorState& s, const Pools& pools) {
  auto in = [](int i, std::size_t n) { return i >= 0 && static_cast<std::size_t>(i) < n; };
  switch (a.kind) {
    case RuleKind::Empty: return a.receptor == -1 && a.payload == -1;
    case RuleKind::RenameVar:
      return in(a.receptor, s.names.size()) && a.payload >= 0 && a.payload < pools.identifiers &&
             !detail::name_used(s, a.payload);
    case RuleKind::AddComment:
      return in(a.receptor, s.comments.size()) && s.comments[static_cast<std::size_t>(a.receptor)] == -1 &&
             a.payload >= 0 && a.payload < pools.words;
    case RuleKind::DelComment:
      return in(a.receptor, s.comments.size()) && s.comments[static_cast<std::size_t>(a.receptor)] != -1;
    case RuleKind::AddDead:
      return in(a.receptor, s.dead.size()) && s.dead[static_cast<std::size_t>(a.receptor)] == -1 &&
             a.payload >= 0 && a.payload < pools.snippets;
    case RuleKind::DelDead:
      return in(a.receptor, s.dead.size()) && s.dead[static_cast<std::size_t>(a.receptor)] != -1;
  }
  return false;
}

/// Applies a legal action in place.
inline void apply(ReceptorState& s, const Action& a) {
  const auto i = static_cast<std::size_t>(a.receptor);
  switch (a.kind) {
    case RuleKind::Empty: break;
    case RuleKind::RenameVar: s.names[i] = a.payload; break;
    case RuleKind::AddComment: s.comments[i] = a.payload; break;
    case RuleKind::DelComment: s.comments[i] = -1; break;
    case RuleKind::AddDead: s.dead[i] = a.payload; break;
    case RuleKind::DelDead: s.dead[i] = -1; break;
  }
}

inline ReceptorState transform(const ReceptorState& s, const Action& a, const RuleSet& rs) {
  const bool known = a.rule_id >= 0 && static_cast<std::size_t>(a.rule_id) < rs.rules().size() &&
                     rs.rules()[static_cast<std::size_t>(a.rule_id)].kind == a.kind;
  if (!known || !is_legal(a, s, rs.pools())) throw IllegalAction("action is not derivable on this state");
  ReceptorState out = s;
  apply(out, a);
  return out;
}

inline Program transform(const Program& p, const Action& a, const RuleSet& rs) {
  if (a.kind == RuleKind::Empty) {
    transform(p.receptor_state(), a, rs);
    return p;
  }
  return lang::materialize(p.skeleton(), transform(p.receptor_state(), a, rs));
}

/// Action that undoes `a` when applied to transform(s, a), using rule
/// `inverse_rule_id`.
inline Action inverse_action(const Action& a, const ReceptorState& before, int inverse_rule_id) {
  const auto i = static_cast<std::size_t>(a.receptor);
  switch (a.kind) {
    case RuleKind::Empty: return {inverse_rule_id, RuleKind::Empty, -1, -1};
    case RuleKind::RenameVar: return {inverse_rule_id, RuleKind::RenameVar, a.receptor, before.names[i]};
    case RuleKind::AddComment: return {inverse_rule_id, RuleKind::DelComment, a.receptor, -1};
    case RuleKind::DelComment: return {inverse_rule_id, RuleKind::AddComment, a.receptor, before.comments[i]};
    case RuleKind::AddDead: return {inverse_rule_id, RuleKind::DelDead, a.receptor, -1};
    case RuleKind::DelDead: return {inverse_rule_id, RuleKind::AddDead, a.receptor, before.dead[i]};
  }
  return {};
}

// ---------------------------------------------------------------------------
// Random transformations

/// Draws one action uniformly from the pooled Lambda.
inline Action random_action(const RuleSet& rs, const ReceptorState& s, Rng& rng) {
  const auto total = total_actions(rs, s);
  if (total <= 0) throw IllegalAction("empty action set; the rule set needs the empty rule");
  auto k = static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(total)));
  for (const auto& r : rs.rules()) {
    auto c = action_count(r, s, rs.pools());
    if (k < c) return nth_action(r, s, rs.pools(), k);
    k -= c;
  }
  throw IllegalAction("action index overflow");
}

inline void random_walk_state(ReceptorState& s, const RuleSet& rs, std::int64_t t, Rng& rng) {
  for (std::int64_t i = 0; i < t; ++i) apply(s, random_action(rs, s, rng));
}

inline Program random_step(const Program& p, const RuleSet& rs, Rng& rng) {
  auto s = p.receptor_state();
  auto a = random_action(rs, s, rng);
  if (a.kind == RuleKind::Empty) return p;
  apply(s, a);
  return lang::materialize(p.skeleton(), s);
}

inline Program random_walk(const Program& p, const RuleSet& rs, std::int64_t t, Rng& rng) {
  if (t < 0) throw InvalidArgument("walk length must be >= 0");
  if (t == 0) return p;
  auto s = p.receptor_state();
  random_walk_state(s, rs, t, rng);
  return lang::materialize(p.skeleton(), s);
}

// ---------------------------------------------------------------------------
// Normalizer / de-normalizer

/// Empties every slot and renames variables to ID0, ID1, ... in order of
/// first appearance.
inline ReceptorState normalize_state(const ReceptorState& s) {
  ReceptorState out = s;
  std::fill(out.comments.begin(), out.comments.end(), -1);
  std::fill(out.dead.begin(), out.dead.end(), -1);
  for (std::size_t i = 0; i < out.names.size(); ++i) out.names[i] = static_cast<int>(i);
  return out;
}

inline Program normalize(const Program& p) { return lang::materialize(p.skeleton(), normalize_state(p.receptor_state())); }

inline bool is_canonical(const Program& p) { return normalize_state(p.receptor_state()) == p.receptor_state(); }

inline constexpr double kDenormalizeMean = 8.0;

/// Applies Geometric(mean) forward actions (add_comment, add_dead,
/// rename_var; whichever the rule set holds) drawn uniformly from their
/// pooled set.
inline ReceptorState de_normalize_state(const ReceptorState& canonical, const RuleSet& rs, Rng& rng,
                                        double mean = kDenormalizeMean) {
  if (!(mean >= 0)) throw InvalidArgument("de-normalizer mean must be >= 0");
  std::vector<Rule> forward;
  for (const auto& r : rs.rules()) {
    if (r.kind == RuleKind::AddComment || r.kind == RuleKind::AddDead || r.kind == RuleKind::RenameVar) {
      forward.push_back(r);
    }
  }
  const auto steps = rng.geometric(1.0 / (1.0 + mean));
  ReceptorState s = canonical;
  for (std::uint64_t i = 0; i < steps; ++i) {
    std::int64_t total = 0;
    for (const auto& r : forward) total += action_count(r, s, rs.pools());
    if (total == 0) break;
    auto k = static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(total)));
    for (const auto& r : forward) {
      auto c = action_count(r, s, rs.pools());
      if (k < c) {
        apply(s, nth_action(r, s, rs.pools(), k));
        break;
      }
      k -= c;
    }
  }
  return s;
}

inline Program de_normalize(const Program& canonical, const RuleSet& rs, Rng& rng, double mean = kDenormalizeMean) {
  if (!is_canonical(canonical)) throw NotCanonical("de_normalize expects normalize(p) == p");
  return lang::materialize(canonical.skeleton(), de_normalize_state(canonical.receptor_state(), rs, rng, mean));
}

/// Number of receptor states in the class of `p` under the full ergodic
/// rule kinds that `rs` holds (saturating at UINT64_MAX).
inline std::uint64_t class_size(const Program& p, const RuleSet& rs) {
  const auto s = p.receptor_state();
  auto mul = [](std::uint64_t a, std::uint64_t b) -> std::uint64_t {
    if (a != 0 && b > UINT64_MAX / a) return UINT64_MAX;
    return a * b;
  };
  std::uint64_t n = 1;
  const auto& pl = rs.pools();
  if (rs.has(RuleKind::AddComment) && rs.has(RuleKind::DelComment)) {
    for (std::size_t i = 0; i < s.comments.size(); ++i) n = mul(n, static_cast<std::uint64_t>(pl.words) + 1);
  }
  if (rs.has(RuleKind::AddDead) && rs.has(RuleKind::DelDead)) {
    for (std::size_t i = 0; i < s.dead.size(); ++i) n = mul(n, static_cast<std::uint64_t>(pl.snippets) + 1);
  }
  if (rs.has(RuleKind::RenameVar) && static_cast<int>(s.names.size()) < pl.identifiers) {
    for (std::size_t i = 0; i < s.names.size(); ++i) {
      n = mul(n, static_cast<std::uint64_t>(pl.identifiers) - i);
    }
  }
  return n;
}

inline constexpr int kSpaceSampleAttemptsPerMember = 200;

/// n distinct programs sharing the seed's normalization, drawn with the
/// de-normalizer.
inline std::vector<Program> build_equivalent_space_sample(const Program& seed, std::size_t n, const RuleSet& rs,
                                                          Rng& rng, double mean = kDenormalizeMean) {
  if (n < 1) throw InvalidArgument("n must be >= 1");
  const auto canonical = normalize(seed);
  const auto size = class_size(seed, rs);
  if (size < n) {
    throw SpaceTooSmall("space has " + std::to_string(size) + " members, " + std::to_string(n) + " requested");
  }
  const auto cs = canonical.receptor_state();
  const auto sk = canonical.skeleton();
  std::set<ReceptorState> seen;
  std::vector<Program> out;
  const std::size_t limit = n * kSpaceSampleAttemptsPerMember;
  for (std::size_t attempt = 0; out.size() < n; ++attempt) {
    if (attempt >= limit) throw SpaceTooSmall("de-normalizer produced too few distinct members");
    auto s = de_normalize_state(cs, rs, rng, mean);
    if (seen.insert(s).second) out.push_back(lang::materialize(sk, s));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Ergodicity

struct ErgodicityViolation {
  std::size_t probe = 0;
  Action action;
  std::string reason;
};

struct ErgodicityReport {
  bool has_empty_rule = false;
  std::size_t actions_checked = 0;
  std::vector<ErgodicityViolation> violations;
  bool ok() const { return has_empty_rule && violations.empty(); }
};

/// Checks the empty rule is present and that every action derivable on
/// every probe can be undone by an action of its inverse rule.
inline ErgodicityReport check_ergodicity(const RuleSet& rs, const std::vector<Program>& probes) {
  ErgodicityReport rep;
  rep.has_empty_rule = rs.has(RuleKind::Empty);
  for (std::size_t pi = 0; pi < probes.size(); ++pi) {
    const auto s = probes[pi].receptor_state();
    for (const auto& r : rs.rules()) {
      for (const auto& a : derive_actions(r, s, rs.pools())) {
        ++rep.actions_checked;
        if (r.inverse_id < 0) {
          rep.violations.push_back({pi, a, "no inverse rule for " + to_string(r.kind)});
          continue;
        }
        auto after = s;
        apply(after, a);
        const auto& inv = rs.rules()[static_cast<std::size_t>(r.inverse_id)];
        const auto undo = inverse_action(a, s, inv.id);
        auto cands = derive_actions(inv, after, rs.pools());
        bool found = std::find(cands.begin(), cands.end(), undo) != cands.end();
        if (found) {
          auto back = after;
          apply(back, undo);
          found = back == s;
        }
        if (!found) rep.violations.push_back({pi, a, "inverse action not derivable"});
      }
    }
  }
  return rep;
}

// ---------------------------------------------------------------------------
// JSON: {rules: [kind...], identifier_pool_size, comment_word_pool_size, snippet_pool_size}

inline nlohmann::json rule_set_to_json(const RuleSet& rs) {
  auto kinds = nlohmann::json::array();
  for (const auto& r : rs.rules()) kinds.push_back(to_string(r.kind));
  return {{"rules", kinds},
          {"identifier_pool_size", rs.pools().identifiers},
          {"comment_word_pool_size", rs.pools().words},
          {"snippet_pool_size", rs.pools().snippets}};
}

inline RuleSet rule_set_from_json(const nlohmann::json& j) {
  try {
    std::vector<RuleKind> kinds;
    for (const auto& k : j.at("rules")) kinds.push_back(rule_kind_from_string(k.get<std::string>()));
    Pools p;
    p.identifiers = j.value("identifier_pool_size", p.identifiers);
    p.words = j.value("comment_word_pool_size", p.words);
    p.snippets = j.value("snippet_pool_size", p.snippets);
    const auto& v = lang::Vocabulary::standard().pools();
    if (p.identifiers > v.identifiers || p.words > v.words || p.snippets > v.snippets) {
      throw ConfigError("rule pools exceed the vocabulary");
    }
    return RuleSet(kinds, p);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed rule set: ") + e.what());
  }
}

}  // namespace wmlab::rules
