#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <thread>
#include <tuple>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "wmlab/rules/rules.hpp"

namespace wmlab::chain {

using lang::ReceptorState;

WMLAB_DEFINE_ERROR(CapExceeded);
WMLAB_DEFINE_ERROR(NotErgodic);
WMLAB_DEFINE_ERROR(DegreeAsymmetry);
WMLAB_DEFINE_ERROR(NotConverged);
WMLAB_DEFINE_ERROR(TooLarge);

using Distribution = std::vector<double>;

/// Transformation graph in CSR form. Edge k of row i goes to col[k] and
/// carries `count[k]` actions; w_ij = count / degree[i] with degree[i] =
/// |Lambda(state i)|. Receptor-backed graphs also keep their states.
struct Graph {
  std::vector<std::size_t> row_ptr{0};
  std::vector<std::uint32_t> col;
  std::vector<std::int64_t> count;
  std::vector<std::int64_t> degree;

  std::vector<ReceptorState> states;
  std::unordered_map<ReceptorState, std::uint32_t, lang::ReceptorStateHash> index;
  std::optional<rules::RuleSet> rule_set;
  lang::Skeleton skeleton;
  std::size_t token_count = 0;

  std::size_t size() const noexcept { return degree.size(); }
  std::size_t edge_count() const noexcept { return col.size(); }

  /// Position of edge (i, j) in the CSR arrays, or npos.
  std::size_t find_edge(std::size_t i, std::size_t j) const {
    auto b = col.begin() + static_cast<std::ptrdiff_t>(row_ptr[i]);
    auto e = col.begin() + static_cast<std::ptrdiff_t>(row_ptr[i + 1]);
    auto it = std::lower_bound(b, e, static_cast<std::uint32_t>(j));
    return (it != e && *it == j) ? static_cast<std::size_t>(it - col.begin()) : npos;
  }

  bool has_self_loop(std::size_t i) const { return find_edge(i, i) != npos; }

  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

  /// Synthetic graph from (i, j, count) triples.
  static Graph from_edges(std::size_t n, const std::vector<std::tuple<std::size_t, std::size_t, std::int64_t>>& edges) {
    std::vector<std::map<std::uint32_t, std::int64_t>> rows(n);
    for (auto [i, j, c] : edges) {
      if (i >= n || j >= n || c <= 0) throw InvalidArgument("bad synthetic edge");
      rows[i][static_cast<std::uint32_t>(j)] += c;
    }
    Graph g;
    for (const auto& r : rows) g.push_row(r);
    return g;
  }

  void push_row(const std::map<std::uint32_t, std::int64_t>& r) {
    std::int64_t d = 0;
    for (auto [j, c] : r) {
      col.push_back(j);
      count.push_back(c);
      d += c;
    }
    row_ptr.push_back(col.size());
    degree.push_back(d);
  }
};

/// BFS closure of the seed's receptor state under one-step transforms.
inline Graph enumerate_space(const lang::Program& seed, const rules::RuleSet& rs, std::size_t cap) {
  if (cap < 1) throw InvalidArgument("cap must be >= 1");
  Graph g;
  g.rule_set = rs;
  g.skeleton = seed.skeleton();
  g.token_count = seed.size();
  auto intern = [&](const ReceptorState& s) -> std::uint32_t {
    auto [it, inserted] = g.index.emplace(s, static_cast<std::uint32_t>(g.states.size()));
    if (inserted) {
      if (g.states.size() >= cap) throw CapExceeded("space exceeds cap " + std::to_string(cap));
      g.states.push_back(s);
    }
    return it->second;
  };
  intern(seed.receptor_state());
  for (std::size_t i = 0; i < g.states.size(); ++i) {
    const ReceptorState s = g.states[i];
    std::map<std::uint32_t, std::int64_t> row;
    for (const auto& a : rules::pooled_actions(rs, s)) {
      auto t = s;
      rules::apply(t, a);
      row[intern(t)] += 1;
    }
    g.push_row(row);
  }
  return g;
}

// ---------------------------------------------------------------------------
// Transition matrix

struct TransitionMatrix {
  std::size_t n = 0;
  std::vector<std::size_t> row_ptr;
  std::vector<std::uint32_t> col;
  std::vector<double> val;

  std::vector<std::vector<double>> dense() const {
    std::vector<std::vector<double>> m(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = row_ptr[i]; k < row_ptr[i + 1]; ++k) m[i][col[k]] = val[k];
    }
    return m;
  }

  double at(std::size_t i, std::size_t j) const {
    for (std::size_t k = row_ptr[i]; k < row_ptr[i + 1]; ++k) {
      if (col[k] == j) return val[k];
    }
    return 0.0;
  }
};

inline TransitionMatrix transition_matrix(const Graph& g) {
  TransitionMatrix p;
  p.n = g.size();
  p.row_ptr = g.row_ptr;
  p.col = g.col;
  p.val.resize(g.col.size());
  for (std::size_t i = 0; i < p.n; ++i) {
    for (std::size_t k = g.row_ptr[i]; k < g.row_ptr[i + 1]; ++k) {
      p.val[k] = static_cast<double>(g.count[k]) / static_cast<double>(g.degree[i]);
    }
  }
  return p;
}

inline double tv_distance(const Distribution& p, const Distribution& q) {
  if (p.size() != q.size()) throw DimensionMismatch("tv_distance needs equal dimensions");
  double s = 0;
  for (std::size_t i = 0; i < p.size(); ++i) s += std::abs(p[i] - q[i]);
  return 0.5 * s;
}

/// p(t+1) = P^T p(t), renormalized.
inline Distribution step_distribution(const TransitionMatrix& P, const Distribution& p) {
  if (p.size() != P.n) throw DimensionMismatch("distribution and matrix dimensions differ");
  Distribution out(P.n, 0.0);
  for (std::size_t i = 0; i < P.n; ++i) {
    const double pi = p[i];
    if (pi == 0) continue;
    for (std::size_t k = P.row_ptr[i]; k < P.row_ptr[i + 1]; ++k) out[P.col[k]] += pi * P.val[k];
  }
  double s = std::accumulate(out.begin(), out.end(), 0.0);
  for (double& x : out) x /= s;
  return out;
}

inline Distribution point_mass(std::size_t n, std::size_t i) {
  Distribution d(n, 0.0);
  d.at(i) = 1.0;
  return d;
}

// ---------------------------------------------------------------------------
// Structure

namespace detail {

inline std::vector<char> reach(std::size_t n, const std::vector<std::vector<std::uint32_t>>& adj) {
  std::vector<char> seen(n, 0);
  if (n == 0) return seen;
  std::deque<std::uint32_t> q{0};
  seen[0] = 1;
  while (!q.empty()) {
    auto u = q.front();
    q.pop_front();
    for (auto v : adj[u]) {
      if (!seen[v]) {
        seen[v] = 1;
        q.push_back(v);
      }
    }
  }
  return seen;
}

inline std::vector<std::vector<std::uint32_t>> adjacency(const TransitionMatrix& P, bool reverse) {
  std::vector<std::vector<std::uint32_t>> adj(P.n);
  for (std::size_t i = 0; i < P.n; ++i) {
    for (std::size_t k = P.row_ptr[i]; k < P.row_ptr[i + 1]; ++k) {
      if (P.val[k] <= 0) continue;
      if (reverse) {
        adj[P.col[k]].push_back(static_cast<std::uint32_t>(i));
      } else {
        adj[i].push_back(P.col[k]);
      }
    }
  }
  return adj;
}

}  // namespace detail

inline bool is_irreducible(const TransitionMatrix& P) {
  auto fwd = detail::reach(P.n, detail::adjacency(P, false));
  auto bwd = detail::reach(P.n, detail::adjacency(P, true));
  return std::all_of(fwd.begin(), fwd.end(), [](char c) { return c; }) &&
         std::all_of(bwd.begin(), bwd.end(), [](char c) { return c; });
}

/// gcd of cycle lengths through BFS levels (meaningful for irreducible P).
inline std::int64_t period(const TransitionMatrix& P) {
  if (P.n == 0) return 0;
  std::vector<std::int64_t> level(P.n, -1);
  std::deque<std::uint32_t> q{0};
  level[0] = 0;
  std::int64_t g = 0;
  while (!q.empty()) {
    auto u = q.front();
    q.pop_front();
    for (std::size_t k = P.row_ptr[u]; k < P.row_ptr[u + 1]; ++k) {
      if (P.val[k] <= 0) continue;
      auto v = P.col[k];
      if (level[v] < 0) {
        level[v] = level[u] + 1;
        q.push_back(v);
      } else {
        g = std::gcd(g, std::abs(level[u] + 1 - level[v]));
      }
    }
  }
  return g;
}

inline constexpr double kStationaryTol = 1e-12;
inline constexpr std::int64_t kStationaryMaxIter = 1000000;

/// Power iteration on the lazy chain (I + P) / 2, which has the same
/// stationary vector, until TV(p, pP) <= tol.
inline Distribution stationary(const TransitionMatrix& P, double tol = kStationaryTol,
                               std::int64_t max_iter = kStationaryMaxIter) {
  if (!is_irreducible(P) || period(P) != 1) throw NotErgodic("chain must be irreducible and aperiodic");
  Distribution p(P.n, 1.0 / static_cast<double>(P.n));
  for (std::int64_t it = 0; it < max_iter; ++it) {
    auto q = step_distribution(P, p);
    if (tv_distance(p, q) <= tol) return q;
    for (std::size_t i = 0; i < P.n; ++i) p[i] = 0.5 * (p[i] + q[i]);
  }
  throw NotConverged("stationary: no convergence in " + std::to_string(max_iter) + " iterations");
}

/// pi_i = d_i / sum d_k, valid when every state's in-degree equals its
/// out-degree (counted with action multiplicity).
inline Distribution degree_stationary(const Graph& g) {
  std::vector<std::int64_t> in(g.size(), 0);
  for (std::size_t i = 0; i < g.size(); ++i) {
    for (std::size_t k = g.row_ptr[i]; k < g.row_ptr[i + 1]; ++k) in[g.col[k]] += g.count[k];
  }
  double total = 0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (in[i] != g.degree[i]) {
      throw DegreeAsymmetry("state " + std::to_string(i) + " has in-degree " + std::to_string(in[i]) +
                            " and out-degree " + std::to_string(g.degree[i]));
    }
    total += static_cast<double>(g.degree[i]);
  }
  Distribution pi(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) pi[i] = static_cast<double>(g.degree[i]) / total;
  return pi;
}

// ---------------------------------------------------------------------------
// Mixing

struct MixingReport {
  std::size_t start = 0;
  double epsilon = 0;
  std::int64_t t_mix = 0;
  std::vector<double> tv_trace;    // TV at t = 0 .. t_mix
  std::vector<double> deviations;  // |p_i(t_mix) - pi_i|
};

inline constexpr std::int64_t kMixingMaxSteps = 1000000;

/// Smallest t with TV(p(start, t), pi) <= epsilon.
inline MixingReport mixing_time(const TransitionMatrix& P, std::size_t start, const Distribution& pi, double epsilon,
                                std::int64_t max_steps = kMixingMaxSteps) {
  if (!(epsilon > 0 && epsilon < 1)) throw InvalidArgument("epsilon must lie in (0,1)");
  if (pi.size() != P.n) throw DimensionMismatch("pi and matrix dimensions differ");
  MixingReport r{start, epsilon, 0, {}, {}};
  auto p = point_mass(P.n, start);
  for (std::int64_t t = 0;; ++t) {
    double tv = tv_distance(p, pi);
    r.tv_trace.push_back(tv);
    if (tv <= epsilon) {
      r.t_mix = t;
      r.deviations.resize(P.n);
      for (std::size_t i = 0; i < P.n; ++i) r.deviations[i] = std::abs(p[i] - pi[i]);
      return r;
    }
    if (t >= max_steps) throw NotConverged("mixing_time exceeded " + std::to_string(max_steps) + " steps");
    p = step_distribution(P, p);
  }
}

struct ErgodicityCheck {
  bool irreducible = false;
  bool aperiodic = false;
  bool self_loops = false;  // every state has a self-loop
  std::int64_t period = 0;
  double start_agreement_tv = 0;  // max pairwise TV between the three limits
  bool starts_converged = false;
  std::vector<std::string> violations;
  bool ok() const { return violations.empty(); }
};

inline constexpr double kStartAgreementTol = 1e-8;

/// Strong connectivity by forward/backward traversal, aperiodicity by
/// self-loops (falling back to the cycle-length gcd), and power iteration of
/// P from three starts.
inline ErgodicityCheck check_irreducible_aperiodic(const Graph& g, std::int64_t max_iter = 200000) {
  ErgodicityCheck c;
  auto P = transition_matrix(g);
  c.irreducible = is_irreducible(P);
  c.self_loops = true;
  for (std::size_t i = 0; i < g.size(); ++i) c.self_loops = c.self_loops && g.has_self_loop(i);
  c.period = period(P);
  c.aperiodic = c.self_loops || (c.irreducible && c.period == 1);
  if (!c.irreducible) c.violations.push_back("irreducibility: graph is not strongly connected");
  if (!c.aperiodic) c.violations.push_back("aperiodicity: no self-loop and period " + std::to_string(c.period));
  const std::size_t n = g.size();
  std::vector<std::size_t> starts{0, n / 2, n - 1};
  std::vector<Distribution> ps;
  c.starts_converged = true;
  for (auto s : starts) {
    auto p = point_mass(n, s);
    bool conv = false;
    for (std::int64_t it = 0; it < max_iter; ++it) {
      auto q = step_distribution(P, p);
      double d = tv_distance(p, q);
      p = std::move(q);
      if (d <= 1e-14) {
        conv = true;
        break;
      }
    }
    c.starts_converged = c.starts_converged && conv;
    ps.push_back(std::move(p));
  }
  for (std::size_t a = 0; a < ps.size(); ++a) {
    for (std::size_t b = a + 1; b < ps.size(); ++b) c.start_agreement_tv = std::max(c.start_agreement_tv, tv_distance(ps[a], ps[b]));
  }
  if (!c.starts_converged || c.start_agreement_tv > kStartAgreementTol) {
    c.violations.push_back("start independence: limits from three starts differ by TV " +
                           std::to_string(c.start_agreement_tv));
  }
  return c;
}

// ---------------------------------------------------------------------------
// Partition

struct PartitionReport {
  std::vector<int> cell_of_seed;
  std::vector<std::size_t> cell_sizes;
  std::size_t identical_pairs = 0;
  std::size_t disjoint_pairs = 0;
  std::size_t violations = 0;  // pairs that overlap without being identical
};

struct TokenSeqHash {
  std::size_t operator()(const lang::TokenSeq& t) const noexcept {
    std::uint64_t h = 0xA0761D6478BD642FULL;
    for (auto x : t) h = mix64(h ^ static_cast<std::uint64_t>(x + 1));
    return static_cast<std::size_t>(h);
  }
};

using ProgramSet = std::unordered_set<lang::TokenSeq, TokenSeqHash>;

inline ProgramSet space_programs(const Graph& g) {
  ProgramSet out;
  for (const auto& s : g.states) out.insert(lang::materialize_tokens(g.skeleton, s));
  return out;
}

/// Enumerates every seed's space and checks that any two are identical or
/// disjoint.
inline PartitionReport check_partition(const std::vector<lang::Program>& seeds, const rules::RuleSet& rs,
                                       std::size_t cap) {
  PartitionReport r;
  std::vector<ProgramSet> spaces;
  for (const auto& s : seeds) spaces.push_back(space_programs(enumerate_space(s, rs, cap)));
  std::vector<std::size_t> reps;
  r.cell_of_seed.assign(seeds.size(), -1);
  for (std::size_t i = 0; i < spaces.size(); ++i) {
    for (std::size_t j = i + 1; j < spaces.size(); ++j) {
      std::size_t common = 0;
      const auto& a = spaces[i].size() <= spaces[j].size() ? spaces[i] : spaces[j];
      const auto& b = spaces[i].size() <= spaces[j].size() ? spaces[j] : spaces[i];
      for (const auto& t : a) common += b.count(t);
      if (common == 0) {
        ++r.disjoint_pairs;
      } else if (common == a.size() && a.size() == b.size()) {
        ++r.identical_pairs;
      } else {
        ++r.violations;
      }
    }
    for (std::size_t c = 0; c < reps.size() && r.cell_of_seed[i] < 0; ++c) {
      if (spaces[reps[c]] == spaces[i]) r.cell_of_seed[i] = static_cast<int>(c);
    }
    if (r.cell_of_seed[i] < 0) {
      r.cell_of_seed[i] = static_cast<int>(reps.size());
      reps.push_back(i);
      r.cell_sizes.push_back(spaces[i].size());
    }
  }
  return r;
}

// ---------------------------------------------------------------------------
// Canonical paths and congestion

/// Receptor-queue path from `a` to `b`: comment slots, then dead slots (each
/// in position order; a changed filling is deleted then re-added), then
/// variables. A variable moves straight to its target name once that name
/// is free; cycles are broken through the smallest free name that no
/// pending variable targets.
inline std::vector<ReceptorState> queue_path(const ReceptorState& a, const ReceptorState& b, const rules::Pools& pools) {
  std::vector<ReceptorState> path{a};
  ReceptorState cur = a;
  auto push = [&] { path.push_back(cur); };
  auto slots = [&](std::vector<int>& c, const std::vector<int>& t) {
    for (std::size_t i = 0; i < c.size(); ++i) {
      if (c[i] == t[i]) continue;
      if (c[i] != -1) {
        c[i] = -1;
        push();
      }
      if (t[i] != -1) {
        c[i] = t[i];
        push();
      }
    }
  };
  slots(cur.comments, b.comments);
  slots(cur.dead, b.dead);
  auto used = [&](int n) { return std::find(cur.names.begin(), cur.names.end(), n) != cur.names.end(); };
  for (;;) {
    int pending = -1, movable = -1;
    for (std::size_t i = 0; i < cur.names.size(); ++i) {
      if (cur.names[i] == b.names[i]) continue;
      if (pending < 0) pending = static_cast<int>(i);
      if (!used(b.names[i])) {
        movable = static_cast<int>(i);
        break;
      }
    }
    if (pending < 0) break;
    if (movable >= 0) {
      cur.names[static_cast<std::size_t>(movable)] = b.names[static_cast<std::size_t>(movable)];
    } else {
      int tmp = -1, fallback = -1;
      for (int n = 0; n < pools.identifiers && tmp < 0; ++n) {
        if (used(n)) continue;
        if (fallback < 0) fallback = n;
        if (std::find(b.names.begin(), b.names.end(), n) == b.names.end()) tmp = n;
      }
      if (tmp < 0) tmp = fallback;
      if (tmp < 0) throw InvalidArgument("no free name to break a renaming cycle");
      cur.names[static_cast<std::size_t>(pending)] = tmp;
    }
    push();
  }
  return path;
}

struct ReceptorProfile {
  std::size_t receptors = 0;       // receptor count
  std::vector<std::int64_t> dfree;  // states per receptor
  std::size_t tokens = 0;          // code length surrogate
  double alpha = 0;                // mean actions per receptor
  double beta = 0;                 // receptors per token
};

struct CongestionReport {
  bool applicable = false;
  double rho = 0;
  std::size_t pairs = 0;
  std::size_t max_path_length = 0;
  double mean_path_length = 0;
  std::size_t bottleneck_from = 0, bottleneck_to = 0;
  Distribution pi;
  ReceptorProfile profile;

  /// 2 rho (2 ln(1/eps) + ln(1/pi_i)).
  double bound(double epsilon, std::size_t i) const {
    if (!applicable) throw InvalidArgument("congestion bound not applicable to a single state");
    return 2 * rho * (2 * std::log(1 / epsilon) + std::log(1 / pi.at(i)));
  }
};

inline constexpr std::size_t kCongestionMaxStates = 5000;

namespace detail {

inline std::vector<std::uint32_t> bfs_parents(const Graph& g, std::size_t src) {
  std::vector<std::uint32_t> parent(g.size(), UINT32_MAX);
  std::deque<std::uint32_t> q{static_cast<std::uint32_t>(src)};
  parent[src] = static_cast<std::uint32_t>(src);
  while (!q.empty()) {
    auto u = q.front();
    q.pop_front();
    for (std::size_t k = g.row_ptr[u]; k < g.row_ptr[u + 1]; ++k) {
      auto v = g.col[k];
      if (parent[v] == UINT32_MAX) {
        parent[v] = u;
        q.push_back(v);
      }
    }
  }
  return parent;
}

}  // namespace detail

/// Builds one canonical path per ordered pair and evaluates
///   rho = max_e (1 / (pi_I P_IJ)) sum_{paths through e} pi_i pi_j |path|.
/// Receptor graphs use the queue convention; synthetic graphs use BFS
/// shortest paths with lowest-index parents.
inline CongestionReport canonical_paths_and_congestion(const Graph& g, const Distribution& pi, const TransitionMatrix& P,
                                                       unsigned threads = 0) {
  const std::size_t n = g.size();
  if (n > kCongestionMaxStates) throw TooLarge("congestion needs |V| <= " + std::to_string(kCongestionMaxStates));
  if (pi.size() != n || P.n != n) throw DimensionMismatch("graph, pi and P dimensions differ");
  CongestionReport rep;
  rep.pi = pi;
  if (!g.states.empty() && g.rule_set) {
    const auto& s0 = g.states.front();
    const auto& pl = g.rule_set->pools();
    rep.profile.receptors = s0.receptor_count();
    for (std::size_t i = 0; i < s0.comments.size(); ++i) rep.profile.dfree.push_back(pl.words + 1);
    for (std::size_t i = 0; i < s0.dead.size(); ++i) rep.profile.dfree.push_back(pl.snippets + 1);
    for (std::size_t i = 0; i < s0.names.size(); ++i) {
      rep.profile.dfree.push_back(pl.identifiers - static_cast<std::int64_t>(s0.names.size()) + 1);
    }
    rep.profile.tokens = g.token_count;
    double mean_deg = 0;
    for (auto d : g.degree) mean_deg += static_cast<double>(d);
    mean_deg /= static_cast<double>(n);
    if (rep.profile.receptors) rep.profile.alpha = mean_deg / static_cast<double>(rep.profile.receptors);
    if (g.token_count) rep.profile.beta = static_cast<double>(rep.profile.receptors) / static_cast<double>(g.token_count);
  }
  if (n < 2) return rep;
  rep.applicable = true;

  const bool receptor_paths = !g.states.empty() && g.rule_set.has_value();
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, n));
  struct Partial {
    std::vector<double> load;
    std::size_t pairs = 0, max_len = 0;
    double len_sum = 0;
  };
  std::vector<Partial> parts(threads);
  std::vector<std::exception_ptr> errors(threads);
  auto worker = [&](unsigned w) {
    try {
      auto& part = parts[w];
      part.load.assign(g.edge_count(), 0.0);
      std::vector<std::size_t> edges;
      for (std::size_t i = w; i < n; i += threads) {
        std::vector<std::uint32_t> parent;
        if (!receptor_paths) parent = detail::bfs_parents(g, i);
        for (std::size_t j = 0; j < n; ++j) {
          if (i == j) continue;
          edges.clear();
          if (receptor_paths) {
            auto path = queue_path(g.states[i], g.states[j], g.rule_set->pools());
            for (std::size_t k = 0; k + 1 < path.size(); ++k) {
              auto u = g.index.at(path[k]), v = g.index.at(path[k + 1]);
              auto e = g.find_edge(u, v);
              if (e == Graph::npos) throw InvalidArgument("queue path leaves the graph");
              edges.push_back(e);
            }
          } else {
            if (parent[j] == UINT32_MAX) throw NotErgodic("graph is not strongly connected");
            for (std::size_t v = j; v != i; v = parent[v]) edges.push_back(g.find_edge(parent[v], v));
          }
          const double w_ij = pi[i] * pi[j] * static_cast<double>(edges.size());
          for (auto e : edges) part.load[e] += w_ij;
          ++part.pairs;
          part.len_sum += static_cast<double>(edges.size());
          part.max_len = std::max(part.max_len, edges.size());
        }
      }
    } catch (...) {
      errors[w] = std::current_exception();
    }
  };
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < threads; ++w) pool.emplace_back(worker, w);
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  std::vector<double> load(g.edge_count(), 0.0);
  for (const auto& part : parts) {
    for (std::size_t e = 0; e < load.size(); ++e) load[e] += part.load[e];
    rep.pairs += part.pairs;
    rep.max_path_length = std::max(rep.max_path_length, part.max_len);
    rep.mean_path_length += part.len_sum;
  }
  rep.mean_path_length /= static_cast<double>(rep.pairs);
  for (std::size_t u = 0; u < n; ++u) {
    for (std::size_t k = g.row_ptr[u]; k < g.row_ptr[u + 1]; ++k) {
      if (load[k] == 0) continue;
      double q = pi[u] * P.val[k];
      double c = load[k] / q;
      if (c > rep.rho) {
        rep.rho = c;
        rep.bottleneck_from = u;
        rep.bottleneck_to = g.col[k];
      }
    }
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Dump: {states: [[comments, dead, names]...], edges: [[i, j, w]...]}

inline nlohmann::json graph_to_json(const Graph& g) {
  auto states = nlohmann::json::array();
  for (const auto& s : g.states) states.push_back({s.comments, s.dead, s.names});
  auto edges = nlohmann::json::array();
  for (std::size_t i = 0; i < g.size(); ++i) {
    for (std::size_t k = g.row_ptr[i]; k < g.row_ptr[i + 1]; ++k) {
      edges.push_back({i, g.col[k], static_cast<double>(g.count[k]) / static_cast<double>(g.degree[i])});
    }
  }
  return {{"states", states}, {"edges", edges}};
}

}  // namespace wmlab::chain
