#include <gtest/gtest.h>

#include <cmath>
#include <map>

#include "wmlab/chain/chain.hpp"
#include "wmlab/model/catalog.hpp"

using namespace wmlab;
using namespace wmlab::chain;
using lang::parse_text;
using rules::Pools;
using rules::RuleSet;

namespace {

const char* kSmall = "fn f ( ID0 ) { # let ID1 = ID0 ; # ~ return ID1 ; }";
Pools small_pools() { return Pools{3, 2, 2}; }

Graph small_graph() { return enumerate_space(parse_text(kSmall), RuleSet::ergodic(small_pools()), 1000); }

// A <-> B, each with a self-loop: 2 actions per state.
Graph two_state() { return Graph::from_edges(2, {{0, 0, 1}, {0, 1, 1}, {1, 1, 1}, {1, 0, 1}}); }

// directed 3-cycle with self-loops
Graph three_cycle() {
  return Graph::from_edges(3, {{0, 0, 1}, {0, 1, 1}, {1, 1, 1}, {1, 2, 1}, {2, 2, 1}, {2, 0, 1}});
}

double max_abs_diff(const Distribution& a, const Distribution& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace

TEST(Enumerate, EmptyRuleSetIsOneState) {
  auto g = enumerate_space(parse_text(kSmall), RuleSet::empty_only(), 10);
  ASSERT_EQ(g.size(), 1u);
  auto P = transition_matrix(g);
  EXPECT_EQ(P.dense(), (std::vector<std::vector<double>>{{1.0}}));
  EXPECT_EQ(stationary(P), (Distribution{1.0}));
  EXPECT_EQ(degree_stationary(g), (Distribution{1.0}));
}

TEST(Enumerate, SmallConfigHas162States) {
  auto g = small_graph();
  EXPECT_EQ(g.size(), 162u);
  EXPECT_THROW(enumerate_space(parse_text(kSmall), RuleSet::ergodic(small_pools()), 100), CapExceeded);
  EXPECT_THROW(enumerate_space(parse_text(kSmall), RuleSet::ergodic(small_pools()), 0), InvalidArgument);
  // every state is a distinct program with the seed's normalization
  for (const auto& s : g.states) {
    auto p = lang::materialize(g.skeleton, s);
    EXPECT_EQ(rules::normalize(p).text(), kSmall);
  }
}

TEST(Enumerate, GraphShape) {
  auto g = small_graph();
  auto P = transition_matrix(g);
  for (std::size_t i = 0; i < g.size(); ++i) {
    EXPECT_TRUE(g.has_self_loop(i));
    double row = 0;
    for (std::size_t k = P.row_ptr[i]; k < P.row_ptr[i + 1]; ++k) {
      row += P.val[k];
      // symmetric 0/1 pattern
      EXPECT_NE(g.find_edge(g.col[k], i), Graph::npos);
    }
    EXPECT_NEAR(row, 1.0, 1e-12);
    EXPECT_EQ(g.degree[i], rules::total_actions(*g.rule_set, g.states[i]));
  }
}

TEST(Transition, TwoState) {
  auto P = transition_matrix(two_state());
  EXPECT_EQ(P.dense(), (std::vector<std::vector<double>>{{0.5, 0.5}, {0.5, 0.5}}));
  EXPECT_EQ(step_distribution(P, {1.0, 0.0}), (Distribution{0.5, 0.5}));
  EXPECT_THROW(step_distribution(P, {1.0}), DimensionMismatch);
}

TEST(Transition, DoublyStochasticKeepsUniform) {
  auto P = transition_matrix(three_cycle());
  auto u = step_distribution(P, {1.0 / 3, 1.0 / 3, 1.0 / 3});
  for (double x : u) EXPECT_NEAR(x, 1.0 / 3, 1e-15);
}

TEST(Transition, MassConserved) {
  auto g = small_graph();
  auto P = transition_matrix(g);
  Rng rng(1);
  Distribution p(g.size());
  double s = 0;
  for (auto& x : p) s += x = rng.uniform();
  for (auto& x : p) x /= s;
  for (int t = 0; t < 50; ++t) {
    p = step_distribution(P, p);
    double m = 0;
    for (double x : p) m += x;
    EXPECT_NEAR(m, 1.0, 1e-12);
  }
}

TEST(Tv, Examples) {
  EXPECT_DOUBLE_EQ(tv_distance({0.3, 0.7}, {0.3, 0.7}), 0.0);
  EXPECT_DOUBLE_EQ(tv_distance({1, 0}, {0, 1}), 1.0);
  EXPECT_DOUBLE_EQ(tv_distance({0.5, 0.5}, {0.25, 0.75}), 0.25);
  EXPECT_THROW(tv_distance({1}, {0.5, 0.5}), DimensionMismatch);
}

TEST(Stationary, SmallExamples) {
  auto s2 = stationary(transition_matrix(two_state()));
  EXPECT_NEAR(s2[0], 0.5, 1e-12);
  EXPECT_EQ(degree_stationary(two_state()), (Distribution{0.5, 0.5}));
  auto d3 = degree_stationary(three_cycle());
  for (double x : d3) EXPECT_DOUBLE_EQ(x, 1.0 / 3);
  auto s3 = stationary(transition_matrix(three_cycle()));
  EXPECT_LT(max_abs_diff(s3, d3), 1e-12);
}

TEST(Stationary, DegreeFormulaOnEnumeratedSpaces) {
  struct Case {
    const char* src;
    Pools pools;
    std::size_t states;
  };
  // 27, 162 and 768 states
  for (const auto& c : {Case{"fn f ( ID0 ) { # ~ return ID0 ; }", Pools{3, 2, 2}, 27},
                        Case{kSmall, Pools{3, 2, 2}, 162}, Case{kSmall, Pools{4, 3, 3}, 768}}) {
    auto g = enumerate_space(parse_text(c.src), RuleSet::ergodic(c.pools), 5000);
    ASSERT_EQ(g.size(), c.states);
    auto P = transition_matrix(g);
    auto pi = stationary(P);
    EXPECT_LT(max_abs_diff(pi, degree_stationary(g)), 1e-9);
    EXPECT_LT(tv_distance(step_distribution(P, pi), pi), 10 * kStationaryTol);
  }
}

TEST(Stationary, RejectsNonErgodicAndAsymmetric) {
  // two disconnected self-loops
  auto split = Graph::from_edges(2, {{0, 0, 1}, {1, 1, 1}});
  EXPECT_THROW(stationary(transition_matrix(split)), NotErgodic);
  // bipartite 2-cycle: period 2
  auto flip = Graph::from_edges(2, {{0, 1, 1}, {1, 0, 1}});
  EXPECT_THROW(stationary(transition_matrix(flip)), NotErgodic);
  auto lopsided = Graph::from_edges(2, {{0, 0, 1}, {0, 1, 2}, {1, 0, 1}});
  EXPECT_THROW(degree_stationary(lopsided), DegreeAsymmetry);
}

TEST(Mixing, TwoStateExamples) {
  auto P = transition_matrix(two_state());
  Distribution pi{0.5, 0.5};
  auto r = mixing_time(P, 0, pi, 0.01);
  EXPECT_EQ(r.t_mix, 1);
  EXPECT_DOUBLE_EQ(r.tv_trace.back(), 0.0);
  EXPECT_EQ(mixing_time(P, 0, pi, 0.5).t_mix, 0);
  EXPECT_THROW(mixing_time(P, 0, pi, 0.0), InvalidArgument);
  auto flip = transition_matrix(Graph::from_edges(2, {{0, 1, 1}, {1, 0, 1}}));
  EXPECT_THROW(mixing_time(flip, 0, pi, 0.1, 1000), NotConverged);
}

TEST(Mixing, MonotoneInEpsilon) {
  auto g = small_graph();
  auto P = transition_matrix(g);
  auto pi = degree_stationary(g);
  for (std::size_t start : {std::size_t{0}, g.size() / 2, g.size() - 1}) {
    std::int64_t prev = 0;
    for (double eps : {0.5, 0.25, 0.1, 0.05, 0.01, 0.001}) {
      auto r = mixing_time(P, start, pi, eps);
      EXPECT_GE(r.t_mix, prev);
      EXPECT_LE(r.tv_trace.back(), eps);
      if (r.t_mix > 0) {
        EXPECT_GT(r.tv_trace[static_cast<std::size_t>(r.t_mix - 1)], eps);
      }
      prev = r.t_mix;
    }
  }
}

TEST(Ergodic, Checks) {
  auto ok = check_irreducible_aperiodic(small_graph());
  EXPECT_TRUE(ok.ok());
  EXPECT_TRUE(ok.self_loops);
  EXPECT_LT(ok.start_agreement_tv, 1e-8);

  // one self-loop removed: other loops keep the chain aperiodic
  auto one_loop_gone = Graph::from_edges(3, {{0, 1, 1}, {0, 2, 1}, {1, 1, 1}, {1, 0, 1}, {2, 2, 1}, {2, 0, 1}});
  auto r1 = check_irreducible_aperiodic(one_loop_gone);
  EXPECT_FALSE(r1.self_loops);
  EXPECT_TRUE(r1.aperiodic);
  // no self-loop on a bipartite graph: flagged
  auto bipartite = Graph::from_edges(2, {{0, 1, 1}, {1, 0, 1}});
  auto r2 = check_irreducible_aperiodic(bipartite, 1000);
  EXPECT_FALSE(r2.aperiodic);
  EXPECT_FALSE(r2.ok());

  // two tasks unioned: disconnected
  auto a = enumerate_space(parse_text("fn f ( ID0 ) { # return ID0 ; }"), RuleSet::ergodic(small_pools()), 100);
  std::vector<std::tuple<std::size_t, std::size_t, std::int64_t>> edges;
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t k = a.row_ptr[i]; k < a.row_ptr[i + 1]; ++k) {
      edges.emplace_back(i, a.col[k], a.count[k]);
      edges.emplace_back(i + a.size(), a.col[k] + a.size(), a.count[k]);
    }
  }
  auto r3 = check_irreducible_aperiodic(Graph::from_edges(2 * a.size(), edges));
  EXPECT_FALSE(r3.irreducible);
  EXPECT_FALSE(r3.ok());
}

TEST(Partition, IdenticalOrDisjoint) {
  auto rs = RuleSet::ergodic(small_pools());
  auto p = parse_text(kSmall);
  auto q = parse_text("fn f ( ID2 ) { # W1 let ID0 = ID2 ; # ~ D0 return ID0 ; }");
  auto other = parse_text("fn f ( ID0 ) { # let ID1 = ID0 + 1 ; # ~ return ID1 ; }");
  auto r = check_partition({p, q, other}, rs, 1000);
  EXPECT_EQ(r.violations, 0u);
  EXPECT_EQ(r.identical_pairs, 1u);
  EXPECT_EQ(r.disjoint_pairs, 2u);
  EXPECT_EQ(r.cell_of_seed, (std::vector<int>{0, 0, 1}));
  EXPECT_EQ(r.cell_sizes, (std::vector<std::size_t>{162, 162}));
  auto single = check_partition({p}, rs, 1000);
  EXPECT_EQ(single.cell_sizes.size(), 1u);
  EXPECT_THROW(check_partition({p}, rs, 10), CapExceeded);
}

TEST(Partition, CompactTasks) {
  auto bundles = model::compact_bundles();
  auto rs = RuleSet::ergodic(Pools{4, 2, 2});
  Rng rng(5);
  std::vector<lang::Program> seeds;
  for (const auto& b : bundles) {
    for (int i = 0; i < 3; ++i) seeds.push_back(model::generate(b.tmpl, rng));
  }
  auto r = check_partition(seeds, rs, 5000);
  EXPECT_EQ(r.violations, 0u);
  EXPECT_GE(r.cell_sizes.size(), bundles.size());
}

TEST(Congestion, TwoState) {
  auto g = two_state();
  auto P = transition_matrix(g);
  auto pi = degree_stationary(g);
  auto rep = canonical_paths_and_congestion(g, pi, P);
  ASSERT_TRUE(rep.applicable);
  EXPECT_NEAR(rep.rho, 1.0, 1e-12);
  EXPECT_NEAR(rep.bound(0.01, 0), 2 * (2 * std::log(100.0) + std::log(2.0)), 1e-12);
  EXPECT_NEAR(rep.bound(0.01, 0), 19.80, 0.01);
  EXPECT_LE(mixing_time(P, 0, pi, 0.01).t_mix, rep.bound(0.01, 0));
}

TEST(Congestion, SingleStateNotApplicable) {
  auto g = enumerate_space(parse_text(kSmall), RuleSet::empty_only(), 10);
  auto rep = canonical_paths_and_congestion(g, {1.0}, transition_matrix(g));
  EXPECT_FALSE(rep.applicable);
  EXPECT_EQ(rep.rho, 0.0);
  EXPECT_THROW(rep.bound(0.01, 0), InvalidArgument);
}

TEST(Congestion, QueuePathsFollowConvention) {
  Pools pl{3, 2, 2};
  lang::ReceptorState a{{0, -1}, {1}, {0, 1}}, b{{1, 0}, {-1}, {1, 0}};
  auto path = queue_path(a, b, pl);
  EXPECT_EQ(path.front(), a);
  EXPECT_EQ(path.back(), b);
  // comment 0: del + add, comment 1: add, dead: del, names swap via the free name 2
  EXPECT_EQ(path.size(), 1u + 2 + 1 + 1 + 3);
  for (std::size_t k = 0; k + 1 < path.size(); ++k) {
    int changed = 0;
    for (std::size_t i = 0; i < 2; ++i) changed += path[k].comments[i] != path[k + 1].comments[i];
    changed += path[k].dead[0] != path[k + 1].dead[0];
    for (std::size_t i = 0; i < 2; ++i) changed += path[k].names[i] != path[k + 1].names[i];
    EXPECT_EQ(changed, 1);
  }
}

TEST(Congestion, BoundHoldsOnEnumeratedSpaces) {
  for (const auto& [src, pools] : std::vector<std::pair<const char*, Pools>>{
           {"fn f ( ID0 ) { # ~ return ID0 ; }", Pools{3, 2, 2}},
           {kSmall, Pools{3, 2, 2}},
           {kSmall, Pools{4, 3, 3}}}) {
    auto g = enumerate_space(parse_text(src), RuleSet::ergodic(pools), 5000);
    auto P = transition_matrix(g);
    auto pi = degree_stationary(g);
    auto rep = canonical_paths_and_congestion(g, pi, P);
    ASSERT_TRUE(rep.applicable);
    EXPECT_GT(rep.rho, 0.0);
    EXPECT_EQ(rep.profile.receptors, g.states[0].receptor_count());
    for (std::size_t s = 0; s < g.size(); ++s) {
      for (double eps : {0.1, 0.01}) {
        EXPECT_LE(static_cast<double>(mixing_time(P, s, pi, eps).t_mix), rep.bound(eps, s)) << src << " " << s;
      }
    }
  }
}

TEST(Congestion, SyntheticUsesShortestPaths) {
  auto g = three_cycle();
  auto P = transition_matrix(g);
  auto pi = degree_stationary(g);
  auto rep = canonical_paths_and_congestion(g, pi, P, 2);
  EXPECT_EQ(rep.max_path_length, 2u);
  EXPECT_EQ(rep.pairs, 6u);
  // edge 0->1 carries (0,1) with length 1 and (0,2), (2,1) with length 2
  const double third = 1.0 / 3;
  EXPECT_NEAR(rep.rho, (third * third * (1 + 2 + 2)) / (third * 0.5), 1e-12);
  EXPECT_THROW(canonical_paths_and_congestion(g, {1.0}, P), DimensionMismatch);
}

TEST(Walk, OccupancyMatchesStationary) {
  auto g = small_graph();
  auto P = transition_matrix(g);
  auto pi = degree_stationary(g);
  const auto& rs = *g.rule_set;
  const auto t = mixing_time(P, 0, pi, 0.01).t_mix;
  Rng rng(9);
  std::vector<double> occ(g.size(), 0.0), occ_long(g.size(), 0.0);
  const int walks = 100000;
  for (int w = 0; w < walks; ++w) {
    auto s = g.states[0];
    rules::random_walk_state(s, rs, t, rng);
    occ[g.index.at(s)] += 1.0 / walks;
    rules::random_walk_state(s, rs, 4 * t, rng);
    occ_long[g.index.at(s)] += 1.0 / walks;
  }
  EXPECT_LT(tv_distance(occ, pi), 0.03);
  EXPECT_LT(tv_distance(occ_long, pi), 0.02);
}

TEST(Dump, Json) {
  auto j = graph_to_json(two_state());
  EXPECT_EQ(j["edges"].size(), 4u);
  EXPECT_DOUBLE_EQ(j["edges"][1][2].get<double>(), 0.5);
  auto s = graph_to_json(small_graph());
  EXPECT_EQ(s["states"].size(), 162u);
}
