#include <gtest/gtest.h>

#include <cmath>
#include <map>

#include "wmlab/lang/task.hpp"
#include "wmlab/model/catalog.hpp"

using namespace wmlab;
using namespace wmlab::model;

namespace {

const lang::Vocabulary& V() { return lang::Vocabulary::standard(); }

// Four-way uniform identifier choice followed by fixed tokens.
Template four_way() {
  Template t{"toy", {}, 1};
  t.script.push_back({Fixed{lang::Vocabulary::keyword(lang::Kw::Fn)}});
  t.script.push_back({Fixed{lang::Vocabulary::keyword(lang::Kw::F)}});
  t.script.push_back({Fixed{lang::Vocabulary::keyword(lang::Kw::LParen)}});
  t.script.push_back({Bind{0, {V().identifier(0), V().identifier(1), V().identifier(2), V().identifier(3)},
                           {0.25, 0.25, 0.25, 0.25}}});
  for (auto k : {lang::Kw::RParen, lang::Kw::LBrace, lang::Kw::Return}) t.script.push_back({Fixed{lang::Vocabulary::keyword(k)}});
  t.script.push_back({Use{0}});
  for (auto k : {lang::Kw::Semi, lang::Kw::RBrace}) t.script.push_back({Fixed{lang::Vocabulary::keyword(k)}});
  return t;
}

}  // namespace

TEST(Entropy, Values) {
  EXPECT_DOUBLE_EQ(entropy(Categorical::point(3)), 0.0);
  EXPECT_NEAR(entropy({{1, 2}, {0.5, 0.5}}), 0.6931, 5e-5);
  EXPECT_NEAR(entropy({{1, 2, 3}, {0.5, 0.25, 0.25}}), 1.0397, 5e-5);
  EXPECT_NEAR(entropy({{1, 2, 3, 4}, {0.25, 0.25, 0.25, 0.25}}), 1.3863, 5e-5);
  EXPECT_DOUBLE_EQ(entropy({{1, 2}, {1.0, 0.0}}), 0.0);
}

TEST(Entropy, RejectsNonDistributions) {
  EXPECT_THROW(entropy({{1, 2}, {0.5, 0.6}}), NotADistribution);
  EXPECT_THROW(entropy({{}, {}}), NotADistribution);
  EXPECT_THROW(entropy({{1, 2}, {1.5, -0.5}}), NotADistribution);
}

TEST(BaseDistribution, FixedAndChoice) {
  auto t = four_way();
  lang::TokenSeq prefix;
  auto d0 = base_next_distribution(t, prefix);
  EXPECT_TRUE(d0.is_point_mass());
  EXPECT_EQ(entropy(d0), 0.0);
  prefix = {lang::Vocabulary::keyword(lang::Kw::Fn), lang::Vocabulary::keyword(lang::Kw::F),
            lang::Vocabulary::keyword(lang::Kw::LParen)};
  auto d = base_next_distribution(t, prefix);
  ASSERT_EQ(d.size(), 4u);
  for (double w : d.weights) EXPECT_DOUBLE_EQ(w, 0.25);
  EXPECT_NEAR(entropy(d), std::log(4.0), 1e-12);
}

TEST(BaseDistribution, InvalidPrefix) {
  auto t = four_way();
  lang::TokenSeq bad{lang::Vocabulary::keyword(lang::Kw::F)};
  EXPECT_THROW(base_next_distribution(t, bad), InvalidPrefix);
  auto full = generate_tokens(t, [](const Categorical& d, std::span<const TokenId>) { return d.tokens[0]; });
  EXPECT_THROW(base_next_distribution(t, full), InvalidPrefix);
  lang::TokenSeq wrong_use = full;
  wrong_use[7] = V().identifier(5);
  EXPECT_THROW(choice_points(t, wrong_use), InvalidPrefix);
}

TEST(BaseDistribution, BindExcludesBoundNames) {
  auto t = compile_template("x", "fn f ( $0 , $1 ) { return $0 + $1 ; }", {3, 2, 2, 0.5, 0.5});
  lang::TokenSeq prefix = lang::lex("fn f ( ID1 ,");
  auto d = base_next_distribution(t, prefix);
  ASSERT_EQ(d.size(), 2u);
  EXPECT_EQ(d.probability(V().identifier(1)), 0.0);
  EXPECT_DOUBLE_EQ(d.probability(V().identifier(0)), 0.5);
}

TEST(BaseDistribution, SlotDistributionIncludesSkip) {
  auto t = compile_template("x", "fn f ( ) { # return 1 ; }", {1, 4, 1, 0.8, 0.5});
  auto d = base_next_distribution(t, lang::lex("fn f ( ) { #"));
  ASSERT_EQ(d.size(), 5u);
  EXPECT_NEAR(d.probability(lang::Vocabulary::keyword(lang::Kw::Return)), 0.2, 1e-15);
  EXPECT_NEAR(d.probability(V().word(3)), 0.2, 1e-15);
}

TEST(Generate, DeterministicAndPassing) {
  for (const auto& b : default_bundles()) {
    for (std::uint64_t s = 0; s < 200; ++s) {
      Rng r1(s), r2(s);
      auto p = generate(b.tmpl, r1);
      EXPECT_EQ(p, generate(b.tmpl, r2));
      EXPECT_TRUE(lang::run_test_suite(b.task, p)) << b.task.id << ": " << p.text();
      EXPECT_EQ(lang::parse(lang::serialize(p)), p);
    }
  }
}

TEST(Generate, CompactTemplatesPass) {
  for (const auto& b : compact_bundles()) {
    Rng rng(5);
    for (int i = 0; i < 300; ++i) EXPECT_TRUE(lang::run_test_suite(b.task, generate(b.tmpl, rng)));
  }
}

TEST(Generate, FourWayFrequencies) {
  auto t = four_way();
  std::map<TokenId, int> counts;
  for (std::uint64_t s = 0; s < 10000; ++s) {
    Rng rng(derive_seed(77, s));
    counts[generate(t, rng).tokens()[3]]++;
  }
  ASSERT_EQ(counts.size(), 4u);
  for (auto [tok, c] : counts) EXPECT_NEAR(c / 10000.0, 0.25, 0.02);
}

TEST(Generate, ChoicePointBudget) {
  Rng rng(3);
  for (const auto& b : default_bundles()) {
    auto p = generate(b.tmpl, rng);
    EXPECT_GE(choice_points(b.tmpl, p.tokens()).size(), 12u) << b.task.id;
  }
}

TEST(Generate, PrefixConsistency) {
  auto t = compile_template("x", "fn f ( ) { # ~ return 1 ; }", {1, 4, 2, 0.6, 0.5});
  auto prefix = lang::lex("fn f ( ) { #");
  auto base = base_next_distribution(t, prefix);
  ASSERT_EQ(base.size(), 5u);
  std::map<TokenId, int> counts;
  const int n = 20000;
  Rng rng(9);
  for (int i = 0; i < n; ++i) counts[generate(t, rng).tokens()[prefix.size()]]++;
  for (std::size_t i = 0; i < base.size(); ++i) {
    EXPECT_NEAR(counts[base.tokens[i]] / static_cast<double>(n), base.weights[i], 0.012);
  }
}

TEST(Template, JsonRoundTrip) {
  for (const auto& b : default_bundles({8, 4, 2, 0.9, 0.5})) {
    auto j = template_to_json(b.tmpl);
    auto back = template_from_json(nlohmann::json::parse(j.dump()));
    EXPECT_EQ(back.var_count, b.tmpl.var_count);
    EXPECT_EQ(template_to_json(back), j);
    for (std::uint64_t s = 0; s < 20; ++s) {
      Rng r1(s), r2(s);
      EXPECT_EQ(generate(b.tmpl, r1), generate(back, r2));
    }
  }
}

TEST(Template, JsonChoiceFormat) {
  auto j = nlohmann::json::parse(R"({"task_id":"k","script":[{"fixed":0},{"fixed":1},{"fixed":7},{"fixed":8},
    {"fixed":9},{"fixed":6},{"choice":{"allowed":[92,93],"weights":[0.5,0.5]}},{"fixed":11},{"fixed":10}]})");
  auto t = template_from_json(j);
  Rng rng(1);
  auto p = generate(t, rng);
  EXPECT_TRUE(p.text() == "fn f ( ) { return 1 ; }" || p.text() == "fn f ( ) { return 2 ; }");
  EXPECT_THROW(template_from_json(nlohmann::json::parse(
                   R"({"task_id":"k","script":[{"choice":{"allowed":[1,2],"weights":[0.7,0.7]}}]})")),
               InvalidTemplate);
  EXPECT_THROW(template_from_json(nlohmann::json::parse(R"({"script":[]})")), InvalidTemplate);
}

TEST(Template, SourceErrors) {
  EXPECT_THROW(compile_template("x", "fn f ( ) { return @ ; }"), InvalidTemplate);
  EXPECT_THROW(compile_template("x", "fn f ( ) { return [ 1 | 2 ; }"), InvalidTemplate);
  EXPECT_THROW(compile_template("x", "fn f ( ) { return 1 | 2 ; }"), InvalidTemplate);
  EXPECT_THROW(compile_template("x", "fn f ( ) { let $0 = [ $1 | 2 ] ; }"), InvalidTemplate);
  EXPECT_THROW(compile_template("x", "fn f ( ) { }", {65, 4, 4, 0.5, 0.5}), InvalidTemplate);
}
