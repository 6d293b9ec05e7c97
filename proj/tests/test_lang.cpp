#include <gtest/gtest.h>

#include <set>

#include "wmlab/lang/interpreter.hpp"
#include "wmlab/lang/task.hpp"
#include "wmlab/model/catalog.hpp"

using namespace wmlab;
using namespace wmlab::lang;

namespace {

const Vocabulary& V() { return Vocabulary::standard(); }

TokenId kw(Kw k) { return Vocabulary::keyword(k); }

}  // namespace

TEST(Vocabulary, ContiguousAndDisjointPools) {
  const auto& v = V();
  EXPECT_GE(v.size(), 200);
  EXPECT_EQ(v.size(), 27 + 64 + 100 + 64 + 16);
  std::set<std::string> spellings;
  int ids = 0, lits = 0, words = 0, snips = 0;
  for (TokenId t = 0; t < v.size(); ++t) {
    spellings.insert(v.spelling(t));
    EXPECT_EQ(*v.find(v.spelling(t)), t);
    int memberships = (v.identifier_index(t) >= 0) + (v.literal_value(t) >= 0) + (v.word_index(t) >= 0) +
                      (v.snippet_index(t) >= 0);
    EXPECT_LE(memberships, 1);
    ids += v.identifier_index(t) >= 0;
    lits += v.literal_value(t) >= 0;
    words += v.word_index(t) >= 0;
    snips += v.snippet_index(t) >= 0;
  }
  EXPECT_EQ(spellings.size(), static_cast<std::size_t>(v.size()));
  EXPECT_EQ(ids, 64);
  EXPECT_EQ(lits, 100);
  EXPECT_EQ(words, 64);
  EXPECT_EQ(snips, 16);
  EXPECT_EQ(v.sentinel(), v.size());
}

TEST(Vocabulary, StableIds) {
  Vocabulary a, b;
  for (TokenId t = 0; t < a.size(); ++t) EXPECT_EQ(a.spelling(t), b.spelling(t));
  EXPECT_EQ(*a.find("ID0"), 27);
  EXPECT_EQ(*a.find("0"), 27 + 64);
  EXPECT_EQ(*a.find("W0"), 27 + 64 + 100);
  EXPECT_EQ(*a.find("D0"), 27 + 64 + 100 + 64);
}

TEST(Lex, EmptyInput) { EXPECT_TRUE(lex("").empty()); }

TEST(Lex, NineTokens) {
  auto t = lex("fn f ( ) { return 1 ; }");
  TokenSeq expected{kw(Kw::Fn), kw(Kw::F), kw(Kw::LParen), kw(Kw::RParen), kw(Kw::LBrace),
                    kw(Kw::Return), V().literal(1), kw(Kw::Semi), kw(Kw::RBrace)};
  EXPECT_EQ(t, expected);
}

TEST(Lex, UnknownLexemePosition) {
  try {
    lex("fn f ( ) { @ }");
    FAIL();
  } catch (const UnknownLexeme& e) {
    EXPECT_EQ(e.position(), 5u);
    EXPECT_EQ(e.code(), "UnknownLexeme");
  }
}

TEST(Lex, LineEndings) { EXPECT_EQ(lex("fn f\n(\t)\r\n{ return 0 ; }"), lex("fn f ( ) { return 0 ; }")); }

TEST(Parse, OneParamOneReturn) {
  auto p = parse_text("fn f ( ID0 ) { return ID0 ; }");
  EXPECT_EQ(p.param_count(), 1u);
  ASSERT_EQ(p.ast().body.size(), 1u);
  EXPECT_EQ(p.ast().stmts[static_cast<std::size_t>(p.ast().body[0])].kind, StmtNode::Return);
  EXPECT_EQ(p.variables().size(), 1u);
  EXPECT_EQ(p.variables()[0].occurrences.size(), 2u);
}

TEST(Parse, MissingExpression) {
  try {
    parse_text("fn f ( ) { return ; }");
    FAIL();
  } catch (const SyntaxError& e) {
    EXPECT_EQ(e.position(), 6u);
    EXPECT_FALSE(e.expected().empty());
  }
}

TEST(Parse, UseBeforeDeclare) {
  EXPECT_THROW(parse_text("fn f ( ) { return ID3 ; }"), SyntaxError);
  EXPECT_THROW(parse_text("fn f ( ID0 ) { let ID0 = 1 ; return ID0 ; }"), SyntaxError);
  EXPECT_THROW(parse_text("fn f ( ID0 , ID0 ) { return 1 ; }"), SyntaxError);
}

TEST(Parse, TrailingTokens) { EXPECT_THROW(parse_text("fn f ( ) { return 0 ; } ;"), SyntaxError); }

TEST(Parse, ComparisonDoesNotChain) { EXPECT_THROW(parse_text("fn f ( ) { return 1 < 2 < 3 ; }"), SyntaxError); }

TEST(Parse, SlotsRecorded) {
  auto p = parse_text("fn f ( ID0 ) { # W3 let ID1 = ID0 ; # ~ D2 return ID1 ; ~ }");
  ASSERT_EQ(p.comment_slots().size(), 2u);
  ASSERT_EQ(p.dead_slots().size(), 2u);
  EXPECT_EQ(p.comment_slots()[0].word, 3);
  EXPECT_EQ(p.comment_slots()[1].word, -1);
  EXPECT_EQ(p.dead_slots()[0].snippet, 2);
  EXPECT_EQ(p.dead_slots()[1].snippet, -1);
  auto rs = p.receptor_state();
  EXPECT_EQ(rs.comments, (std::vector<int>{3, -1}));
  EXPECT_EQ(rs.dead, (std::vector<int>{2, -1}));
  EXPECT_EQ(rs.names, (std::vector<int>{0, 1}));
}

TEST(Serialize, FramingTokens) {
  auto p = parse_text("fn f ( ) { return 0 ; }");
  const auto& t = serialize(p);
  ASSERT_EQ(t.size(), 9u);
  int framing = 0;
  for (auto id : t) framing += V().token_class(id) == TokenClass::Keyword;
  EXPECT_EQ(framing, 8);
}

TEST(Serialize, Idempotent) {
  auto p = parse_text("fn f ( ID0 , ID1 ) { # W1 let ID2 = ID0 * ID1 ; ~ D0 return ID2 ; }");
  EXPECT_EQ(serialize(parse(serialize(p))), serialize(p));
  auto q = parse_text(p.text());
  EXPECT_EQ(serialize(p), serialize(q));
  EXPECT_EQ(p, q);
}

TEST(Serialize, SkeletonRoundTrip) {
  auto p = parse_text("fn f ( ID4 ) { # W1 let ID9 = ID4 + 1 ; # ~ D3 ~ return ID9 ; }");
  EXPECT_EQ(materialize(p.skeleton(), p.receptor_state()), p);
  auto rs = p.receptor_state();
  rs.comments = {-1, 7};
  rs.dead = {-1, 0};
  rs.names = {2, 0};
  auto q = materialize(p.skeleton(), rs);
  EXPECT_EQ(q.receptor_state(), rs);
  EXPECT_EQ(q.text(), "fn f ( ID2 ) { # let ID0 = ID2 + 1 ; # W7 ~ ~ D0 return ID0 ; }");
}

TEST(Interpret, Identity) {
  auto p = parse_text("fn f ( ID0 ) { return ID0 ; }");
  EXPECT_EQ(interpret(p, {7}), EvalOutcome::ok(7));
}

TEST(Interpret, StepLimit) {
  auto p = parse_text("fn f ( ) { while ( 1 ) { } return 0 ; }");
  EXPECT_EQ(interpret(p, {}, 100).status, EvalOutcome::StepLimitExceeded);
}

TEST(Interpret, Arity) {
  auto p = parse_text("fn f ( ID0 ) { return ID0 ; }");
  EXPECT_THROW(interpret(p, {1, 2}), ArityMismatch);
}

TEST(Interpret, RuntimeErrors) {
  auto p = parse_text("fn f ( ID0 , ID1 ) { return ID0 / ID1 ; }");
  EXPECT_EQ(interpret(p, {1, 0}), EvalOutcome::runtime_error(RuntimeErrorKind::DivisionByZero));
  EXPECT_EQ(interpret(p, {INT64_MIN, -1}), EvalOutcome::runtime_error(RuntimeErrorKind::Overflow));
  auto m = parse_text("fn f ( ID0 ) { return ID0 * ID0 ; }");
  EXPECT_EQ(interpret(m, {INT64_C(4000000000)}), EvalOutcome::runtime_error(RuntimeErrorKind::Overflow));
  auto n = parse_text("fn f ( ID0 ) { return - ID0 ; }");
  EXPECT_EQ(interpret(n, {INT64_MIN}), EvalOutcome::runtime_error(RuntimeErrorKind::Overflow));
  auto r = parse_text("fn f ( ID0 ) { if ( ID0 ) { return 1 ; } }");
  EXPECT_EQ(interpret(r, {0}), EvalOutcome::runtime_error(RuntimeErrorKind::MissingReturn));
  auto u = parse_text("fn f ( ID0 ) { if ( ID0 ) { let ID1 = 1 ; } return ID1 ; }");
  EXPECT_EQ(interpret(u, {0}), EvalOutcome::runtime_error(RuntimeErrorKind::Uninitialized));
}

TEST(Interpret, Arithmetic) {
  auto p = parse_text("fn f ( ID0 ) { let ID1 = 0 - 7 % 3 + ID0 * ( 2 + 1 ) / 2 ; return ID1 >= 5 ; }");
  EXPECT_EQ(interpret(p, {4}), EvalOutcome::ok(1));  // -1 + 6
  EXPECT_EQ(interpret(p, {3}), EvalOutcome::ok(0));  // -1 + 4
}

TEST(Interpret, DeadCodeInert) {
  auto plain = parse_text("fn f ( ID0 ) { let ID1 = ID0 + 1 ; return ID1 ; }");
  auto dead = parse_text("fn f ( ID0 ) { ~ D3 let ID1 = ID0 + 1 ; # W2 ~ D15 return ID1 ; ~ D0 }");
  for (std::int64_t x : {std::int64_t{-5}, std::int64_t{0}, std::int64_t{1}, std::int64_t{99}, INT64_MAX}) EXPECT_EQ(interpret(plain, {x}), interpret(dead, {x}));
}

TEST(Interpret, SlotsDoNotConsumeSteps) {
  auto a = parse_text("fn f ( ) { let ID0 = 0 ; while ( ID0 < 10 ) { ID0 = ID0 + 1 ; } return ID0 ; }");
  auto b = parse_text(
      "fn f ( ) { let ID0 = 0 ; while ( ID0 < 10 ) { # W1 ~ D2 ID0 = ID0 + 1 ; ~ D1 } # return ID0 ; }");
  for (std::int64_t limit = 1; limit < 40; ++limit) EXPECT_EQ(interpret(a, {}, limit), interpret(b, {}, limit));
}

TEST(Interpret, StrippingSlotsPreservesOutcomes) {
  Rng rng(11);
  for (const auto& b : model::default_bundles()) {
    for (int i = 0; i < 50; ++i) {
      auto p = model::generate(b.tmpl, rng);
      auto rs = p.receptor_state();
      std::fill(rs.comments.begin(), rs.comments.end(), -1);
      std::fill(rs.dead.begin(), rs.dead.end(), -1);
      auto stripped = materialize(p.skeleton(), rs);
      for (const auto& tc : b.task.test_cases) {
        EXPECT_EQ(interpret(p, tc.inputs), interpret(stripped, tc.inputs));
      }
    }
  }
}

TEST(Task, ReferencePassesAndConstantFails) {
  Task t{"inc", "inc", {{{1}, 2}, {{5}, 6}, {{-3}, -2}}, 1000};
  EXPECT_TRUE(run_test_suite(t, parse_text("fn f ( ID0 ) { return ID0 + 1 ; }")));
  EXPECT_FALSE(run_test_suite(t, parse_text("fn f ( ID0 ) { return 0 ; }")));
  EXPECT_FALSE(run_test_suite(t, parse_text("fn f ( ID0 , ID1 ) { return ID0 + 1 ; }")));
  EXPECT_FALSE(run_test_suite(t, parse_text("fn f ( ID0 ) { while ( 1 ) { } return ID0 + 1 ; }")));
}

TEST(Task, ValidationAndJson) {
  Task t{"inc", "inc", {{{1}, 2}, {{5}, 6}}, 1000};
  EXPECT_THROW(t.validate(), ConfigError);
  t.test_cases.push_back({{0}, 1});
  nlohmann::json j = t;
  EXPECT_EQ(j.dump(), R"({"id":"inc","step_limit":1000,"template_ref":"inc","test_cases":[[[1],2],[[5],6],[[0],1]]})");
  Task back = j.get<Task>();
  EXPECT_EQ(back.id, "inc");
  EXPECT_EQ(back.test_cases.size(), 3u);
  EXPECT_EQ(back.test_cases[2].expected, 1);
  EXPECT_THROW(nlohmann::json::parse(R"({"id":"x","test_cases":[[[1],2]]})").get<Task>(), ConfigError);
  EXPECT_THROW(nlohmann::json::parse(R"({"test_cases":[]})").get<Task>(), ConfigError);
}

TEST(Task, PassAt1) {
  EXPECT_DOUBLE_EQ(pass_at_1({1, 1, 1, 1}), 1.0);
  EXPECT_DOUBLE_EQ(pass_at_1({1, 0, 1, 0}), 0.5);
  EXPECT_THROW(pass_at_1(std::span<const int>{}), EmptyInput);
  std::vector<int> r(164, 0);
  std::fill(r.begin(), r.begin() + 158, 1);
  EXPECT_NEAR(pass_at_1(r), 0.9634, 5e-5);
}

TEST(Task, BuiltinReferencesPass) {
  for (const auto& b : model::default_bundles()) {
    for (const auto& tc : b.task.test_cases) EXPECT_GE(tc.inputs.size(), 1u);
    EXPECT_GE(b.task.test_cases.size(), 3u);
  }
}
