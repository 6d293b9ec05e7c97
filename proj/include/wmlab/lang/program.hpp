#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "wmlab/core.hpp"
#include "wmlab/lang/vocabulary.hpp"

namespace wmlab::lang {

using TokenSeq = std::vector<TokenId>;

class UnknownLexeme : public Error {
 public:
  UnknownLexeme(std::size_t position, const std::string& lexeme)
      : Error("UnknownLexeme", "'" + lexeme + "' at lexeme " + std::to_string(position)),
        position_(position) {}
  std::size_t position() const noexcept { return position_; }

 private:
  std::size_t position_;
};

class SyntaxError : public Error {
 public:
  SyntaxError(std::size_t position, std::vector<std::string> expected)
      : Error("SyntaxError", describe(position, expected)),
        position_(position),
        expected_(std::move(expected)) {}
  std::size_t position() const noexcept { return position_; }
  const std::vector<std::string>& expected() const noexcept { return expected_; }

 private:
  static std::string describe(std::size_t pos, const std::vector<std::string>& exp) {
    std::string s = "at token " + std::to_string(pos) + ", expected one of:";
    for (const auto& e : exp) s += " " + e;
    return s;
  }
  std::size_t position_;
  std::vector<std::string> expected_;
};

/// Splits whitespace-separated source text into vocabulary ids.
inline TokenSeq lex(std::string_view text, const Vocabulary& vocab = Vocabulary::standard()) {
  TokenSeq out;
  std::size_t i = 0, n = 0;
  auto is_space = [](char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; };
  while (i < text.size()) {
    while (i < text.size() && is_space(text[i])) ++i;
    if (i >= text.size()) break;
    std::size_t j = i;
    while (j < text.size() && !is_space(text[j])) ++j;
    auto lexeme = text.substr(i, j - i);
    auto id = vocab.find(lexeme);
    if (!id) throw UnknownLexeme(n, std::string(lexeme));
    out.push_back(*id);
    ++n;
    i = j;
  }
  return out;
}

inline std::string to_text(const TokenSeq& tokens, const Vocabulary& vocab = Vocabulary::standard()) {
  std::string s;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) s += ' ';
    s += vocab.spelling(tokens[i]);
  }
  return s;
}

// ---------------------------------------------------------------------------
// Syntax tree. Nodes live in flat arrays inside FunctionAst and refer to each
// other by index; variables are numbered by first appearance.

enum class BinOp { Add, Sub, Mul, Div, Mod, Lt, Le, Gt, Ge, Eq, Ne };

struct ExprNode {
  enum Kind { Literal, Var, Neg, Binary } kind = Literal;
  BinOp op = BinOp::Add;
  std::int64_t value = 0;
  int var = -1;
  int lhs = -1, rhs = -1;
};

struct StmtNode {
  enum Kind { Let, Assign, If, While, Return, Comment, Dead } kind = Let;
  int var = -1;
  int expr = -1;
  std::vector<int> body;       // if-then / while body
  std::vector<int> else_body;  // if-else
  bool has_else = false;
  int slot = -1;     // comment or dead slot index
  int payload = -1;  // word / snippet pool index, -1 for an empty slot
};

struct FunctionAst {
  std::vector<int> params;
  std::vector<int> body;
  std::vector<ExprNode> exprs;
  std::vector<StmtNode> stmts;
};

/// Receptor metadata: the pre-declared slots and variables that
/// transformation rules may act on.
struct CommentSlot {
  std::size_t marker_pos = 0;
  int word = -1;  // -1: empty
};

struct DeadSlot {
  std::size_t marker_pos = 0;
  int snippet = -1;  // -1: empty
};

struct Variable {
  int name = -1;  // identifier pool index
  std::vector<std::size_t> occurrences;
};

/// Token stream with every receptor abstracted into a placeholder.
struct SkeletonPiece {
  enum Kind { Fixed, CommentSlot, DeadSlot, Var } kind = Fixed;
  TokenId token = 0;  // Fixed
  int index = 0;      // slot or variable index
};
using Skeleton = std::vector<SkeletonPiece>;

/// Per-receptor state: word / snippet pool index (or -1 for an empty slot)
/// and the identifier pool index assigned to each variable.
struct ReceptorState {
  std::vector<int> comments;
  std::vector<int> dead;
  std::vector<int> names;

  friend bool operator==(const ReceptorState&, const ReceptorState&) = default;
  friend auto operator<=>(const ReceptorState&, const ReceptorState&) = default;

  std::size_t receptor_count() const noexcept { return comments.size() + dead.size() + names.size(); }
};

struct ReceptorStateHash {
  std::size_t operator()(const ReceptorState& s) const noexcept {
    std::uint64_t h = 0x51ED270B27E4C5A3ULL;
    auto fold = [&h](const std::vector<int>& v) {
      for (int x : v) h = mix64(h ^ (static_cast<std::uint64_t>(x + 2) * kGolden));
      h = mix64(h + 0x1F);
    };
    fold(s.comments);
    fold(s.dead);
    fold(s.names);
    return static_cast<std::size_t>(h);
  }
};

namespace detail {

class Parser {
 public:
  Parser(const TokenSeq& toks, const Vocabulary& vocab) : t_(toks), v_(vocab) {}

  void run(FunctionAst& ast, std::vector<CommentSlot>& comments, std::vector<DeadSlot>& dead,
           std::vector<Variable>& vars) {
    ast_ = &ast;
    comments_ = &comments;
    dead_ = &dead;
    vars_ = &vars;
    expect(Kw::Fn);
    expect(Kw::F);
    expect(Kw::LParen);
    if (!at(Kw::RParen)) {
      ast.params.push_back(declare());
      while (accept(Kw::Comma)) ast.params.push_back(declare());
    }
    expect(Kw::RParen);
    ast.body = block();
    if (pos_ != t_.size()) fail({"<end of program>"});
  }

 private:
  bool at_end() const { return pos_ >= t_.size(); }
  bool at(Kw k) const { return !at_end() && t_[pos_] == Vocabulary::keyword(k); }
  bool accept(Kw k) {
    if (at(k)) {
      ++pos_;
      return true;
    }
    return false;
  }
  void expect(Kw k) {
    if (!accept(k)) fail({std::string(kKeywordSpelling[static_cast<std::size_t>(k)])});
  }
  [[noreturn]] void fail(std::vector<std::string> expected) const { throw SyntaxError(pos_, std::move(expected)); }

  int lookup(int name) const {
    for (std::size_t i = 0; i < vars_->size(); ++i) {
      if ((*vars_)[i].name == name) return static_cast<int>(i);
    }
    return -1;
  }

  int declare() {
    int name = at_end() ? -1 : v_.identifier_index(t_[pos_]);
    if (name < 0) fail({"<identifier>"});
    if (lookup(name) >= 0) fail({"<fresh identifier>"});
    vars_->push_back(Variable{name, {pos_}});
    ++pos_;
    return static_cast<int>(vars_->size()) - 1;
  }

  int use() {
    int name = at_end() ? -1 : v_.identifier_index(t_[pos_]);
    if (name < 0) fail({"<identifier>"});
    int var = lookup(name);
    if (var < 0) fail({"<declared identifier>"});
    (*vars_)[static_cast<std::size_t>(var)].occurrences.push_back(pos_);
    ++pos_;
    return var;
  }

  std::vector<int> block() {
    expect(Kw::LBrace);
    std::vector<int> out;
    while (!at(Kw::RBrace)) {
      if (at_end()) fail({"}"});
      out.push_back(statement());
    }
    expect(Kw::RBrace);
    return out;
  }

  int push(StmtNode s) {
    ast_->stmts.push_back(std::move(s));
    return static_cast<int>(ast_->stmts.size()) - 1;
  }

  int statement() {
    StmtNode s;
    if (accept(Kw::Let)) {
      s.kind = StmtNode::Let;
      s.var = declare();
      expect(Kw::Assign);
      s.expr = expr();
      expect(Kw::Semi);
    } else if (accept(Kw::If)) {
      s.kind = StmtNode::If;
      expect(Kw::LParen);
      s.expr = expr();
      expect(Kw::RParen);
      s.body = block();
      if (accept(Kw::Else)) {
        s.has_else = true;
        s.else_body = block();
      }
    } else if (accept(Kw::While)) {
      s.kind = StmtNode::While;
      expect(Kw::LParen);
      s.expr = expr();
      expect(Kw::RParen);
      s.body = block();
    } else if (accept(Kw::Return)) {
      s.kind = StmtNode::Return;
      s.expr = expr();
      expect(Kw::Semi);
    } else if (at(Kw::Hash)) {
      s.kind = StmtNode::Comment;
      CommentSlot slot{pos_, -1};
      ++pos_;
      if (!at_end() && v_.word_index(t_[pos_]) >= 0) slot.word = v_.word_index(t_[pos_++]);
      s.slot = static_cast<int>(comments_->size());
      s.payload = slot.word;
      comments_->push_back(slot);
    } else if (at(Kw::Tilde)) {
      s.kind = StmtNode::Dead;
      DeadSlot slot{pos_, -1};
      ++pos_;
      if (!at_end() && v_.snippet_index(t_[pos_]) >= 0) slot.snippet = v_.snippet_index(t_[pos_++]);
      s.slot = static_cast<int>(dead_->size());
      s.payload = slot.snippet;
      dead_->push_back(slot);
    } else if (!at_end() && v_.identifier_index(t_[pos_]) >= 0) {
      s.kind = StmtNode::Assign;
      s.var = use();
      expect(Kw::Assign);
      s.expr = expr();
      expect(Kw::Semi);
    } else {
      fail({"let", "if", "while", "return", "#", "~", "<identifier>"});
    }
    return push(std::move(s));
  }

  int node(ExprNode e) {
    ast_->exprs.push_back(e);
    return static_cast<int>(ast_->exprs.size()) - 1;
  }

  int expr() {
    int lhs = additive();
    static constexpr std::pair<Kw, BinOp> rel[] = {{Kw::Lt, BinOp::Lt}, {Kw::Le, BinOp::Le}, {Kw::Gt, BinOp::Gt},
                                                   {Kw::Ge, BinOp::Ge}, {Kw::Eq, BinOp::Eq}, {Kw::Ne, BinOp::Ne}};
    for (auto [k, op] : rel) {
      if (accept(k)) {
        int rhs = additive();
        return node({ExprNode::Binary, op, 0, -1, lhs, rhs});
      }
    }
    return lhs;
  }

  int additive() {
    int lhs = multiplicative();
    for (;;) {
      if (accept(Kw::Plus)) {
        lhs = node({ExprNode::Binary, BinOp::Add, 0, -1, lhs, multiplicative()});
      } else if (accept(Kw::Minus)) {
        lhs = node({ExprNode::Binary, BinOp::Sub, 0, -1, lhs, multiplicative()});
      } else {
        return lhs;
      }
    }
  }

  int multiplicative() {
    int lhs = unary();
    for (;;) {
      if (accept(Kw::Star)) {
        lhs = node({ExprNode::Binary, BinOp::Mul, 0, -1, lhs, unary()});
      } else if (accept(Kw::Slash)) {
        lhs = node({ExprNode::Binary, BinOp::Div, 0, -1, lhs, unary()});
      } else if (accept(Kw::Percent)) {
        lhs = node({ExprNode::Binary, BinOp::Mod, 0, -1, lhs, unary()});
      } else {
        return lhs;
      }
    }
  }

  int unary() {
    if (accept(Kw::Minus)) {
      int inner = unary();
      return node({ExprNode::Neg, BinOp::Add, 0, -1, inner, -1});
    }
    return primary();
  }

  int primary() {
    if (accept(Kw::LParen)) {
      int e = expr();
      expect(Kw::RParen);
      return e;
    }
    if (!at_end()) {
      int lit = v_.literal_value(t_[pos_]);
      if (lit >= 0) {
        ++pos_;
        return node({ExprNode::Literal, BinOp::Add, lit, -1, -1, -1});
      }
      if (v_.identifier_index(t_[pos_]) >= 0) {
        int var = use();
        return node({ExprNode::Var, BinOp::Add, 0, var, -1, -1});
      }
    }
    fail({"<literal>", "<identifier>", "(", "-"});
  }

  const TokenSeq& t_;
  const Vocabulary& v_;
  std::size_t pos_ = 0;
  FunctionAst* ast_ = nullptr;
  std::vector<CommentSlot>* comments_ = nullptr;
  std::vector<DeadSlot>* dead_ = nullptr;
  std::vector<Variable>* vars_ = nullptr;
};

}  // namespace detail

/// A parsed MiniLang function. Immutable; copies share the syntax tree.
/// Two programs are equal iff their token sequences are equal (the tree is
/// a pure function of the tokens).
class Program {
 public:
  const TokenSeq& tokens() const noexcept { return *tokens_; }
  const FunctionAst& ast() const noexcept { return *ast_; }
  const std::vector<CommentSlot>& comment_slots() const noexcept { return *comments_; }
  const std::vector<DeadSlot>& dead_slots() const noexcept { return *dead_; }
  const std::vector<Variable>& variables() const noexcept { return *vars_; }
  std::size_t param_count() const noexcept { return ast_->params.size(); }
  std::size_t size() const noexcept { return tokens_->size(); }

  ReceptorState receptor_state() const {
    ReceptorState s;
    for (const auto& c : *comments_) s.comments.push_back(c.word);
    for (const auto& d : *dead_) s.dead.push_back(d.snippet);
    for (const auto& v : *vars_) s.names.push_back(v.name);
    return s;
  }

  Skeleton skeleton() const {
    const auto& toks = *tokens_;
    std::vector<int> var_at(toks.size(), -1);
    for (std::size_t i = 0; i < vars_->size(); ++i) {
      for (auto p : (*vars_)[i].occurrences) var_at[p] = static_cast<int>(i);
    }
    Skeleton sk;
    std::size_t ci = 0, di = 0;
    for (std::size_t p = 0; p < toks.size(); ++p) {
      if (var_at[p] >= 0) {
        sk.push_back({SkeletonPiece::Var, 0, var_at[p]});
      } else if (ci < comments_->size() && (*comments_)[ci].marker_pos == p) {
        sk.push_back({SkeletonPiece::CommentSlot, 0, static_cast<int>(ci)});
        if ((*comments_)[ci].word >= 0) ++p;
        ++ci;
      } else if (di < dead_->size() && (*dead_)[di].marker_pos == p) {
        sk.push_back({SkeletonPiece::DeadSlot, 0, static_cast<int>(di)});
        if ((*dead_)[di].snippet >= 0) ++p;
        ++di;
      } else {
        sk.push_back({SkeletonPiece::Fixed, toks[p], 0});
      }
    }
    return sk;
  }

  friend bool operator==(const Program& a, const Program& b) { return a.tokens() == b.tokens(); }
  friend bool operator<(const Program& a, const Program& b) { return a.tokens() < b.tokens(); }

  std::string text() const { return to_text(*tokens_); }

 private:
  friend Program parse(const TokenSeq&, const Vocabulary&);
  Program() = default;

  std::shared_ptr<const TokenSeq> tokens_;
  std::shared_ptr<const FunctionAst> ast_;
  std::shared_ptr<const std::vector<CommentSlot>> comments_;
  std::shared_ptr<const std::vector<DeadSlot>> dead_;
  std::shared_ptr<const std::vector<Variable>> vars_;
};

inline Program parse(const TokenSeq& tokens, const Vocabulary& vocab = Vocabulary::standard()) {
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (tokens[i] < 0 || tokens[i] >= vocab.size()) throw SyntaxError(i, {"<vocabulary token>"});
  }
  auto ast = std::make_shared<FunctionAst>();
  auto comments = std::make_shared<std::vector<CommentSlot>>();
  auto dead = std::make_shared<std::vector<DeadSlot>>();
  auto vars = std::make_shared<std::vector<Variable>>();
  detail::Parser(tokens, vocab).run(*ast, *comments, *dead, *vars);
  Program p;
  p.tokens_ = std::make_shared<const TokenSeq>(tokens);
  p.ast_ = std::move(ast);
  p.comments_ = std::move(comments);
  p.dead_ = std::move(dead);
  p.vars_ = std::move(vars);
  return p;
}

inline Program parse_text(std::string_view text) { return parse(lex(text)); }

inline const TokenSeq& serialize(const Program& p) noexcept { return p.tokens(); }

/// Fills the skeleton's placeholders from `state`.
inline TokenSeq materialize_tokens(const Skeleton& sk, const ReceptorState& state) {
  const auto& v = Vocabulary::standard();
  TokenSeq out;
  out.reserve(sk.size() + state.comments.size() + state.dead.size());
  for (const auto& piece : sk) {
    switch (piece.kind) {
      case SkeletonPiece::Fixed:
        out.push_back(piece.token);
        break;
      case SkeletonPiece::Var:
        out.push_back(v.identifier(state.names.at(static_cast<std::size_t>(piece.index))));
        break;
      case SkeletonPiece::CommentSlot: {
        out.push_back(Vocabulary::keyword(Kw::Hash));
        int w = state.comments.at(static_cast<std::size_t>(piece.index));
        if (w >= 0) out.push_back(v.word(w));
        break;
      }
      case SkeletonPiece::DeadSlot: {
        out.push_back(Vocabulary::keyword(Kw::Tilde));
        int s = state.dead.at(static_cast<std::size_t>(piece.index));
        if (s >= 0) out.push_back(v.snippet(s));
        break;
      }
    }
  }
  return out;
}

inline Program materialize(const Skeleton& sk, const ReceptorState& state) {
  return parse(materialize_tokens(sk, state));
}

}  // namespace wmlab::lang

template <>
struct std::hash<wmlab::lang::Program> {
  std::size_t operator()(const wmlab::lang::Program& p) const noexcept {
    std::uint64_t h = 0xA0761D6478BD642FULL;
    for (auto t : p.tokens()) h = wmlab::mix64(h ^ static_cast<std::uint64_t>(t + 1));
    return static_cast<std::size_t>(h);
  }
};
