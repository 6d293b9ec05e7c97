#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "wmlab/core.hpp"

namespace wmlab::lang {

using TokenId = std::int32_t;

enum class TokenClass { Keyword, Identifier, Literal, Word, Snippet };

/// Fixed keywords and punctuation, in id order.
enum class Kw : TokenId {
  Fn, F, Let, If, Else, While, Return,
  LParen, RParen, LBrace, RBrace, Semi, Comma, Assign,
  Plus, Minus, Star, Slash, Percent,
  Lt, Le, Gt, Ge, Eq, Ne,
  Hash,   // comment slot marker
  Tilde,  // dead-code slot marker
  Count_
};

inline constexpr std::array<std::string_view, static_cast<std::size_t>(Kw::Count_)> kKeywordSpelling = {
    "fn", "f", "let", "if", "else", "while", "return",
    "(", ")", "{", "}", ";", ",", "=",
    "+", "-", "*", "/", "%",
    "<", "<=", ">", ">=", "==", "!=",
    "#", "~"};

/// The finite token space. Ids are laid out as
///   [keywords | ID0..ID{i-1} | 0..{l-1} | W0..W{w-1} | D0..D{s-1}]
/// and are contiguous from 0. `sentinel()` (== size()) is reserved for
/// context padding and never produced by the lexer.
struct VocabularyPools {
  int identifiers = 64;
  int literals = 100;
  int words = 64;
  int snippets = 16;
};

class Vocabulary {
 public:
  using PoolSizes = VocabularyPools;

  Vocabulary() : Vocabulary(PoolSizes{}) {}

  explicit Vocabulary(PoolSizes pools) : pools_(pools) {
    if (pools.identifiers < 1 || pools.literals < 2 || pools.words < 1 || pools.snippets < 1) {
      throw InvalidArgument("vocabulary pools must be non-empty (literals >= 2)");
    }
    for (auto s : kKeywordSpelling) add(std::string(s));
    id_base_ = size();
    for (int i = 0; i < pools.identifiers; ++i) add("ID" + std::to_string(i));
    lit_base_ = size();
    for (int i = 0; i < pools.literals; ++i) add(std::to_string(i));
    word_base_ = size();
    for (int i = 0; i < pools.words; ++i) add("W" + std::to_string(i));
    snip_base_ = size();
    for (int i = 0; i < pools.snippets; ++i) add("D" + std::to_string(i));
    if (size() < 200) throw InvalidArgument("vocabulary must hold at least 200 tokens");
  }

  static const Vocabulary& standard() {
    static const Vocabulary v{};
    return v;
  }

  int size() const noexcept { return static_cast<int>(spelling_.size()); }
  TokenId sentinel() const noexcept { return size(); }
  const PoolSizes& pools() const noexcept { return pools_; }

  std::optional<TokenId> find(std::string_view lexeme) const {
    auto it = index_.find(std::string(lexeme));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  const std::string& spelling(TokenId t) const {
    check(t);
    return spelling_[static_cast<std::size_t>(t)];
  }

  TokenClass token_class(TokenId t) const {
    check(t);
    if (t < id_base_) return TokenClass::Keyword;
    if (t < lit_base_) return TokenClass::Identifier;
    if (t < word_base_) return TokenClass::Literal;
    if (t < snip_base_) return TokenClass::Word;
    return TokenClass::Snippet;
  }

  static constexpr TokenId keyword(Kw k) noexcept { return static_cast<TokenId>(k); }
  TokenId identifier(int k) const { return pooled(id_base_, pools_.identifiers, k); }
  TokenId literal(int v) const { return pooled(lit_base_, pools_.literals, v); }
  TokenId word(int k) const { return pooled(word_base_, pools_.words, k); }
  TokenId snippet(int k) const { return pooled(snip_base_, pools_.snippets, k); }

  /// Pool index of the token, or -1 if it belongs to another class.
  int identifier_index(TokenId t) const noexcept { return in_pool(t, id_base_, lit_base_); }
  int literal_value(TokenId t) const noexcept { return in_pool(t, lit_base_, word_base_); }
  int word_index(TokenId t) const noexcept { return in_pool(t, word_base_, snip_base_); }
  int snippet_index(TokenId t) const noexcept { return in_pool(t, snip_base_, size()); }

  bool is_keyword(TokenId t, Kw k) const noexcept { return t == keyword(k); }

 private:
  void add(std::string s) {
    index_.emplace(s, size());
    spelling_.push_back(std::move(s));
  }
  void check(TokenId t) const {
    if (t < 0 || t >= size()) throw InvalidArgument("token id out of range: " + std::to_string(t));
  }
  static TokenId pooled(TokenId base, int n, int k) {
    if (k < 0 || k >= n) throw InvalidArgument("pool index out of range: " + std::to_string(k));
    return base + k;
  }
  static int in_pool(TokenId t, TokenId lo, TokenId hi) noexcept {
    return (t >= lo && t < hi) ? static_cast<int>(t - lo) : -1;
  }

  PoolSizes pools_;
  std::vector<std::string> spelling_;
  std::unordered_map<std::string, TokenId> index_;
  TokenId id_base_ = 0, lit_base_ = 0, word_base_ = 0, snip_base_ = 0;
};

}  // namespace wmlab::lang
