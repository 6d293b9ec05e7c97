#pragma once

#include <algorithm>
#include <cstddef>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "wmlab/lang/program.hpp"
#include "wmlab/model/distribution.hpp"

namespace wmlab::model {

WMLAB_DEFINE_ERROR(InvalidPrefix);
WMLAB_DEFINE_ERROR(InvalidTemplate);

struct Element;
using Sequence = std::vector<Element>;

struct Fixed {
  TokenId token;
};
/// Free choice over `allowed`.
struct Choice {
  std::vector<TokenId> allowed;
  std::vector<double> weights;
};
/// Names variable `var`: a choice over identifier tokens that excludes names
/// already bound to other variables (weights renormalized).
struct Bind {
  int var;
  std::vector<TokenId> allowed;
  std::vector<double> weights;
};
/// Re-emits the name bound to `var`.
struct Use {
  int var;
};
/// Alternative emission sequences. The first tokens the branches can emit
/// must be pairwise disjoint so the emitted stream identifies the branch.
/// An empty branch emits nothing.
struct Alt {
  std::vector<Sequence> branches;
  std::vector<double> weights;
};

struct Element {
  std::variant<Fixed, Choice, Bind, Use, Alt> node;
};

/// Emission pools and slot fill rates used when compiling template sources.
struct TemplatePools {
  int identifiers = 64;
  int words = 64;
  int snippets = 16;
  double comment_fill = 0.9;
  double dead_fill = 0.5;
};

struct Template {
  std::string task_id;
  Sequence script;
  int var_count = 0;
};

/// Position of a non-deterministic emission.
struct ChoicePoint {
  std::size_t position = 0;
  Categorical dist;
};

/// Incremental walker over a template's emission script. `next()` gives the
/// exact distribution of the next token given everything emitted so far.
class Cursor {
 public:
  explicit Cursor(const Template& t) : t_(&t), bound_(static_cast<std::size_t>(t.var_count), -1) {
    frames_.push_back({&t.script, 0});
  }

  bool done() const {
    auto f = frames_;
    trim(f);
    return f.empty();
  }

  std::size_t emitted() const noexcept { return emitted_; }

  Categorical next() const {
    Accum acc;
    collect(frames_, 1.0, acc);
    if (acc.end > 0) {
      if (!acc.mass.empty()) throw InvalidTemplate("end of script mixed with token emissions");
      throw InvalidPrefix("template is complete; no next token");
    }
    Categorical d;
    double total = 0;
    for (auto& [tok, w] : acc.mass) total += w;
    for (auto& [tok, w] : acc.mass) {
      if (w <= 0) continue;
      d.tokens.push_back(tok);
      d.weights.push_back(w / total);
    }
    return d;
  }

  void advance(TokenId token) {
    advance_in(frames_, token);
    ++emitted_;
  }

 private:
  struct Frame {
    const Sequence* seq;
    std::size_t idx;
  };
  using Frames = std::vector<Frame>;

  struct Accum {
    std::map<TokenId, double> mass;
    double end = 0;
  };

  static void trim(Frames& f) {
    while (!f.empty() && f.back().idx >= f.back().seq->size()) f.pop_back();
  }

  std::vector<std::pair<TokenId, double>> bind_options(const Bind& b) const {
    std::vector<std::pair<TokenId, double>> out;
    double total = 0;
    for (std::size_t i = 0; i < b.allowed.size(); ++i) {
      if (std::find(bound_.begin(), bound_.end(), b.allowed[i]) != bound_.end()) continue;
      out.emplace_back(b.allowed[i], b.weights[i]);
      total += b.weights[i];
    }
    if (out.empty() || total <= 0) throw InvalidTemplate("bind has no free identifier left");
    for (auto& o : out) o.second /= total;
    return out;
  }

  TokenId binding(int var) const {
    TokenId t = bound_.at(static_cast<std::size_t>(var));
    if (t < 0) throw InvalidTemplate("use of unbound variable $" + std::to_string(var));
    return t;
  }

  void collect(Frames f, double w, Accum& acc) const {
    trim(f);
    if (f.empty()) {
      acc.end += w;
      return;
    }
    const Element& e = (*f.back().seq)[f.back().idx];
    std::visit(
        [&](const auto& n) {
          using T = std::decay_t<decltype(n)>;
          if constexpr (std::is_same_v<T, Fixed>) {
            acc.mass[n.token] += w;
          } else if constexpr (std::is_same_v<T, Use>) {
            acc.mass[binding(n.var)] += w;
          } else if constexpr (std::is_same_v<T, Choice>) {
            for (std::size_t i = 0; i < n.allowed.size(); ++i) acc.mass[n.allowed[i]] += w * n.weights[i];
          } else if constexpr (std::is_same_v<T, Bind>) {
            for (auto [tok, p] : bind_options(n)) acc.mass[tok] += w * p;
          } else {
            for (std::size_t b = 0; b < n.branches.size(); ++b) {
              if (n.weights[b] <= 0) continue;
              Frames g = f;
              g.back().idx++;
              g.push_back({&n.branches[b], 0});
              collect(std::move(g), w * n.weights[b], acc);
            }
          }
        },
        e.node);
  }

  void advance_in(Frames& f, TokenId token) {
    trim(f);
    if (f.empty()) throw InvalidPrefix("token past the end of the template");
    Frame& top = f.back();
    const Element& e = (*top.seq)[top.idx];
    auto reject = [&] {
      throw InvalidPrefix("token " + std::to_string(token) + " not allowed at emission " + std::to_string(emitted_));
    };
    if (auto* n = std::get_if<Fixed>(&e.node)) {
      if (n->token != token) reject();
      top.idx++;
    } else if (auto* u = std::get_if<Use>(&e.node)) {
      if (binding(u->var) != token) reject();
      top.idx++;
    } else if (auto* c = std::get_if<Choice>(&e.node)) {
      auto it = std::find(c->allowed.begin(), c->allowed.end(), token);
      if (it == c->allowed.end() || c->weights[static_cast<std::size_t>(it - c->allowed.begin())] <= 0) reject();
      top.idx++;
    } else if (auto* b = std::get_if<Bind>(&e.node)) {
      bool ok = false;
      for (auto [tok, p] : bind_options(*b)) ok = ok || (tok == token && p > 0);
      if (!ok) reject();
      bound_[static_cast<std::size_t>(b->var)] = token;
      top.idx++;
    } else {
      const auto& alt = std::get<Alt>(e.node);
      int chosen = -1;
      for (std::size_t br = 0; br < alt.branches.size(); ++br) {
        if (alt.weights[br] <= 0) continue;
        Frames g = f;
        g.back().idx++;
        g.push_back({&alt.branches[br], 0});
        Accum acc;
        collect(g, 1.0, acc);
        auto it = acc.mass.find(token);
        if (it != acc.mass.end() && it->second > 0) {
          if (chosen >= 0) throw InvalidTemplate("alternative branches share a first token");
          chosen = static_cast<int>(br);
        }
      }
      if (chosen < 0) reject();
      top.idx++;
      f.push_back({&alt.branches[static_cast<std::size_t>(chosen)], 0});
      advance_in(f, token);
    }
  }

  const Template* t_;
  Frames frames_;
  std::vector<TokenId> bound_;
  std::size_t emitted_ = 0;
};

/// Exact next-token distribution after `prefix`. A point mass where the next
/// emission is fixed.
inline Categorical base_next_distribution(const Template& t, std::span<const TokenId> prefix) {
  Cursor c(t);
  for (TokenId tok : prefix) c.advance(tok);
  return c.next();
}

/// Every choice point visited while replaying `tokens` (which must be a
/// complete emission of the template).
inline std::vector<ChoicePoint> choice_points(const Template& t, std::span<const TokenId> tokens) {
  std::vector<ChoicePoint> out;
  Cursor c(t);
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    auto d = c.next();
    if (!d.is_point_mass()) out.push_back({i, d});
    c.advance(tokens[i]);
  }
  if (!c.done()) throw InvalidPrefix("token stream ends before the template does");
  return out;
}

/// Base entropy (nats) at each position of a complete emission.
inline std::vector<double> position_entropies(const Template& t, std::span<const TokenId> tokens) {
  std::vector<double> out(tokens.size(), 0.0);
  Cursor c(t);
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    auto d = c.next();
    if (!d.is_point_mass()) out[i] = entropy(d);
    c.advance(tokens[i]);
  }
  if (!c.done()) throw InvalidPrefix("token stream ends before the template does");
  return out;
}

// ---------------------------------------------------------------------------
// Source form. Lexemes are fixed tokens except:
//   $k         bind variable k on first occurrence, use it afterwards
//   #          comment slot; filled with a uniform pool word at comment_fill
//   ~          dead-code slot; filled with a uniform snippet at dead_fill
//   [ a | b ]  uniform alternative between equivalent forms

namespace detail {

inline Sequence slot(TokenId marker, std::vector<TokenId> pool, double fill) {
  Sequence s{{Fixed{marker}}};
  if (fill <= 0) return s;
  std::vector<double> w(pool.size(), 1.0 / static_cast<double>(pool.size()));
  Choice c{std::move(pool), std::move(w)};
  if (fill >= 1) {
    s.push_back({std::move(c)});
  } else {
    s.push_back({Alt{{Sequence{{std::move(c)}}, Sequence{}}, {fill, 1.0 - fill}}});
  }
  return s;
}

class SourceCompiler {
 public:
  SourceCompiler(const std::vector<std::string>& lexemes, const TemplatePools& pools) : lx_(lexemes), pools_(pools) {}

  Sequence compile(int& var_count) {
    Sequence out = sequence(false);
    if (pos_ != lx_.size()) throw InvalidTemplate("unbalanced '" + lx_[pos_] + "'");
    var_count = static_cast<int>(seen_.size());
    return out;
  }

 private:
  Sequence sequence(bool in_alt) {
    const auto& vocab = lang::Vocabulary::standard();
    Sequence out;
    while (pos_ < lx_.size()) {
      const std::string& s = lx_[pos_];
      if (s == "|" || s == "]") {
        if (!in_alt) throw InvalidTemplate("stray '" + s + "'");
        return out;
      }
      ++pos_;
      if (s == "[") {
        Alt alt;
        for (;;) {
          alt.branches.push_back(sequence(true));
          if (pos_ >= lx_.size()) throw InvalidTemplate("unterminated '['");
          if (lx_[pos_++] == "]") break;
        }
        alt.weights.assign(alt.branches.size(), 1.0 / static_cast<double>(alt.branches.size()));
        out.push_back({std::move(alt)});
      } else if (s.size() > 1 && s[0] == '$') {
        int k = std::stoi(s.substr(1));
        if (k < 0) throw InvalidTemplate("negative variable index");
        if (static_cast<std::size_t>(k) >= seen_.size()) seen_.resize(static_cast<std::size_t>(k) + 1, false);
        if (!seen_[static_cast<std::size_t>(k)]) {
          if (in_alt) throw InvalidTemplate("variable $" + std::to_string(k) + " first appears inside an alternative");
          seen_[static_cast<std::size_t>(k)] = true;
          Bind b{k, {}, {}};
          for (int i = 0; i < pools_.identifiers; ++i) b.allowed.push_back(vocab.identifier(i));
          b.weights.assign(b.allowed.size(), 1.0 / static_cast<double>(b.allowed.size()));
          out.push_back({std::move(b)});
        } else {
          out.push_back({Use{k}});
        }
      } else if (s == "#") {
        std::vector<TokenId> pool;
        for (int i = 0; i < pools_.words; ++i) pool.push_back(vocab.word(i));
        for (auto& e : slot(lang::Vocabulary::keyword(lang::Kw::Hash), pool, pools_.comment_fill)) out.push_back(e);
      } else if (s == "~") {
        std::vector<TokenId> pool;
        for (int i = 0; i < pools_.snippets; ++i) pool.push_back(vocab.snippet(i));
        for (auto& e : slot(lang::Vocabulary::keyword(lang::Kw::Tilde), pool, pools_.dead_fill)) out.push_back(e);
      } else {
        auto id = vocab.find(s);
        if (!id) throw InvalidTemplate("unknown lexeme '" + s + "'");
        out.push_back({Fixed{*id}});
      }
    }
    if (in_alt) throw InvalidTemplate("unterminated '['");
    return out;
  }

  const std::vector<std::string>& lx_;
  TemplatePools pools_;
  std::size_t pos_ = 0;
  std::vector<bool> seen_;
};

}  // namespace detail

inline Template compile_template(std::string task_id, std::string_view source, const TemplatePools& pools = {}) {
  if (pools.identifiers < 1 || pools.identifiers > lang::Vocabulary::standard().pools().identifiers ||
      pools.words < 1 || pools.words > lang::Vocabulary::standard().pools().words || pools.snippets < 1 ||
      pools.snippets > lang::Vocabulary::standard().pools().snippets) {
    throw InvalidTemplate("template pools exceed the vocabulary");
  }
  std::vector<std::string> lexemes;
  std::istringstream in{std::string(source)};
  for (std::string s; in >> s;) lexemes.push_back(s);
  Template t;
  t.task_id = std::move(task_id);
  t.script = detail::SourceCompiler(lexemes, pools).compile(t.var_count);
  return t;
}

// ---------------------------------------------------------------------------
// Generation

/// Picks the next token from the exact base distribution and the tokens
/// emitted so far.
using TokenSampler = std::function<TokenId(const Categorical&, std::span<const TokenId>)>;

inline lang::TokenSeq generate_tokens(const Template& t, const TokenSampler& pick) {
  Cursor c(t);
  lang::TokenSeq out;
  while (!c.done()) {
    Categorical d = c.next();
    TokenId tok = d.is_point_mass() ? d.tokens.front() : pick(d, out);
    c.advance(tok);
    out.push_back(tok);
  }
  return out;
}

/// Unwatermarked model M: samples every choice point from its base weights.
inline lang::Program generate(const Template& t, Rng& rng) {
  return lang::parse(generate_tokens(t, [&rng](const Categorical& d, std::span<const TokenId>) { return sample(d, rng); }));
}

// ---------------------------------------------------------------------------
// JSON: {task_id, script: [{fixed: id} | {choice: {allowed, weights}} |
//        {bind: k, allowed, weights} | {use: k} | {alt: [[...], ...], weights}]}

namespace detail {

inline nlohmann::json to_json_seq(const Sequence& seq) {
  auto arr = nlohmann::json::array();
  for (const auto& e : seq) {
    std::visit(
        [&](const auto& n) {
          using T = std::decay_t<decltype(n)>;
          if constexpr (std::is_same_v<T, Fixed>) {
            arr.push_back({{"fixed", n.token}});
          } else if constexpr (std::is_same_v<T, Choice>) {
            arr.push_back({{"choice", {{"allowed", n.allowed}, {"weights", n.weights}}}});
          } else if constexpr (std::is_same_v<T, Bind>) {
            arr.push_back({{"bind", n.var}, {"allowed", n.allowed}, {"weights", n.weights}});
          } else if constexpr (std::is_same_v<T, Use>) {
            arr.push_back({{"use", n.var}});
          } else {
            auto br = nlohmann::json::array();
            for (const auto& b : n.branches) br.push_back(to_json_seq(b));
            arr.push_back({{"alt", br}, {"weights", n.weights}});
          }
        },
        e.node);
  }
  return arr;
}

inline void check_weights(const std::vector<TokenId>& a, const std::vector<double>& w) {
  if (a.empty() || a.size() != w.size()) throw InvalidTemplate("allowed/weights size mismatch");
  double s = 0;
  for (double x : w) {
    if (!(x > 0)) throw InvalidTemplate("choice weights must be strictly positive");
    s += x;
  }
  if (std::abs(s - 1.0) > 1e-9) throw InvalidTemplate("choice weights must sum to 1");
}

inline Sequence from_json_seq(const nlohmann::json& arr, int& max_var) {
  Sequence seq;
  for (const auto& j : arr) {
    if (j.contains("fixed")) {
      seq.push_back({Fixed{j.at("fixed").get<TokenId>()}});
    } else if (j.contains("choice")) {
      Choice c{j.at("choice").at("allowed").get<std::vector<TokenId>>(),
               j.at("choice").at("weights").get<std::vector<double>>()};
      check_weights(c.allowed, c.weights);
      seq.push_back({std::move(c)});
    } else if (j.contains("bind")) {
      Bind b{j.at("bind").get<int>(), j.at("allowed").get<std::vector<TokenId>>(),
             j.at("weights").get<std::vector<double>>()};
      check_weights(b.allowed, b.weights);
      max_var = std::max(max_var, b.var);
      seq.push_back({std::move(b)});
    } else if (j.contains("use")) {
      Use u{j.at("use").get<int>()};
      max_var = std::max(max_var, u.var);
      seq.push_back({u});
    } else if (j.contains("alt")) {
      Alt a;
      for (const auto& b : j.at("alt")) a.branches.push_back(from_json_seq(b, max_var));
      a.weights = j.at("weights").get<std::vector<double>>();
      if (a.weights.size() != a.branches.size()) throw InvalidTemplate("alt weights/branches mismatch");
      seq.push_back({std::move(a)});
    } else {
      throw InvalidTemplate("unknown script element: " + j.dump());
    }
  }
  return seq;
}

}  // namespace detail

inline nlohmann::json template_to_json(const Template& t) {
  return {{"task_id", t.task_id}, {"script", detail::to_json_seq(t.script)}};
}

inline Template template_from_json(const nlohmann::json& j) {
  try {
    Template t;
    t.task_id = j.at("task_id").get<std::string>();
    int max_var = -1;
    t.script = detail::from_json_seq(j.at("script"), max_var);
    t.var_count = max_var + 1;
    return t;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidTemplate(std::string("malformed template JSON: ") + e.what());
  }
}

}  // namespace wmlab::model
