#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "wmlab/lang/task.hpp"
#include "wmlab/model/template.hpp"
#include "wmlab/stats/stats.hpp"

namespace wmlab::watermark {

using lang::TokenId;
using lang::TokenSeq;
using model::Categorical;

WMLAB_DEFINE_ERROR(WrongContextLength);
WMLAB_DEFINE_ERROR(WrongLength);
WMLAB_DEFINE_ERROR(TooShort);

struct Key {
  std::uint64_t value = 0;
  friend bool operator==(const Key&, const Key&) = default;
};

/// Fresh key drawn from `rng`; independent of any program or prompt.
inline Key generate_key(Rng& rng) { return Key{rng.next()}; }

enum class Scheme { GreenRed, Sweet, SynthId, Ideal };

inline std::string to_string(Scheme s) {
  switch (s) {
    case Scheme::GreenRed: return "greenred";
    case Scheme::Sweet: return "sweet";
    case Scheme::SynthId: return "synthid";
    case Scheme::Ideal: return "ideal";
  }
  return "?";
}

inline Scheme scheme_from_string(const std::string& s) {
  if (s == "greenred") return Scheme::GreenRed;
  if (s == "sweet") return Scheme::Sweet;
  if (s == "synthid") return Scheme::SynthId;
  if (s == "ideal") return Scheme::Ideal;
  throw ConfigError("unknown scheme '" + s + "'");
}

struct SchemeParams {
  Scheme scheme = Scheme::GreenRed;
  int n_gram = 5;
  double gamma = 0.25;
  double delta = 2.0;
  double tau = 0.6;
  int rounds = 30;
  int t_gen = 500;  // ideal only

  void validate(int vocab_size = lang::Vocabulary::standard().size()) const {
    if (n_gram < 1) throw ConfigError("n_gram must be >= 1");
    if (scheme == Scheme::GreenRed || scheme == Scheme::Sweet) {
      if (!(gamma > 0 && gamma < 1)) throw ConfigError("gamma must lie in (0,1)");
      if (std::floor(gamma * vocab_size) < 1) throw ConfigError("gamma * |V| must be >= 1");
      if (!(delta >= 0) || !std::isfinite(delta)) throw ConfigError("delta must be finite and >= 0");
    }
    if (scheme == Scheme::Sweet && !(tau >= 0)) throw ConfigError("tau must be >= 0");
    if (scheme == Scheme::SynthId && rounds < 1) throw ConfigError("rounds must be >= 1");
    if (scheme == Scheme::Ideal && t_gen < 1) throw ConfigError("t_gen must be >= 1");
  }
};

// ---------------------------------------------------------------------------
// Keyed hashing

/// Seed for the next token: the key is whitened, then each context id is
/// folded in with one SplitMix finalizer round:
///   h0 = mix64(k ^ 0x6A09E667F3BCC909)
///   h  = mix64(h ^ (id + 1) * 0x9E3779B97F4A7C15)
inline std::uint64_t prf_seed(const Key& key, std::span<const TokenId> context) {
  std::uint64_t h = mix64(key.value ^ 0x6A09E667F3BCC909ULL);
  for (TokenId t : context) h = mix64(h ^ (static_cast<std::uint64_t>(t) + 1) * kGolden);
  return h;
}

inline std::uint64_t prf_seed(const Key& key, std::span<const TokenId> context, int n_gram) {
  if (static_cast<int>(context.size()) != n_gram - 1) {
    throw WrongContextLength("context has " + std::to_string(context.size()) + " ids, expected " +
                             std::to_string(n_gram - 1));
  }
  return prf_seed(key, context);
}

/// The N-1 ids preceding position `i`, padded on the left with the
/// vocabulary sentinel.
inline TokenSeq context_at(std::span<const TokenId> tokens, std::size_t i, int n_gram,
                           TokenId sentinel = lang::Vocabulary::standard().sentinel()) {
  TokenSeq ctx(static_cast<std::size_t>(n_gram - 1), sentinel);
  for (std::size_t k = 0; k < ctx.size(); ++k) {
    std::size_t back = ctx.size() - k;
    if (back <= i) ctx[k] = tokens[i - back];
  }
  return ctx;
}

/// First floor(gamma * |V|) entries of a Fisher-Yates permutation of the
/// vocabulary driven by Rng(seed). Only the prefix is shuffled.
inline std::vector<TokenId> green_set(std::uint64_t seed, double gamma,
                                      int vocab_size = lang::Vocabulary::standard().size()) {
  if (!(gamma > 0 && gamma < 1)) throw InvalidArgument("gamma must lie in (0,1)");
  const auto n = static_cast<std::size_t>(vocab_size);
  const auto k = static_cast<std::size_t>(std::floor(gamma * vocab_size));
  std::vector<TokenId> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = static_cast<TokenId>(i);
  Rng rng(seed);
  for (std::size_t i = 0; i < k; ++i) std::swap(perm[i], perm[i + rng.below(n - i)]);
  perm.resize(k);
  return perm;
}

inline std::vector<char> green_mask(std::uint64_t seed, double gamma,
                                    int vocab_size = lang::Vocabulary::standard().size()) {
  std::vector<char> m(static_cast<std::size_t>(vocab_size), 0);
  for (TokenId t : green_set(seed, gamma, vocab_size)) m[static_cast<std::size_t>(t)] = 1;
  return m;
}

/// One pseudorandom bit per (seed, layer, token).
inline int g_score(std::uint64_t seed, int layer, TokenId token) {
  if (layer < 1) throw InvalidArgument("layers are numbered from 1");
  std::uint64_t x = static_cast<std::uint64_t>(layer) * 0xD6E8FEB86659FD93ULL ^
                    (static_cast<std::uint64_t>(token) + 1) * 0xC2B2AE3D27D4EB4FULL;
  return static_cast<int>(mix64(seed ^ mix64(x)) >> 63);
}

inline bool ngram_marked(std::span<const TokenId> ngram, const Key& key) {
  return (mix64(prf_seed(key, ngram) ^ 0x3C6EF372FE94F82BULL) & 1) != 0;
}

/// Marks a keyed pseudorandom half of all 5-grams.
inline bool is_marked(std::span<const TokenId> fivegram, const Key& key) {
  if (fivegram.size() != 5) throw WrongLength("is_marked takes exactly 5 ids");
  return ngram_marked(fivegram, key);
}

// ---------------------------------------------------------------------------
// Sampling

/// Distribution of the winner of one match between two i.i.d. draws from
/// `dist`: the higher g wins, ties go to a fair coin. With q the g=1 mass,
/// p'(x) = p(x)(2 - q) if g(x) = 1 and p(x)(1 - q) otherwise.
inline Categorical synthid_layer_update(const Categorical& dist, std::span<const int> g) {
  model::check_distribution(dist);
  if (g.size() != dist.size()) throw DimensionMismatch("one g bit per support token");
  double q = 0;
  for (std::size_t i = 0; i < g.size(); ++i) q += g[i] ? dist.weights[i] : 0.0;
  q = std::clamp(q, 0.0, 1.0);
  Categorical out = dist;
  double total = 0;
  for (std::size_t i = 0; i < g.size(); ++i) total += out.weights[i] *= g[i] ? 2.0 - q : 1.0 - q;
  for (double& w : out.weights) w /= total;  // rounding drift only
  return out;
}

inline Categorical greenred_bias(const Categorical& dist, std::uint64_t seed, double gamma, double delta) {
  auto mask = green_mask(seed, gamma);
  Categorical out = dist;
  const double boost = std::exp(delta);
  double total = 0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (mask[static_cast<std::size_t>(out.tokens[i])]) out.weights[i] *= boost;
    total += out.weights[i];
  }
  for (double& w : out.weights) w /= total;
  return out;
}

inline Categorical synthid_tournament(const Categorical& dist, std::uint64_t seed, int rounds) {
  Categorical d = dist;
  std::vector<int> g(d.size());
  for (int l = 1; l <= rounds; ++l) {
    for (std::size_t i = 0; i < d.size(); ++i) g[i] = g_score(seed, l, d.tokens[i]);
    d = synthid_layer_update(d, g);
  }
  return d;
}

/// The distribution the watermarked sampler draws from at this position.
inline Categorical watermarked_distribution(const Categorical& dist, const SchemeParams& params, const Key& key,
                                            std::span<const TokenId> context) {
  model::check_distribution(dist);
  if (dist.is_point_mass()) return dist;
  switch (params.scheme) {
    case Scheme::GreenRed:
      return greenred_bias(dist, prf_seed(key, context, params.n_gram), params.gamma, params.delta);
    case Scheme::Sweet:
      if (model::entropy(dist) > params.tau) {
        return greenred_bias(dist, prf_seed(key, context, params.n_gram), params.gamma, params.delta);
      }
      return dist;
    case Scheme::SynthId:
      return synthid_tournament(dist, prf_seed(key, context, params.n_gram), params.rounds);
    case Scheme::Ideal:
      return dist;
  }
  return dist;
}

inline TokenId sample_token(const Categorical& dist, const SchemeParams& params, const Key& key,
                            std::span<const TokenId> context, Rng& rng) {
  if (dist.is_point_mass()) return dist.tokens.front();
  return model::sample(watermarked_distribution(dist, params, key, context), rng);
}

/// Watermarked generation: every choice point is drawn with the scheme's
/// bias, keyed on the last N-1 emitted tokens (sentinel padded).
inline lang::Program generate_watermarked(const model::Template& t, const SchemeParams& params, const Key& key,
                                          Rng& rng) {
  return lang::parse(model::generate_tokens(t, [&](const Categorical& d, std::span<const TokenId> prefix) {
    auto ctx = context_at(prefix, prefix.size(), params.n_gram);
    return sample_token(d, params, key, ctx, rng);
  }));
}

// ---------------------------------------------------------------------------
// Detection

struct DetectionResult {
  double z = 0;
  double p = 1;
  std::size_t scored_tokens = 0;
  int bit = 0;
  double threshold = 0;
};

inline double calibrate_threshold(double epsilon_pos) {
  if (!(epsilon_pos > 0 && epsilon_pos < 1)) throw stats::OutOfRange("epsilon_pos must lie in (0,1)");
  return stats::normal_quantile(1 - epsilon_pos);
}

inline DetectionResult decide(double z, std::size_t scored, double threshold) {
  return {z, 1 - stats::normal_cdf(z), scored, z >= threshold ? 1 : 0, threshold};
}

/// Green fraction actually used: floor(gamma |V|) / |V|.
inline double effective_gamma(double gamma, int vocab_size = lang::Vocabulary::standard().size()) {
  return std::floor(gamma * vocab_size) / vocab_size;
}

inline double greenred_z(double green, double scored, double gamma) {
  return (green - gamma * scored) / std::sqrt(scored * gamma * (1 - gamma));
}

inline double synthid_z(double score, double scored, int rounds) {
  return (score - rounds * scored / 2) / std::sqrt(rounds * scored / 4);
}

inline double ideal_z(double marked, double ngrams) { return (marked - ngrams / 2) / std::sqrt(ngrams / 4); }

/// Fraction of complete N-grams that are marked, and their count.
inline std::pair<std::size_t, std::size_t> marked_ngrams(std::span<const TokenId> tokens, const Key& key, int n) {
  if (tokens.size() < static_cast<std::size_t>(n)) return {0, 0};
  std::size_t m = 0, total = tokens.size() - static_cast<std::size_t>(n) + 1;
  for (std::size_t i = 0; i < total; ++i) m += ngram_marked(tokens.subspan(i, static_cast<std::size_t>(n)), key);
  return {m, total};
}

/// z-score detection. Positions with fewer than N-1 predecessors are never
/// scored. SWEET needs the generating template to recompute entropies.
inline DetectionResult detect(std::span<const TokenId> tokens, const SchemeParams& params, const Key& key,
                              const model::Template* model_ref, double threshold) {
  const auto n1 = static_cast<std::size_t>(params.n_gram - 1);
  if (params.scheme == Scheme::Ideal) {
    auto [m, total] = marked_ngrams(tokens, key, params.n_gram);
    if (total == 0) throw TooShort("no complete n-gram to score");
    return decide(ideal_z(static_cast<double>(m), static_cast<double>(total)), total, threshold);
  }
  std::vector<double> ent;
  if (params.scheme == Scheme::Sweet) {
    if (!model_ref) throw InvalidArgument("sweet detection needs the generating template");
    ent = model::position_entropies(*model_ref, tokens);
  }
  std::size_t scored = 0;
  double score = 0;
  for (std::size_t i = n1; i < tokens.size(); ++i) {
    if (params.scheme == Scheme::Sweet && !(ent[i] > params.tau)) continue;
    std::uint64_t seed = prf_seed(key, tokens.subspan(i - n1, n1));
    ++scored;
    if (params.scheme == Scheme::SynthId) {
      for (int l = 1; l <= params.rounds; ++l) score += g_score(seed, l, tokens[i]);
    } else {
      score += green_mask(seed, params.gamma)[static_cast<std::size_t>(tokens[i])];
    }
  }
  if (scored == 0) throw TooShort("no position left to score");
  const double t = static_cast<double>(scored);
  double z = params.scheme == Scheme::SynthId ? synthid_z(score, t, params.rounds)
                                              : greenred_z(score, t, effective_gamma(params.gamma));
  return decide(z, scored, threshold);
}

inline DetectionResult detect(const lang::Program& p, const SchemeParams& params, const Key& key,
                              const model::Template* model_ref, double threshold) {
  return detect(std::span<const TokenId>(p.tokens()), params, key, model_ref, threshold);
}

// ---------------------------------------------------------------------------
// Ideal scheme

struct IdealSelection {
  lang::Program program;
  double ratio = 0;
  int passing = 0;
};

/// Draws t_gen candidates from the unwatermarked model, keeps those that
/// pass the task, and returns the one with the highest marked-N-gram ratio
/// (first on ties). nullopt when no candidate passes.
inline std::optional<IdealSelection> ideal_watermark(const lang::Task& task, const model::Template& t, int t_gen,
                                                     const Key& key, Rng& rng, int n_gram = 5) {
  if (t_gen < 1) throw InvalidArgument("t_gen must be >= 1");
  std::optional<IdealSelection> best;
  int passing = 0;
  for (int i = 0; i < t_gen; ++i) {
    auto c = model::generate(t, rng);
    if (!lang::run_test_suite(task, c)) continue;
    ++passing;
    auto [m, total] = marked_ngrams(c.tokens(), key, n_gram);
    double ratio = total ? static_cast<double>(m) / static_cast<double>(total) : 0.0;
    if (!best || ratio > best->ratio) best = IdealSelection{c, ratio, 0};
  }
  if (best) best->passing = passing;
  return best;
}

// ---------------------------------------------------------------------------
// Rates

struct RateEstimate {
  double epsilon_pos = 0;
  double epsilon_neg = 0;
  std::size_t n_null = 0;
  std::size_t n_watermarked = 0;
};

inline RateEstimate estimate_rates(std::span<const int> watermarked_bits, std::span<const int> null_bits) {
  if (watermarked_bits.empty() || null_bits.empty()) throw EmptyInput("estimate_rates needs both lists non-empty");
  double miss = 0, fp = 0;
  for (int b : watermarked_bits) miss += b ? 0 : 1;
  for (int b : null_bits) fp += b ? 1 : 0;
  return {fp / static_cast<double>(null_bits.size()), miss / static_cast<double>(watermarked_bits.size()),
          null_bits.size(), watermarked_bits.size()};
}

// ---------------------------------------------------------------------------
// Config JSON: {scheme, n_gram, gamma, delta, tau, rounds, epsilon_pos}

struct SchemeConfig {
  SchemeParams params;
  double epsilon_pos = 0.05;
};

inline void to_json(nlohmann::json& j, const SchemeConfig& c) {
  j = {{"scheme", to_string(c.params.scheme)}, {"n_gram", c.params.n_gram}, {"gamma", c.params.gamma},
       {"delta", c.params.delta},  {"tau", c.params.tau},   {"rounds", c.params.rounds},
       {"t_gen", c.params.t_gen},  {"epsilon_pos", c.epsilon_pos}};
}

inline void from_json(const nlohmann::json& j, SchemeConfig& c) {
  try {
    c = SchemeConfig{};
    c.params.scheme = scheme_from_string(j.at("scheme").get<std::string>());
    c.params.n_gram = j.value("n_gram", c.params.n_gram);
    c.params.gamma = j.value("gamma", c.params.gamma);
    c.params.delta = j.value("delta", c.params.delta);
    c.params.tau = j.value("tau", c.params.tau);
    c.params.rounds = j.value("rounds", c.params.rounds);
    c.params.t_gen = j.value("t_gen", c.params.t_gen);
    c.epsilon_pos = j.value("epsilon_pos", c.epsilon_pos);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed scheme config: ") + e.what());
  }
  c.params.validate();
  if (!(c.epsilon_pos > 0 && c.epsilon_pos < 1)) throw ConfigError("epsilon_pos must lie in (0,1)");
}

}  // namespace wmlab::watermark
