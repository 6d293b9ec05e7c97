#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>

namespace wmlab {

/// Root of every exception thrown by the library. `code()` is a stable
/// machine-readable name ("UnknownLexeme", "CapExceeded", ...).
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& what)
      : std::runtime_error(code + ": " + what), code_(std::move(code)) {}

  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

#define WMLAB_DEFINE_ERROR(Name)                               \
  class Name : public ::wmlab::Error {                         \
   public:                                                     \
    explicit Name(const std::string& what) : Error(#Name, what) {} \
  }

WMLAB_DEFINE_ERROR(InvalidArgument);
WMLAB_DEFINE_ERROR(EmptyInput);
WMLAB_DEFINE_ERROR(NotADistribution);
WMLAB_DEFINE_ERROR(DimensionMismatch);
WMLAB_DEFINE_ERROR(ConfigError);

/// SplitMix64 finalizer (Steele, Lea, Flood 2014):
///   z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
///   z = (z ^ (z >> 27)) * 0x94D049BB133111EB
///   z =  z ^ (z >> 31)
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

/// Combines a parent seed with a stream label into an independent child seed.
constexpr std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t label) noexcept {
  return mix64(mix64(parent + kGolden) ^ (label * 0xD1B54A32D192ED03ULL + 0x8CB92BA72F3D8DD7ULL));
}

/// SplitMix64 generator: state advances by the golden-ratio increment and each
/// output is `mix64(state)`. Identical seeds give identical streams on every
/// platform; all derived variates below are computed without <random>
/// distributions so results do not depend on the standard library vendor.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed = 0) noexcept : state_(seed) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept { return next(); }

  std::uint64_t next() noexcept {
    state_ += kGolden;
    return mix64(state_);
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() noexcept { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, bound). Rejection sampling keeps it unbiased.
  std::uint64_t below(std::uint64_t bound) {
    if (bound == 0) throw InvalidArgument("Rng::below requires a positive bound");
    const std::uint64_t limit = max() - max() % bound;
    std::uint64_t x;
    do {
      x = next();
    } while (x >= limit);
    return x % bound;
  }

  bool bernoulli(double p) noexcept { return uniform() < p; }

  /// Number of failures before the first success, success probability p.
  std::uint64_t geometric(double p) {
    if (!(p > 0.0 && p <= 1.0)) throw InvalidArgument("geometric requires p in (0,1]");
    if (p == 1.0) return 0;
    const double u = 1.0 - uniform();  // (0, 1]
    return static_cast<std::uint64_t>(std::floor(std::log(u) / std::log1p(-p)));
  }

  /// Standard normal variate (Box-Muller, one output per call).
  double normal() noexcept {
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  std::uint64_t state() const noexcept { return state_; }

 private:
  std::uint64_t state_;
};

}  // namespace wmlab
