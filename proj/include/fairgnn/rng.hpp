#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace fairgnn {

/// xoshiro256** seeded through splitmix64.
///
/// Every stochastic choice in the toolkit draws from a stream keyed by
/// (run seed, purpose tag), so e.g. dropout masks and adversary
/// initialization never share state. Streams are derived as
///   state = splitmix64 sequence started at seed ^ fnv1a64(tag).
/// Floating-point draws are reproducible within one build; nothing
/// here relies on the implementation-defined std:: distributions.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  /// Independent stream for (seed, tag).
  static Rng stream(std::uint64_t seed, std::string_view tag);

  std::uint64_t next_u64();
  /// Uniform in [0, 1) with 53 bits of mantissa.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n). n must be > 0.
  std::uint64_t below(std::uint64_t n);
  /// Standard normal (Box-Muller; the spare value is cached).
  double normal();
  bool bernoulli(double p) { return uniform() < p; }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::uint64_t s_[4];
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t fnv1a64(std::string_view text);

}  // namespace fairgnn
