#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace rsplab {

// Deterministic RNG used everywhere in the library. Sub-streams are derived
// from a master seed plus a purpose tag and integer coordinates, so results
// never depend on evaluation order or worker count. Distribution helpers are
// hand-rolled: the std:: distributions are implementation-defined and would
// break bit-reproducibility across toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform integer in [lo, hi], inclusive. Requires lo <= hi.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);

  // Uniform real in [lo, hi).
  double uniform(double lo, double hi);

  // Standard normal via Box-Muller (one value per call; no state carried).
  double normal();

  bool bernoulli(double p) { return uniform(0.0, 1.0) < p; }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(uniform_int(0, static_cast<std::int64_t>(i) - 1));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

// SplitMix64 finalizer; the mixing function behind seed derivation.
std::uint64_t mix64(std::uint64_t x);

// Derives an independent sub-seed from (seed, tag, a, b, c). Tags keep
// unrelated sampling decisions on unrelated streams.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag,
                          std::uint64_t a = 0, std::uint64_t b = 0, std::uint64_t c = 0);

inline Rng derive_rng(std::uint64_t seed, std::string_view tag,
                      std::uint64_t a = 0, std::uint64_t b = 0, std::uint64_t c = 0) {
  return Rng(derive_seed(seed, tag, a, b, c));
}

}  // namespace rsplab
