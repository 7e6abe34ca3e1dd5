#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace sciret {

// Derives a purpose-specific seed from the run seed and a short tag, e.g.
// derive_seed(seed, "mine:q17"). FNV-1a over the seed bytes and the tag,
// finished with a splitmix64 scramble. Deliberately not std::hash, whose
// output differs across standard libraries.
std::uint64_t derive_seed(std::uint64_t base, std::string_view tag);

// mt19937_64 with hand-rolled draws. std::uniform_int_distribution and
// std::shuffle are implementation-defined, so every bounded draw here is
// spelled out and stable across platforms.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform integer in [0, bound), bound > 0. Rejection sampling, no modulo
  // bias.
  std::uint64_t next_below(std::uint64_t bound);

  // Uniform double in [0, 1) with 53 random bits.
  double next_double();

  // Fisher-Yates, iterating from the back.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(next_below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  // k distinct indices drawn uniformly from [0, n), in draw order.
  std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k);

 private:
  std::mt19937_64 engine_;
};

}  // namespace sciret
