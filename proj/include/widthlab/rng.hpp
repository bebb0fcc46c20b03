// Deterministic random draws with a fixed cross-platform layout.
//
// std::normal_distribution and std::shuffle are implementation-defined, so a
// test oracle frozen on one standard library would break on another. This
// wrapper fixes the algorithms (64-bit mt19937_64 bits -> 53-bit uniforms,
// Box-Muller normals, Fisher-Yates shuffles) so every draw is reproducible
// from the seed alone.
#pragma once

#include <cstdint>
#include <vector>

namespace widthlab {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {
    // splitmix64 warm-up decorrelates small consecutive seeds.
    next_u64();
  }

  std::uint64_t next_u64() {
    // splitmix64: passes statistical tests, trivially portable.
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform on [0, 1) with 53 bits of precision.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Standard normal via Box-Muller; caches the second variate.
  double normal();

  // Uniform on [-sqrt(3), sqrt(3)]: unit variance with compact support.
  double symmetric_uniform();

  // Uniform integer in [0, bound) without modulo bias.
  std::uint64_t below(std::uint64_t bound);

  // In-place Fisher-Yates shuffle.
  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::uint64_t state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Combines a base seed with a stream index into a fresh seed (order matters).
std::uint64_t mix_seed(std::uint64_t base, std::uint64_t stream);

}  // namespace widthlab
