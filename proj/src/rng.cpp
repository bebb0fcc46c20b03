#include "widthlab/rng.hpp"

#include <cmath>

namespace widthlab {

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  // Box-Muller on (0, 1] uniforms (log(0) guarded by the +2^-54 offset half).
  double u1 = (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
  double u2 = uniform();
  double radius = std::sqrt(-2.0 * std::log(u1));
  double angle = 2.0 * M_PI * u2;
  spare_ = radius * std::sin(angle);
  has_spare_ = true;
  return radius * std::cos(angle);
}

double Rng::symmetric_uniform() {
  constexpr double kHalfWidth = 1.7320508075688772;  // sqrt(3)
  return (2.0 * uniform() - 1.0) * kHalfWidth;
}

std::uint64_t Rng::below(std::uint64_t bound) {
  if (bound <= 1) return 0;
  // Rejection sampling on the top bits to avoid modulo bias.
  std::uint64_t limit = bound * (~0ULL / bound);
  for (;;) {
    std::uint64_t draw = next_u64();
    if (draw < limit) return draw % bound;
  }
}

std::uint64_t mix_seed(std::uint64_t base, std::uint64_t stream) {
  // One splitmix64 round over a combination that separates (base, stream)
  // pairs; the odd multiplier keeps stream=0 distinct from base alone.
  std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace widthlab
