#pragma once

#include <cstdint>
#include <random>

#include "effdiff/linalg.hpp"

namespace effdiff {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer; used to derive independent sub-stream seeds.
constexpr std::uint64_t mix_seed(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a,
                                    std::uint64_t b = 0, std::uint64_t c = 0) noexcept {
  return mix_seed(mix_seed(mix_seed(base ^ mix_seed(a)) ^ mix_seed(b + 1)) ^ mix_seed(c + 2));
}

/// Gaussian and uniform draws from one engine, in a fixed order.
class RandomSource {
 public:
  explicit RandomSource(std::uint64_t seed) : engine_(seed) {}

  double gaussian() { return normal_(engine_); }
  double uniform() { return uniform_(engine_); }

  void fill_gaussian(Vector& out) {
    for (Eigen::Index i = 0; i < out.size(); ++i) out[i] = normal_(engine_);
  }

  Rng& engine() { return engine_; }

 private:
  Rng engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

}  // namespace effdiff
