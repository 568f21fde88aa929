#pragma once

#include "concpos/types.hpp"

#include <array>
#include <cstdint>

namespace concpos {

/// Philox4x32-10 block function.
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter, std::array<std::uint32_t, 2> key);

/// Inverse of the standard normal CDF (Wichura's AS241, about 1e-16 relative accuracy).
double normal_quantile(double p);

std::uint64_t splitmix64(std::uint64_t x);

/// Derives an independent 64-bit seed from a parent seed and up to three labels.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0);

/// Random numbers addressed by (seed, stream, sample index, position).
///
/// Every value is a pure function of its address, so any partition of the sample
/// indices across workers reproduces the same numbers.
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint32_t stream);

  /// Uniform in the open interval (0,1) at position j of sample `index`.
  double uniform(std::uint64_t index, std::uint64_t j) const;

  /// Fills out with independent standard normals for sample `index`.
  void normals(std::uint64_t index, VecOut out) const;
  Vector normals(std::uint64_t index, Index n) const;

  /// Fills out with independent uniform signs (+1/-1) for sample `index`.
  void signs(std::uint64_t index, VecOut out) const;

  std::uint64_t seed() const { return seed_; }
  std::uint32_t stream() const { return stream_; }

 private:
  std::array<std::uint32_t, 4> block(std::uint64_t index, std::uint32_t j) const;

  std::uint64_t seed_;
  std::uint32_t stream_;
  std::array<std::uint32_t, 2> key_;
};

/// Stream identifiers used by the library so independent estimates never share numbers.
namespace streams {
inline constexpr std::uint32_t mean = 0;
inline constexpr std::uint32_t tail = 1;
inline constexpr std::uint32_t gradient = 2;
inline constexpr std::uint32_t isotropy = 3;
inline constexpr std::uint32_t search = 4;
inline constexpr std::uint32_t subspace = 5;
inline constexpr std::uint32_t rademacher = 6;
inline constexpr std::uint32_t balance = 7;
inline constexpr std::uint32_t balance_check = 8;
inline constexpr std::uint32_t minimal_m = 9;
inline constexpr std::uint32_t probes = 10;
inline constexpr std::uint32_t lift = 11;
inline constexpr std::uint32_t sandwich = 12;
}  // namespace streams

}  // namespace concpos
