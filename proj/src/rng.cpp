#include "bdsde/rng.hpp"

#include <cmath>
#include <numbers>

namespace bdsde {

namespace {

constexpr std::uint32_t kM0 = 0xD2511F53u;
constexpr std::uint32_t kM1 = 0xCD9E8D57u;
constexpr std::uint32_t kW0 = 0x9E3779B9u;
constexpr std::uint32_t kW1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
  const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
  hi = static_cast<std::uint32_t>(p >> 32);
  lo = static_cast<std::uint32_t>(p);
}

}  // namespace

Philox4x32::Counter Philox4x32::generate(Counter c, Key k) {
  for (int round = 0; round < 10; ++round) {
    if (round > 0) {
      k[0] += kW0;
      k[1] += kW1;
    }
    std::uint32_t hi0, lo0, hi1, lo1;
    mulhilo(kM0, c[0], hi0, lo0);
    mulhilo(kM1, c[2], hi1, lo1);
    c = {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
  }
  return c;
}

double uniform_open(std::uint32_t hi, std::uint32_t lo) {
  const std::uint64_t bits = ((static_cast<std::uint64_t>(hi) << 32) | lo) >> 11;
  return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
}

Philox4x32::Counter raw_words(std::uint64_t seed, Stream stream, std::uint32_t step, std::uint32_t inner,
                              std::uint32_t outer, std::uint32_t slot) {
  const Philox4x32::Key key{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
  const Philox4x32::Counter ctr{step, inner, outer, (static_cast<std::uint32_t>(stream) << 16) | (slot & 0xFFFFu)};
  return Philox4x32::generate(ctr, key);
}

std::array<double, 2> normal_pair(std::uint64_t seed, Stream stream, std::uint32_t step, std::uint32_t inner,
                                  std::uint32_t outer, std::uint32_t slot) {
  const auto w = raw_words(seed, stream, step, inner, outer, slot);
  const double u1 = uniform_open(w[0], w[1]);
  const double u2 = uniform_open(w[2], w[3]);
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  return {r * std::cos(theta), r * std::sin(theta)};
}

}  // namespace bdsde
