#pragma once

#include <array>
#include <cstdint>

namespace bdsde {

/// Philox4x32-10 counter-based generator (Salmon et al., SC'11).
///
/// Stateless: a (counter, key) pair maps to four 32-bit words, so any draw
/// can be regenerated from its coordinates alone.
struct Philox4x32 {
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static Counter generate(Counter ctr, Key key);
};

/// Uniform in the open interval (0, 1) built from 64 random bits.
double uniform_open(std::uint32_t hi, std::uint32_t lo);

/// Stream tags occupy the top half of the fourth counter word.
enum class Stream : std::uint32_t { kW = 1, kB = 2, kAux = 3 };

/// Two independent standard normals at a coordinate of the keyed stream.
std::array<double, 2> normal_pair(std::uint64_t seed, Stream stream, std::uint32_t step, std::uint32_t inner,
                                  std::uint32_t outer, std::uint32_t slot);

/// Raw words at a coordinate of the keyed stream.
Philox4x32::Counter raw_words(std::uint64_t seed, Stream stream, std::uint32_t step, std::uint32_t inner,
                              std::uint32_t outer, std::uint32_t slot);

}  // namespace bdsde
