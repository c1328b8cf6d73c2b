#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>

namespace regime_kit {

/// Engine used for every stochastic step. Streams are derived from a master
/// seed with SplitMix64 so that parallel and serial runs draw identical numbers.
using Engine = std::mt19937_64;

inline constexpr std::string_view kRngName = "mt19937_64/splitmix64-derived-streams";

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Derives a child seed from `seed` and a path of stream tags.
inline std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> path) {
  std::uint64_t s = splitmix64(seed);
  for (std::uint64_t tag : path) s = splitmix64(s ^ splitmix64(tag + 0x632be59bd9b4e019ULL));
  return s;
}

inline Engine make_engine(std::uint64_t seed) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
  return Engine(seq);
}

// Stream tags, kept distinct so derived streams never collide across stages.
namespace stream {
inline constexpr std::uint64_t kSelection = 1;
inline constexpr std::uint64_t kSilhouetteNull = 2;
inline constexpr std::uint64_t kNetworkNull = 3;
inline constexpr std::uint64_t kSynth = 4;
inline constexpr std::uint64_t kSelectionSeeds = 5;
}  // namespace stream

}  // namespace regime_kit
