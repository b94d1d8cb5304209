#pragma once

#include <cstdint>
#include <initializer_list>

namespace crlmaze {

// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Derives an independent stream seed from a base seed and a key path, e.g.
/// derive_seed(run_seed, {stream::env, episode, env_index}).
constexpr std::uint64_t derive_seed(std::uint64_t base,
                                    std::initializer_list<std::uint64_t> keys) noexcept {
  std::uint64_t h = mix64(base);
  for (auto k : keys) h = mix64(h ^ mix64(k + 0x632be59bd9b4e019ULL));
  return h;
}

/// Stream tags keep the random streams of different consumers disjoint.
namespace stream {
inline constexpr std::uint64_t env = 1;
inline constexpr std::uint64_t policy = 2;
inline constexpr std::uint64_t map_choice = 3;
inline constexpr std::uint64_t fisher = 4;
inline constexpr std::uint64_t evaluation = 5;
inline constexpr std::uint64_t init = 6;
}  // namespace stream

}  // namespace crlmaze
