#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace cfes {

// Tagged substreams: every stochastic concern (traffic, shadowing, policy
// sampling, ...) draws from its own generator so that e.g. traffic
// realizations stay identical while the policy under evaluation changes.
namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace detail

using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t seed, std::string_view stream_tag) {
  std::uint64_t mixed = detail::splitmix64(seed ^ detail::fnv1a(stream_tag));
  return Rng(detail::splitmix64(mixed));
}

// Substream for (seed, tag, index), used for per-episode pairing.
inline Rng make_rng(std::uint64_t seed, std::string_view stream_tag,
                    std::uint64_t index) {
  std::uint64_t mixed = detail::splitmix64(seed ^ detail::fnv1a(stream_tag));
  mixed = detail::splitmix64(mixed ^ (0x9e3779b97f4a7c15ULL * (index + 1)));
  return Rng(mixed);
}

}  // namespace cfes
