#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace fdia {

using Rng = std::mt19937_64;

namespace detail {

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t fnv1a(std::string_view s) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace detail

/// Counter-based expansion of a master seed: every (stream, index) pair
/// names an independent, reproducible sub-seed. Sub-experiments can be
/// re-run alone without replaying the draws of their siblings.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::string_view stream,
                                    std::uint64_t index = 0) noexcept {
  std::uint64_t s = detail::splitmix64(master ^ detail::fnv1a(stream));
  return detail::splitmix64(s + detail::splitmix64(index));
}

inline Rng make_rng(std::uint64_t seed) { return Rng{seed}; }

}  // namespace fdia
