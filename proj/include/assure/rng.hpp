#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace assure {

// All randomness in the project flows from one master seed through named
// substreams, so reseeding one component never perturbs another.

namespace detail {

inline constexpr std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ull;
  }
  return h;
}

inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

}  // namespace detail

/// Derive the seed of the substream `name[index]` of a master seed.
inline std::uint64_t substream_seed(std::uint64_t master, std::string_view name,
                                    std::uint64_t index = 0) {
  std::uint64_t s = detail::splitmix64(master ^ detail::fnv1a(name));
  return detail::splitmix64(s ^ index);
}

/// Engine seeded from the substream `name[index]` of `master`.
inline std::mt19937_64 substream(std::uint64_t master, std::string_view name,
                                 std::uint64_t index = 0) {
  return std::mt19937_64(substream_seed(master, name, index));
}

}  // namespace assure
