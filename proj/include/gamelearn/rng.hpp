#pragma once

#include <cstdint>
#include <random>

namespace gamelearn {

using Rng = std::mt19937_64;

// splitmix64 finalizer
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Derives an independent child seed from a parent seed and a stream tag.
/// All library randomness is routed through this so any (seed, tag) stream
/// can be regenerated in isolation.
inline std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t tag) {
    return mix64(mix64(parent) ^ mix64(tag + 0x632be59bd9b4e019ULL));
}

template <class... Tags>
std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t tag, Tags... rest) {
    return derive_seed(derive_seed(parent, tag), static_cast<std::uint64_t>(rest)...);
}

// Stream tags.
namespace stream {
inline constexpr std::uint64_t game = 1;
inline constexpr std::uint64_t actions = 2;
inline constexpr std::uint64_t noise = 3;
inline constexpr std::uint64_t trial = 4;
inline constexpr std::uint64_t test_points = 5;
inline constexpr std::uint64_t replication = 6;
}  // namespace stream

}  // namespace gamelearn
