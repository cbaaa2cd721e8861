#pragma once

#include <cstdint>
#include <random>

namespace remtime {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer; used to derive independent seeds for substreams.
inline std::uint64_t mix_seed(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Seed for substream `index` of a parent stream seeded with `seed`.
inline std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t index) {
    return mix_seed(mix_seed(seed) ^ mix_seed(index + 0x632be59bd9b4e019ULL));
}

inline Rng make_rng(std::uint64_t seed) { return Rng(mix_seed(seed)); }

inline Rng make_rng(std::uint64_t seed, std::uint64_t index) {
    return Rng(substream_seed(seed, index));
}

}  // namespace remtime
