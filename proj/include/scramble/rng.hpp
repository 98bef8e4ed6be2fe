#pragma once

#include <cstdint>
#include <random>

namespace scramble {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

// Seed of sub-stream `index` under `master`, independent of the order in
// which sub-streams are consumed. `stream` separates unrelated uses of the
// same master seed (trajectories of different (p, L), Haar samples, ...).
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream, std::uint64_t index) {
    return splitmix64(splitmix64(splitmix64(master) ^ stream) + index);
}

}  // namespace scramble
