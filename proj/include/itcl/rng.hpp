#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace itcl {

inline uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Stable sub-seed derivation: one root seed drives every stochastic stage
// (splits, init, shuffling) through (root, stage tag, indices) -> seed.
inline uint64_t derive_seed(uint64_t root, std::string_view stage,
                            uint64_t a = 0, uint64_t b = 0) {
    uint64_t h = 0xcbf29ce484222325ULL ^ splitmix64(root);
    for (char ch : stage) h = (h ^ static_cast<unsigned char>(ch)) * 0x100000001b3ULL;
    h = splitmix64(h);
    h = splitmix64(h ^ (a + 0x9e3779b97f4a7c15ULL));
    h = splitmix64(h ^ (b + 0x7f4a7c159e3779b9ULL));
    return h;
}

inline std::mt19937_64 make_rng(uint64_t seed) { return std::mt19937_64(seed); }

} // namespace itcl
