#pragma once

#include <cstdint>
#include <random>

namespace flowecon {

// splitmix64: used to derive statistically independent per-path seeds from a
// master seed.  Path p always gets the same stream no matter how paths are
// scheduled across threads, which is what makes parallel runs reproducible.
inline std::uint64_t splitmix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t derive_path_seed(std::uint64_t master, std::uint64_t path) {
    // Two rounds so that consecutive path indices land far apart even for
    // small master seeds.
    return splitmix64(splitmix64(master) ^ (path * 0x9e3779b97f4a7c15ULL));
}

using PathRng = std::mt19937_64;

inline PathRng make_path_rng(std::uint64_t master, std::uint64_t path) {
    return PathRng(derive_path_seed(master, path));
}

} // namespace flowecon
