#pragma once

#include <cstdint>
#include <random>

namespace kaas {

// Named sub-streams derived from one experiment seed. Keeping the streams
// separate means e.g. action selection consumes the same draws whether the
// successor state comes from the environment or from a stored table.
enum class RngStream : std::uint64_t {
    Action = 1,
    EnvNoise = 2,
    TransitionSample = 3,
    EpisodeStart = 4,
    Workload = 5,
    Exploration = 6,
};

// splitmix64 finalizer; decorrelates (seed, stream) pairs.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::mt19937_64 make_rng(std::uint64_t seed, RngStream stream,
                                std::uint64_t salt = 0) {
    return std::mt19937_64(mix_seed(seed, static_cast<std::uint64_t>(stream) + (salt << 8)));
}

} // namespace kaas
