#pragma once

#include <cstdint>
#include <random>

namespace cfl {

// Named substreams of a run seed. Every random draw in a run is keyed by
// (seed, purpose, round, index) so reordering work never reorders draws.
enum class Stream : std::uint64_t {
    schedule = 1,
    uplink_error = 2,
    downlink_error = 3,
    model_init = 4,
    quantization = 5,
};

constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t substream_key(std::uint64_t seed, Stream purpose, std::uint64_t round, std::uint64_t index = 0) {
    std::uint64_t h = splitmix64(seed);
    h = splitmix64(h ^ static_cast<std::uint64_t>(purpose));
    h = splitmix64(h ^ round);
    return splitmix64(h ^ index);
}

// Uniform in [0, 1) with 53 bits, platform independent.
constexpr double uniform01(std::uint64_t key) {
    return static_cast<double>(splitmix64(key) >> 11) * 0x1.0p-53;
}

inline std::mt19937_64 substream(std::uint64_t seed, Stream purpose, std::uint64_t round, std::uint64_t index = 0) {
    return std::mt19937_64(substream_key(seed, purpose, round, index));
}

}  // namespace cfl
