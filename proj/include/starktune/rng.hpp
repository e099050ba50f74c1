#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace starktune {

using Rng = std::mt19937_64;

// SplitMix64 finalizer; a bijection on 64-bit words with good avalanche.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

// Derive the seed of an independent stream from a run seed and a tuple of
// counters (step index, sweep index, molecule index, ...). Streams depend
// only on the key, never on execution order.
constexpr std::uint64_t stream_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> key) {
    std::uint64_t h = splitmix64(seed);
    for (auto k : key) h = splitmix64(h ^ splitmix64(k + 0x632BE59BD9B4E019ULL));
    return h;
}

inline Rng make_stream(std::uint64_t seed, std::initializer_list<std::uint64_t> key) {
    return Rng(stream_seed(seed, key));
}

// Stream purposes, used as the first key element.
enum class StreamTag : std::uint64_t {
    noise_chain = 1,
    sweep_noise = 2,
    sweep_counts = 3,
    replica = 4,
};

inline constexpr std::uint64_t tag(StreamTag t) { return static_cast<std::uint64_t>(t); }

} // namespace starktune
