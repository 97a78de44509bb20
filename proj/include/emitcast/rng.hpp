#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace emitcast {

using Rng = std::mt19937_64;

// 64-bit FNV-1a. Also used for content hashes in run manifests.
constexpr std::uint64_t fnv1a(std::string_view text,
                              std::uint64_t hash = 0xcbf29ce484222325ULL) noexcept {
    for (unsigned char c : text) {
        hash ^= c;
        hash *= 0x100000001b3ULL;
    }
    return hash;
}

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Seed of the named sub-stream `name` under the run seed. Streams are keyed by
/// name only, so adding a stream never shifts the others.
constexpr std::uint64_t substream_seed(std::uint64_t seed, std::string_view name) noexcept {
    return splitmix64(seed ^ fnv1a(name));
}

inline Rng make_rng(std::uint64_t seed, std::string_view name) {
    return Rng(substream_seed(seed, name));
}

}  // namespace emitcast
