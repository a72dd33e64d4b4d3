#pragma once

#include <cstdint>
#include <random>

namespace sfbm {

// SplitMix64 finalizer; used to derive independent, reproducible sub-seeds.
constexpr std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Seed coordinates of one random stream: (master seed, replica, stream).
/// Any stream can be regenerated in isolation from its coordinates.
struct SeedRecord {
    std::uint64_t master{};
    std::uint64_t replica{};
    std::uint64_t stream{};

    constexpr std::uint64_t derive() const {
        return mix64(mix64(mix64(master) ^ (replica * 0xd1342543de82ef95ULL)) ^
                     (stream * 0xa0761d6478bd642fULL + 0x2545f4914f6cdd1dULL));
    }

    constexpr SeedRecord with_stream(std::uint64_t s) const { return {master, replica, s}; }
};

using Engine = std::mt19937_64;

inline Engine make_engine(std::uint64_t seed) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
    return Engine(seq);
}

inline Engine make_engine(const SeedRecord& rec) { return make_engine(rec.derive()); }

} // namespace sfbm
