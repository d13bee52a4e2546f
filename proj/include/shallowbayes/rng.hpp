#pragma once

#include <cstdint>
#include <random>

namespace shallowbayes {

using Engine = std::mt19937_64;

// Purpose tags for independent streams. Values are part of the on-disk reproducibility contract.
enum class Stream : std::uint64_t {
    teacher_w = 1,
    teacher_v = 2,
    inputs = 3,
    noise = 4,
    test_inputs = 5,
    test_noise = 6,
    spectral = 7,
    chain = 8,
    chain_init = 9,
};

inline std::uint64_t splitmix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// One engine per (seed, tag, index); streams never overlap in practice and are reproducible in isolation.
inline Engine make_stream(std::uint64_t seed, Stream tag, std::uint64_t index = 0) {
    std::uint64_t h = splitmix64(seed);
    h = splitmix64(h ^ static_cast<std::uint64_t>(tag));
    h = splitmix64(h ^ index);
    std::seed_seq seq{static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(h >> 32),
                      static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(tag)};
    return Engine(seq);
}

}  // namespace shallowbayes
