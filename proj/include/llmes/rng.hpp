#pragma once

#include <cstdint>
#include <optional>
#include <random>

namespace llmes {

// Seeded random stream used by every ES run.
//
// Bits come from std::mt19937_64, whose output sequence is fixed by the C++
// standard. Uniforms take the top 53 bits: u = (bits >> 11) * 2^-53, so
// u is in [0, 1). Standard normals use the Box-Muller transform on two
// uniforms u1, u2:
//
//     r = sqrt(-2 ln(1 - u1)),  z0 = r cos(2 pi u2),  z1 = r sin(2 pi u2)
//
// z0 is returned first and z1 is cached for the next call. None of the
// std::*_distribution types are used because their algorithms are
// implementation-defined.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }
    double uniform01();
    double uniform(double low, double high);
    double standard_normal();

private:
    std::mt19937_64 engine_;
    std::optional<double> cached_normal_;
};

// SplitMix64 finalizer (Steele, Lea, Flood 2014).
constexpr std::uint64_t splitmix64(std::uint64_t z) noexcept {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Seed of replicate `replicate` within trial `trial_index`:
//
//     splitmix64(splitmix64(splitmix64(master) ^ trial_index) ^ replicate)
//
// Earlier trials keep their seeds when later trials are added.
constexpr std::uint64_t replicate_seed(std::uint64_t master_seed, std::uint64_t trial_index,
                                       std::uint64_t replicate) noexcept {
    return splitmix64(splitmix64(splitmix64(master_seed) ^ trial_index) ^ replicate);
}

}  // namespace llmes
