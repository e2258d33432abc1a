// SPDX-License-Identifier: Apache-2.0
//
// Seeded random streams. Every consumer of randomness owns one Rng; streams
// are derived from a master seed and a fixed offset so that work split
// across threads draws exactly what the sequential run would draw.

#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string>

namespace dropgan {

/// SplitMix64 finalizer; used to turn (seed, offset) into engine seeds.
std::uint64_t mix_seed(std::uint64_t x);

class Rng {
public:
    explicit Rng(std::uint64_t seed = 0);

    /// Independent stream `offset` of master seed `seed`.
    static Rng stream(std::uint64_t seed, std::uint64_t offset);

    std::uint64_t next_u64() { return engine_(); }
    /// Uniform on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    /// Uniform on {0, ..., n-1}; n must be positive.
    std::size_t index(std::size_t n);
    bool bernoulli(double p) { return uniform() < p; }
    /// Standard normal via the polar form of Box-Muller. The second value
    /// of each pair is kept for the next call.
    double normal();

    /// Portable text form of the full state (engine + cached normal).
    std::string save() const;
    static Rng restore(const std::string& state);

    friend bool operator==(const Rng& a, const Rng& b);

private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

/// Fixed stream offsets under one master seed.
namespace streams {
inline constexpr std::uint64_t kData = 1;
inline constexpr std::uint64_t kMask = 2;
inline constexpr std::uint64_t kLatent = 3;
inline constexpr std::uint64_t kEval = 4;
inline constexpr std::uint64_t kGeneratorInit = 5;
/// Discriminator k uses kDiscriminatorBase + 2k for training draws and
/// kDiscriminatorBase + 2k + 1 for its initialization.
inline constexpr std::uint64_t kDiscriminatorBase = 1000;
}  // namespace streams

}  // namespace dropgan
