#pragma once

#include <cstdint>

namespace markprod {

/// SplitMix64 finalizer. Good avalanche, cheap, and stateless.
inline std::uint64_t mix64(std::uint64_t z) noexcept {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Counter-based generator: every draw is a pure function of
/// (seed, stream, step, slot). Parallel schedules or re-runs cannot
/// perturb the sequence, so simulations are bit-reproducible under any
/// worker count.
class CounterRng {
public:
    CounterRng(std::uint64_t seed, std::uint64_t stream) noexcept
        : key_(mix64(mix64(seed) ^ (0x6a09e667f3bcc909ULL + stream))) {}

    std::uint64_t bits(std::uint64_t step, std::uint64_t slot = 0) const noexcept {
        return mix64(key_ ^ mix64(step * 0x9e3779b97f4a7c15ULL + slot));
    }

    /// Uniform double in [0, 1).
    double uniform(std::uint64_t step, std::uint64_t slot = 0) const noexcept {
        return static_cast<double>(bits(step, slot) >> 11) * 0x1.0p-53;
    }

private:
    std::uint64_t key_;
};

} // namespace markprod
