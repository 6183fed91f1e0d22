#pragma once

#include <cstdint>
#include <stdexcept>

namespace pshuf {

// SplitMix64 (Steele, Lea & Flood 2014; constants per Vigna's public-domain
// reference). Chosen over std engines because the whole generator is pinned
// by three integer constants, so any language can replay the exact stream.

inline constexpr std::uint64_t kSplitMix64Gamma = 0x9E3779B97F4A7C15ULL;

// One SplitMix64 step output taken from state x: add gamma, then avalanche.
inline constexpr std::uint64_t splitmix64_mix(std::uint64_t x) noexcept {
    std::uint64_t z = x + kSplitMix64Gamma;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

// A mutable 64-bit stream. Not safe to share across threads; derive one
// stream per consumer instead.
class RngStream {
public:
    explicit constexpr RngStream(std::uint64_t state) noexcept : state_(state) {}

    constexpr std::uint64_t state() const noexcept { return state_; }

    constexpr std::uint64_t next_u64() noexcept {
        const std::uint64_t out = splitmix64_mix(state_);
        state_ += kSplitMix64Gamma;
        return out;
    }

    // Uniform in [0, bound). Plain modulo reduction: the bias is below 2^-50
    // for any bound that fits a corpus row, and it keeps the draw replayable
    // from the raw u64 stream alone.
    constexpr std::uint64_t next_bounded(std::uint64_t bound) {
        if (bound == 0) {
            throw std::invalid_argument("RngStream::next_bounded: bound must be >= 1");
        }
        return next_u64() % bound;
    }

    // Uniform double in [0, 1), 53 mantissa bits.
    constexpr double next_unit_double() noexcept {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

private:
    std::uint64_t state_;
};

// Stream for a (seed, epoch) pair. Every shuffle decision in the pipeline
// flows from one of these, which is what makes epochs replayable.
inline constexpr RngStream derive_stream(std::uint64_t seed, std::uint64_t epoch) noexcept {
    return RngStream{splitmix64_mix(seed ^ splitmix64_mix(epoch))};
}

}  // namespace pshuf
