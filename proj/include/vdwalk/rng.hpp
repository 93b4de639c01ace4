#pragma once

#include <cmath>
#include <cstdint>

namespace vdwalk {

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// Counter-based stream: draw i of stream (seed, stream_id) is a pure function
/// of (seed, stream_id, i), so paths can be generated in any order or thread.
class StreamRng {
public:
    StreamRng(std::uint64_t seed, std::uint64_t stream_id)
        : key_(mix64(seed ^ mix64(stream_id ^ 0xD1B54A32D192ED03ULL))) {}

    std::uint64_t next_u64() { return mix64(key_ + 0x9E3779B97F4A7C15ULL * (++counter_)); }

    /// Uniform on (0, 1], 53-bit resolution.
    double uniform_open0() { return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53; }

    /// Uniform integer in [0, bound).
    std::uint64_t below(std::uint64_t bound) {
        return static_cast<std::uint64_t>((static_cast<unsigned __int128>(next_u64()) * bound) >> 64);
    }

    double exponential(double rate) { return -std::log(uniform_open0()) / rate; }

    std::uint64_t draws() const { return counter_; }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

}  // namespace vdwalk
