#pragma once

#include <cstdint>

namespace gwtrace {

// One splitmix64 step.  Used only to expand seeds into generator state.
inline std::uint64_t splitmix64_next(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

// xoshiro256++ with cheap logical substreams.
//
// Stream k of seed s is seeded from the splitmix64 chain started at
// s + (k+1) * 2^64/phi, so (seed, stream) pairs give decorrelated,
// reproducible generators.  Replicated experiments give each replica its
// own stream index; results are then independent of scheduling order.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed, std::uint64_t stream = 0) {
        std::uint64_t sm = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
        for (auto& w : s_) w = splitmix64_next(sm);
        // all-zero state is the one fixed point of xoshiro; never hand it out
        if ((s_[0] | s_[1] | s_[2] | s_[3]) == 0) s_[0] = 0x1ULL;
    }

    std::uint64_t next() {
        const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // Uniform double in [0, 1) with 53 random bits.
    double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    // Uniform integer in [0, n).  Multiply-shift map; the bias is at most
    // n / 2^64, far below anything the bootstrap or shuffles here resolve.
    std::uint64_t below(std::uint64_t n) {
        return static_cast<std::uint64_t>(
            (static_cast<unsigned __int128>(next()) * n) >> 64);
    }

private:
    static constexpr std::uint64_t rotl(std::uint64_t x, int k) {
        return (x << k) | (x >> (64 - k));
    }
    std::uint64_t s_[4];
};

}  // namespace gwtrace
