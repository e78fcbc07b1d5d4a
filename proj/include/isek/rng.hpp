#pragma once

#include <cstdint>

namespace isek {

// splitmix64; used to mix stream keys and to expand seeds into state.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Stream labels. A stream is identified by (master seed, tag, index, sub),
// so adding trials or modules never perturbs the draws of existing ones.
namespace stream {
constexpr std::uint64_t topology = 1;
constexpr std::uint64_t gossip = 2;
constexpr std::uint64_t trust = 3;
constexpr std::uint64_t matching = 4;
constexpr std::uint64_t lifecycle = 5;
constexpr std::uint64_t population = 6;
constexpr std::uint64_t harness = 7;
}  // namespace stream

/**
 * Deterministic random stream (xoshiro256**), reproducible bit-for-bit
 * across platforms. Floating-point draws take the top 53 bits instead of
 * going through std::uniform_real_distribution, whose output is
 * implementation-defined.
 */
class RngStream {
public:
    explicit RngStream(std::uint64_t key) {
        std::uint64_t sm = key;
        for (auto& word : state_) word = splitmix64(sm);
    }

    // Counter-based splitting: each (tag, index, sub) triple under one
    // master seed yields an independent stream.
    static RngStream derive(std::uint64_t master, std::uint64_t tag,
                            std::uint64_t index = 0, std::uint64_t sub = 0) {
        std::uint64_t sm = master;
        std::uint64_t key = splitmix64(sm);
        sm = key ^ (tag * 0x9e3779b97f4a7c15ULL);
        key = splitmix64(sm);
        sm = key ^ (index * 0xbf58476d1ce4e5b9ULL);
        key = splitmix64(sm);
        sm = key ^ (sub * 0x94d049bb133111ebULL);
        return RngStream(splitmix64(sm));
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    // Uniform in [0, 1), 53-bit resolution.
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    bool bernoulli(double p) { return next_double() < p; }

    // Unbiased integer in [0, bound); Lemire multiply-shift with rejection.
    std::uint32_t next_below(std::uint32_t bound) {
        std::uint64_t x = next_u64() >> 32;
        std::uint64_t m = x * bound;
        auto low = static_cast<std::uint32_t>(m);
        if (low < bound) {
            const std::uint32_t threshold = (0u - bound) % bound;
            while (low < threshold) {
                x = next_u64() >> 32;
                m = x * bound;
                low = static_cast<std::uint32_t>(m);
            }
        }
        return static_cast<std::uint32_t>(m >> 32);
    }

private:
    static std::uint64_t rotl(std::uint64_t v, int k) { return (v << k) | (v >> (64 - k)); }

    std::uint64_t state_[4];
};

}  // namespace isek
