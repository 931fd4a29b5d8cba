#pragma once

#include <cmath>
#include <cstdint>

namespace iperc {

inline uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline uint64_t mix_seed(uint64_t seed, uint64_t a, uint64_t b = 0) {
    return splitmix64(splitmix64(seed ^ splitmix64(a)) ^ splitmix64(b ^ 0x6a09e667f3bcc909ULL));
}

// Small deterministic generator. Used instead of std::mt19937_64 so that
// streams are cheap to spawn per (site, epoch) and draws are identical across
// standard library implementations.
class Rng {
public:
    explicit Rng(uint64_t seed) : state_(splitmix64(seed ^ 0x2545f4914f6cdd1dULL)) {}

    uint64_t next_u64() {
        state_ = state_ * 6364136223846793005ULL + 1442695040888963407ULL;
        return splitmix64(state_);
    }

    // Uniform in [0, 1) with 53 bits.
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform in (0, 1].
    double next_double_pos() { return 1.0 - next_double(); }

    // Poisson(1) by Knuth inversion.
    int next_poisson1() {
        const double limit = 0.36787944117144233;  // e^{-1}
        int n = 0;
        double p = 1.0;
        do {
            p *= next_double_pos();
            ++n;
        } while (p > limit);
        return n - 1;
    }

    double next_exp() { return -std::log(next_double_pos()); }

    uint32_t next_below(uint32_t n) { return static_cast<uint32_t>(next_u64() % n); }

private:
    uint64_t state_;
};

}  // namespace iperc
