#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace npnet {

inline std::uint64_t splitmix64(std::uint64_t& x) {
    std::uint64_t z = (x += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

/// Mixes a seed with a stream tag so independent consumers (init, splits,
/// per-epoch shuffles) get decorrelated streams from one run seed.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t tag) {
    std::uint64_t s = seed ^ (0x9E3779B97F4A7C15ull + (tag << 1));
    std::uint64_t a = splitmix64(s);
    std::uint64_t b = splitmix64(s);
    return a ^ (b >> 13);
}

/// xoshiro256** generator. Chosen over std engines because its raw output and
/// our derived draws (bounded ints, Box-Muller normals) are fully specified
/// here, keeping shuffles and weight init identical across standard libraries.
/// State is four u64 words, which the checkpoint format stores directly.
class Rng {
public:
    Rng() : Rng(0) {}
    explicit Rng(std::uint64_t seed) {
        std::uint64_t sm = seed;
        for (auto& w : s_) w = splitmix64(sm);
    }

    std::uint64_t next() {
        const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    /// Uniform double in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    /// Unbiased integer in [0, n) by rejection.
    std::uint64_t bounded(std::uint64_t n) {
        if (n <= 1) return 0;
        std::uint64_t x, r;
        do {
            x = next();
            r = x % n;
        } while (x - r > ~std::uint64_t{0} - n + 1);
        return r;
    }

    /// Box-Muller normal draw. Stateless apart from the generator itself, so
    /// checkpointed streams resume exactly.
    double normal(double mean = 0.0, double stddev = 1.0) {
        double u;
        do {
            u = uniform01();
        } while (u <= 0.0);
        const double v = uniform01();
        const double mag = std::sqrt(-2.0 * std::log(u));
        return mean + stddev * mag * std::cos(2.0 * std::numbers::pi * v);
    }

    std::array<std::uint64_t, 4> state() const { return s_; }
    void set_state(const std::array<std::uint64_t, 4>& s) { s_ = s; }

    bool operator==(const Rng& other) const { return s_ == other.s_; }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
    std::array<std::uint64_t, 4> s_{};
};

} // namespace npnet
