#ifndef BIOAGE_RNG_HPP
#define BIOAGE_RNG_HPP

#include <cmath>
#include <cstdint>

namespace bioage {

// xoshiro256++ with splitmix64 seeding. Hand-rolled instead of <random>
// because libstdc++/libc++ distributions emit different sequences; output
// files must hash the same everywhere for a given seed.
class Rng {
public:
    Rng() : Rng(1, 0) {}

    // Independent stream per (seed, stream) pair; replicate r uses stream r.
    Rng(std::uint64_t seed, std::uint64_t stream) {
        std::uint64_t x = seed ^ (0x9E3779B97F4A7C15ULL * (stream + 1));
        for (auto& w : state_) w = splitmix64(x);
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    // Uniform double in [0, 1), 53 random bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform double in (0, 1]; safe as a log argument.
    double uniform_pos() { return 1.0 - uniform(); }

    double exponential(double rate) { return -std::log(uniform_pos()) / rate; }

    // Uniform index in [0, n). Lemire multiply-shift; the O(n / 2^64) bias is
    // far below Monte-Carlo noise at any feasible population size.
    std::uint64_t uniform_index(std::uint64_t n) {
        return static_cast<std::uint64_t>(
            (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
    }

    // Gamma(shape = alpha integer, rate) as a sum of alpha exponentials.
    double gamma_integer_shape(int alpha, double rate) {
        double s = 0.0;
        for (int i = 0; i < alpha; ++i) s += exponential(rate);
        return s;
    }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    static std::uint64_t splitmix64(std::uint64_t& x) {
        std::uint64_t z = (x += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    std::uint64_t state_[4];
};

}  // namespace bioage

#endif
