#pragma once

#include <cstdint>
#include <cmath>
#include <vector>

namespace xsim {

// splitmix64 step; also used to derive child seeds.
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Self-contained deterministic generator. The standard distributions are
// implementation-defined, so uniform/normal/shuffle are spelled out here to
// keep runs reproducible across toolchains.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : seed_(seed), state_(seed) {}

    std::uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ULL;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1).
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) {
        return lo + (hi - lo) * uniform();
    }

    // Uniform integer in [0, n). Modulo bias is irrelevant at the sizes
    // used here (n is tiny against 2^64).
    std::uint64_t uniform_int(std::uint64_t n) {
        return next_u64() % n;
    }

    // Standard normal via Box-Muller, one value per call (the cosine leg).
    double normal() {
        double u1 = 1.0 - uniform();  // (0, 1], keeps log() finite
        double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

    double normal(double mean, double stddev) {
        return mean + stddev * normal();
    }

    // Fisher-Yates.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(uniform_int(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    // Independent child stream; derivation depends on the original seed,
    // not on how much of this stream has been consumed.
    Rng derive(std::uint64_t tag) const {
        return Rng(mix64(seed_ ^ mix64(tag + 0x517cc1b727220a95ULL)));
    }

    std::uint64_t seed() const { return seed_; }

private:
    std::uint64_t seed_;
    std::uint64_t state_;
};

}  // namespace xsim
