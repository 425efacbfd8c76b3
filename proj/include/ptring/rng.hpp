#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace ptring {

// Deterministic sampling layer. All variates are derived from the raw 64-bit
// output of mt19937_64 through fixed arithmetic, so identical seeds give
// identical streams on every platform (std::*_distribution would not).
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(scramble(seed)) {}

    // Uniform in [0, 1), 53-bit resolution.
    double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    bool bernoulli(double p) { return uniform() < p; }

    // Exponential with the given mean (= 1/rate).
    double exponential(double mean) { return -mean * std::log1p(-uniform()); }

    // Box-Muller with cached spare.
    double normal(double mean, double sigma) {
        if (have_spare_) {
            have_spare_ = false;
            return mean + sigma * spare_;
        }
        double r = std::sqrt(-2.0 * std::log1p(-uniform()));
        double t = 6.283185307179586476925286766559 * uniform();
        spare_ = r * std::sin(t);
        have_spare_ = true;
        return mean + sigma * r * std::cos(t);
    }

    // Exact Poisson sampling by counting unit-exponential arrivals. O(mean),
    // fine for the count scales this project needs (<= a few 1e6).
    std::int64_t poisson(double mean) {
        if (mean <= 0.0) return 0;
        std::int64_t n = 0;
        double acc = exponential(1.0);
        while (acc <= mean) {
            ++n;
            acc += exponential(1.0);
        }
        return n;
    }

    // Independent substream for (seed, index); order-independent Monte Carlo.
    static std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
        return seed ^ scramble(0x9e3779b97f4a7c15ULL * (index + 1));
    }

    static Rng substream(std::uint64_t seed, std::uint64_t index) {
        return Rng(derive_seed(seed, index));
    }

private:
    // splitmix64 finalizer; decorrelates small/sequential seeds.
    static std::uint64_t scramble(std::uint64_t x) {
        x += 0x9e3779b97f4a7c15ULL;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
        return x ^ (x >> 31);
    }

    std::mt19937_64 eng_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace ptring
