#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace detnas {

// Seeded generator with hand-rolled distributions. std::mt19937_64 output is
// fully specified by the standard; the distribution helpers below avoid the
// implementation-defined std::*_distribution classes so that every sequence
// is reproducible from the seed alone.
class Rng {
  public:
    explicit Rng(uint64_t seed) : gen_(seed) {}

    uint64_t next_u64() { return gen_(); }

    // Uniform in [0, n), unbiased via rejection. n must be > 0.
    uint64_t uniform_u64(uint64_t n) {
        uint64_t x, r;
        do {
            x = gen_();
            r = x % n;
        } while (x - r > UINT64_MAX - (n - 1));
        return r;
    }

    int uniform_int(int n) { return static_cast<int>(uniform_u64(static_cast<uint64_t>(n))); }

    // Uniform in [0, 1) with 53-bit resolution.
    double uniform_double() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    // Standard normal via Box-Muller; the spare value is cached, so draws
    // come in deterministic pairs.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1, u2;
        do {
            u1 = uniform_double();
        } while (u1 <= 0.0);
        u2 = uniform_double();
        const double mag = std::sqrt(-2.0 * std::log(u1));
        const double two_pi = 6.283185307179586476925286766559;
        spare_ = mag * std::sin(two_pi * u2);
        has_spare_ = true;
        return mag * std::cos(two_pi * u2);
    }

    float normal_f(float stddev) { return static_cast<float>(normal() * stddev); }

    // Derives an independent stream seed (splitmix64 finalizer).
    static uint64_t derive(uint64_t seed, uint64_t stream) {
        uint64_t z = seed + 0x9E3779B97F4A7C15ull * (stream + 1);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

  private:
    std::mt19937_64 gen_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace detnas
