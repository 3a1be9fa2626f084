#ifndef XCT_RNG_HPP
#define XCT_RNG_HPP

#include <cmath>
#include <cstdint>
#include <utility>

// Self-contained random number generation. Standard-library engines are
// portable but the distributions are not (their algorithms are
// implementation-defined), so every mapping from bits to samples lives here.

namespace xct {

// splitmix64: tiny, fast, passes standard statistical batteries. Also used
// to derive independent per-bin streams from (seed, counter) pairs.
inline std::uint64_t splitmix64_next(std::uint64_t& state) {
    state += 0x9e3779b97f4a7c15ull;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    // Independent stream for (seed, index): used for per-bin noise so the
    // result does not depend on evaluation order.
    static Rng stream(std::uint64_t seed, std::uint64_t index) {
        std::uint64_t s = seed;
        std::uint64_t mixed = splitmix64_next(s) ^ (index * 0xd6e8feb86659fd93ull);
        return Rng(mixed);
    }

    std::uint64_t next_u64() { return splitmix64_next(state_); }

    // uniform in [0, 1), 53-bit resolution
    double u01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // uniform in (0, 1]
    double u01_pos() { return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * u01(); }

    // unbiased integer in [0, n) via Lemire's multiply-shift with rejection
    std::uint64_t below(std::uint64_t n) {
        auto mul = [&](std::uint64_t x) {
            return static_cast<unsigned __int128>(x) * static_cast<unsigned __int128>(n);
        };
        unsigned __int128 m = mul(next_u64());
        auto lo = static_cast<std::uint64_t>(m);
        if (lo < n) {
            std::uint64_t floor = (0 - n) % n;
            while (lo < floor) {
                m = mul(next_u64());
                lo = static_cast<std::uint64_t>(m);
            }
        }
        return static_cast<std::uint64_t>(m >> 64);
    }

    // standard normal, Box-Muller with one cached value
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = u01_pos();
        double u2 = u01();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

    // Poisson: Knuth's product method for small means, transformed
    // rejection (Hormann's PTRS) for large ones.
    long long poisson(double lambda) {
        if (lambda <= 0.0) return 0;
        if (lambda < 30.0) {
            double l = std::exp(-lambda);
            long long k = 0;
            double p = 1.0;
            do {
                ++k;
                p *= u01();
            } while (p > l);
            return k - 1;
        }
        double b = 0.931 + 2.53 * std::sqrt(lambda);
        double a = -0.059 + 0.02483 * b;
        double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
        double v_r = 0.9277 - 3.6224 / (b - 2.0);
        double log_lambda = std::log(lambda);
        for (;;) {
            double u = u01() - 0.5;
            double v = u01();
            double us = 0.5 - std::abs(u);
            auto k = static_cast<long long>(std::floor((2.0 * a / us + b) * u + lambda + 0.43));
            if (us >= 0.07 && v <= v_r) return k;
            if (k < 0 || (us < 0.013 && v > us)) continue;
            double lhs = std::log(v * inv_alpha / (a / (us * us) + b));
            double rhs = static_cast<double>(k) * log_lambda - lambda -
                         std::lgamma(static_cast<double>(k) + 1.0);
            if (lhs <= rhs) return k;
        }
    }

    template <class RandomIt>
    void shuffle(RandomIt first, RandomIt last) {
        auto n = static_cast<std::uint64_t>(last - first);
        for (std::uint64_t i = n; i > 1; --i) {
            std::uint64_t j = below(i);
            std::swap(first[i - 1], first[j]);
        }
    }

private:
    std::uint64_t state_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

} // namespace xct

#endif
