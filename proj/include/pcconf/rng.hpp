#pragma once

// Deterministic randomness. One global seed; every consumer derives an
// independent stream from (parent seed, tag string), so partial re-runs and
// parallel generation reproduce the single-threaded full run exactly.
//
// Engine is std::mt19937_64 (bit-exact by the standard). All distributions
// are implemented here by hand: the <random> distribution objects are
// implementation-defined and would break cross-toolchain reproducibility.

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "pcconf/hash.hpp"

namespace pcconf {

inline std::uint64_t splitmix64_next(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Seed splitting: child = splitmix(splitmix(root) ^ fnv1a64(tag)).
// Derivation depends only on (root, tag), never on draw order.
inline std::uint64_t derive_seed(std::uint64_t root, std::string_view tag) {
    std::uint64_t s = root ^ 0x6a09e667f3bcc908ULL;
    std::uint64_t mixed = splitmix64_next(s) ^ fnv1a64(tag);
    return splitmix64_next(mixed);
}

class Rng {
  public:
    explicit Rng(std::uint64_t seed) : seed_(seed), eng_(seed) {}

    std::uint64_t seed() const { return seed_; }

    Rng stream(std::string_view tag) const { return Rng(derive_seed(seed_, tag)); }
    Rng stream(std::string_view tag, std::uint64_t index) const {
        return Rng(derive_seed(seed_, std::string(tag) + "/" + std::to_string(index)));
    }

    std::uint64_t next_u64() { return eng_(); }

    // [0,1) with 53 random bits
    double u01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }
    // (0,1), safe for logs
    double u01_open() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    // Box-Muller, second deviate cached
    double normal() {
        if (has_cached_) {
            has_cached_ = false;
            return cached_;
        }
        double u1 = u01_open();
        double u2 = u01();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 6.283185307179586476925286766559 * u2;
        cached_ = r * std::sin(a);
        has_cached_ = true;
        return r * std::cos(a);
    }

    double exponential() { return -std::log(u01_open()); }

    // Marsaglia-Tsang for shape >= 1; boosted for shape < 1
    double gamma(double shape) {
        if (!(shape > 0.0)) throw std::invalid_argument("gamma: shape must be > 0");
        if (shape < 1.0) {
            double u = u01_open();
            return gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
        }
        double d = shape - 1.0 / 3.0;
        double c = 1.0 / std::sqrt(9.0 * d);
        for (;;) {
            double x, v;
            do {
                x = normal();
                v = 1.0 + c * x;
            } while (v <= 0.0);
            v = v * v * v;
            double u = u01_open();
            if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
            if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
        }
    }

    double beta(double a, double b) {
        double x = gamma(a);
        double y = gamma(b);
        return x / (x + y);
    }

    // unbiased integer in [0, n) (Lemire's multiply-shift with rejection)
    std::uint64_t below(std::uint64_t n) {
        if (n == 0) throw std::invalid_argument("below: n must be positive");
        unsigned __int128 m = static_cast<unsigned __int128>(next_u64()) * n;
        auto lo = static_cast<std::uint64_t>(m);
        if (lo < n) {
            std::uint64_t t = (0 - n) % n;
            while (lo < t) {
                m = static_cast<unsigned __int128>(next_u64()) * n;
                lo = static_cast<std::uint64_t>(m);
            }
        }
        return static_cast<std::uint64_t>(m >> 64);
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    // k distinct indices from [0, n), order random (partial Fisher-Yates)
    std::vector<std::uint32_t> sample_distinct(std::uint32_t n, std::uint32_t k) {
        if (k > n) throw std::invalid_argument("sample_distinct: k > n");
        std::vector<std::uint32_t> idx(n);
        for (std::uint32_t i = 0; i < n; ++i) idx[i] = i;
        for (std::uint32_t i = 0; i < k; ++i) {
            std::uint32_t j = i + static_cast<std::uint32_t>(below(n - i));
            std::swap(idx[i], idx[j]);
        }
        idx.resize(k);
        return idx;
    }

  private:
    std::uint64_t seed_;
    std::mt19937_64 eng_;
    bool has_cached_ = false;
    double cached_ = 0.0;
};

} // namespace pcconf
