#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace mlaudit {

// Deterministic random source. All transforms are spelled out here instead
// of using std::*_distribution, whose outputs are implementation-defined;
// identical seeds therefore produce identical streams on every platform.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    std::uint64_t next_u64() { return eng_(); }

    // Uniform double in [0, 1) with 53 random bits.
    double next_unit() {
        return double(eng_() >> 11) * 0x1.0p-53;
    }

    // Uniform index in [0, n). Lemire multiply-shift; bias is < n / 2^64.
    std::size_t next_index(std::size_t n) {
        using u128 = unsigned __int128;
        return std::size_t((u128(eng_()) * u128(n)) >> 64);
    }

    std::uint64_t next_below(std::uint64_t n) {
        using u128 = unsigned __int128;
        return std::uint64_t((u128(eng_()) * u128(n)) >> 64);
    }

    // Standard normal via Box-Muller (one value per call, no cache).
    double next_normal() {
        double u1 = next_unit();
        double u2 = next_unit();
        while (u1 <= 0.0) u1 = next_unit();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
    }

    double next_normal(double mean, double sd) { return mean + sd * next_normal(); }

    // Normal truncated to [lo, hi] by rejection. Callers keep (mean, sd)
    // well inside the interval, so a few draws suffice.
    double next_truncated_normal(double mean, double sd, double lo, double hi) {
        for (int i = 0; i < 1000; ++i) {
            const double v = next_normal(mean, sd);
            if (v >= lo && v <= hi) return v;
        }
        return mean < lo ? lo : (mean > hi ? hi : mean);
    }

private:
    std::mt19937_64 eng_;
};

}  // namespace mlaudit
