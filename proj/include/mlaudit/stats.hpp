#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "mlaudit/errors.hpp"
#include "mlaudit/rng.hpp"

namespace mlaudit {

struct SampleGroup {
    std::string label;
    std::vector<double> values;
};

struct SampleGroups {
    std::vector<SampleGroup> groups;

    std::size_t total_size() const {
        std::size_t n = 0;
        for (const auto& g : groups) n += g.values.size();
        return n;
    }
};

struct TestResult {
    double h_statistic = 0.0;  // tie-corrected H'
    int degrees_freedom = 0;
    double p_value = 1.0;
    double alpha_corrected = 0.05;
    bool reject = false;
    std::optional<double> power;
};

namespace detail {

// Regularized lower incomplete gamma P(a,x) by series expansion (x < a+1).
inline double gamma_p_series(double a, double x) {
    const double gln = std::lgamma(a);
    double ap = a;
    double sum = 1.0 / a;
    double del = sum;
    for (int i = 0; i < 2000; ++i) {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if (std::fabs(del) < std::fabs(sum) * 1e-17)
            return sum * std::exp(-x + a * std::log(x) - gln);
    }
    return sum * std::exp(-x + a * std::log(x) - gln);
}

// Regularized upper incomplete gamma Q(a,x) by continued fraction
// (modified Lentz), valid for x >= a+1.
inline double gamma_q_cf(double a, double x) {
    const double gln = std::lgamma(a);
    constexpr double tiny = 1e-300;
    double b = x + 1.0 - a;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i < 2000; ++i) {
        const double an = -double(i) * (double(i) - a);
        b += 2.0;
        d = an * d + b;
        if (std::fabs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < 1e-17) break;
    }
    return std::exp(-x + a * std::log(x) - gln) * h;
}

inline double gamma_q(double a, double x) {
    if (x <= 0.0) return 1.0;
    if (x < a + 1.0) return 1.0 - gamma_p_series(a, x);
    return gamma_q_cf(a, x);
}

}  // namespace detail

// Upper-tail probability of the chi-square distribution with df degrees of
// freedom: P(X >= x) = Q(df/2, x/2).
inline double chi_square_sf(double x, int df) {
    if (df < 1) fail(errc::degenerate_input, "chi_square_sf needs df >= 1");
    if (!(x >= 0.0)) fail(errc::degenerate_input, "chi_square_sf needs x >= 0");
    const double q = detail::gamma_q(0.5 * df, 0.5 * x);
    return std::clamp(q, 0.0, 1.0);
}

// Bonferroni-corrected significance level for a family of m hypotheses.
inline double bonferroni(double alpha, int m) {
    if (!(alpha > 0.0 && alpha < 1.0))
        fail(errc::degenerate_input, "alpha must be in (0,1)");
    if (m < 1) fail(errc::degenerate_input, "family size must be >= 1");
    return alpha / m;
}

namespace detail {

// Mid-ranks of the pooled sample plus the tie-correction pieces. Returns
// (per-group rank sums, sum of t^3-t over tie groups).
struct PooledRanks {
    std::vector<double> rank_sums;  // per group
    double tie_term = 0.0;          // sum over ties of (t^3 - t)
};

inline PooledRanks pooled_mid_ranks(const SampleGroups& g, std::size_t n_total) {
    std::vector<std::pair<double, std::uint32_t>> pooled;  // (value, group)
    pooled.reserve(n_total);
    for (std::uint32_t gi = 0; gi < g.groups.size(); ++gi)
        for (double v : g.groups[gi].values) pooled.emplace_back(v, gi);
    std::sort(pooled.begin(), pooled.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });

    PooledRanks out;
    out.rank_sums.assign(g.groups.size(), 0.0);
    std::size_t i = 0;
    while (i < pooled.size()) {
        std::size_t j = i + 1;
        while (j < pooled.size() && pooled[j].first == pooled[i].first) ++j;
        const double t = double(j - i);
        const double mid_rank = 0.5 * (double(i + 1) + double(j));  // 1-based
        for (std::size_t k = i; k < j; ++k) out.rank_sums[pooled[k].second] += mid_rank;
        if (t > 1.0) out.tie_term += t * t * t - t;
        i = j;
    }
    return out;
}

}  // namespace detail

// Kruskal-Wallis H test with mid-rank tie correction. All-tied input is
// defined as H' = 0, p = 1 (rather than 0/0).
inline TestResult kruskal_wallis(const SampleGroups& g, double alpha_corrected = 0.05) {
    const std::size_t k = g.groups.size();
    if (k < 2) fail(errc::degenerate_input, "need >= 2 groups");
    for (const auto& grp : g.groups) {
        if (grp.values.empty())
            fail(errc::degenerate_input, "empty group \"" + grp.label + "\"");
        for (double v : grp.values)
            if (!std::isfinite(v))
                fail(errc::degenerate_input, "non-finite value in \"" + grp.label + "\"");
    }
    const std::size_t n = g.total_size();
    if (n < 3) fail(errc::degenerate_input, "need total N >= 3");

    const auto ranks = detail::pooled_mid_ranks(g, n);

    const double nd = double(n);
    double h = 0.0;
    for (std::size_t gi = 0; gi < k; ++gi) {
        const double ni = double(g.groups[gi].values.size());
        const double mean_rank = ranks.rank_sums[gi] / ni;
        const double dev = mean_rank - 0.5 * (nd + 1.0);
        h += ni * dev * dev;
    }
    h *= 12.0 / (nd * (nd + 1.0));

    TestResult res;
    res.degrees_freedom = int(k) - 1;
    res.alpha_corrected = alpha_corrected;

    const double tie_den = 1.0 - ranks.tie_term / (nd * nd * nd - nd);
    if (tie_den <= 0.0) {
        res.h_statistic = 0.0;  // every pooled value identical
        res.p_value = 1.0;
    } else {
        res.h_statistic = std::max(0.0, h / tie_den);
        res.p_value = chi_square_sf(res.h_statistic, res.degrees_freedom);
    }
    res.reject = res.p_value < alpha_corrected;
    return res;
}

// Monte-Carlo power at a given per-group resample size: draw n_per_group
// values with replacement from each observed group, test, and report the
// rejection fraction over n_sims simulations. Bit-reproducible per seed.
inline double estimate_power(const SampleGroups& g, int n_per_group, int n_sims,
                             double alpha, std::uint64_t seed) {
    if (n_per_group < 2) fail(errc::degenerate_input, "n_per_group must be >= 2");
    if (n_sims < 1) fail(errc::degenerate_input, "n_sims must be >= 1");
    if (g.groups.size() < 2) fail(errc::degenerate_input, "need >= 2 groups");
    for (const auto& grp : g.groups)
        if (grp.values.empty())
            fail(errc::degenerate_input, "empty group \"" + grp.label + "\"");

    Rng rng(seed);
    SampleGroups sim;
    sim.groups.resize(g.groups.size());
    for (std::size_t gi = 0; gi < g.groups.size(); ++gi) {
        sim.groups[gi].label = g.groups[gi].label;
        sim.groups[gi].values.resize(std::size_t(n_per_group));
    }

    int rejections = 0;
    for (int s = 0; s < n_sims; ++s) {
        for (std::size_t gi = 0; gi < g.groups.size(); ++gi) {
            const auto& src = g.groups[gi].values;
            auto& dst = sim.groups[gi].values;
            for (int i = 0; i < n_per_group; ++i)
                dst[std::size_t(i)] = src[rng.next_index(src.size())];
        }
        if (kruskal_wallis(sim, alpha).reject) ++rejections;
    }
    return double(rejections) / double(n_sims);
}

}  // namespace mlaudit
