#pragma once

// Reference implementations used only by tests. They follow the textbook
// definitions directly and share no code with the library.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <utility>
#include <vector>

namespace texrisk::testing {

// P(pos > neg) + 0.5 P(tie) by counting all pairs.
inline double brute_force_auc(const std::vector<double>& pos, const std::vector<double>& neg) {
    std::int64_t twice = 0;
    for (double p : pos) {
        for (double n : neg) twice += p > n ? 2 : (p == n ? 1 : 0);
    }
    return (static_cast<double>(twice) / 2.0) / (static_cast<double>(pos.size()) * static_cast<double>(neg.size()));
}

// (score, label) pairs
inline double brute_force_auc(const std::vector<std::pair<double, int>>& scored) {
    std::vector<double> pos, neg;
    for (const auto& [s, y] : scored) (y ? pos : neg).push_back(s);
    return brute_force_auc(pos, neg);
}

inline long double binomial(int n, int k) {
    if (k < 0 || k > n) return 0.0L;
    k = std::min(k, n - k);
    long double r = 1.0L;
    for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return r;
}

// Hypergeometric pmf of the top-left cell over its support, for margins
// (row1 = r1, col1 = c1, total = n). Index 0 corresponds to x = lo.
struct HypergeometricFamily {
    int lo = 0;
    int hi = 0;
    std::vector<long double> pmf;
};

inline HypergeometricFamily hypergeometric_family(int n, int r1, int c1) {
    HypergeometricFamily f;
    f.lo = std::max(0, r1 + c1 - n);
    f.hi = std::min(r1, c1);
    const long double denom = binomial(n, r1);
    for (int x = f.lo; x <= f.hi; ++x) f.pmf.push_back(binomial(c1, x) * binomial(n - c1, r1 - x) / denom);
    return f;
}

// Two-sided p: total mass of tables no more probable than the observed one.
inline double enumerate_fisher(const HypergeometricFamily& f, int a) {
    const long double cutoff = f.pmf[a - f.lo] * (1.0L + 1e-7L);
    long double p = 0.0L;
    for (long double v : f.pmf) {
        if (v <= cutoff) p += v;
    }
    return static_cast<double>(std::min(p, 1.0L));
}

inline double enumerate_fisher(int a, int b, int c, int d) {
    return enumerate_fisher(hypergeometric_family(a + b + c + d, a + b, a + c), a);
}

// Stratified paired bootstrap of the AUC difference. Positives and
// negatives are resampled separately; both scorers see the same draw.
inline double bootstrap_delong_p(const std::vector<double>& pos_a, const std::vector<double>& neg_a,
                                 const std::vector<double>& pos_b, const std::vector<double>& neg_b, int resamples,
                                 std::uint64_t seed) {
    const double observed = brute_force_auc(pos_a, neg_a) - brute_force_auc(pos_b, neg_b);
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick_pos(0, pos_a.size() - 1);
    std::uniform_int_distribution<std::size_t> pick_neg(0, neg_a.size() - 1);
    std::vector<double> pa(pos_a.size()), pb(pos_a.size()), na(neg_a.size()), nb(neg_a.size());
    double sum = 0.0;
    double sum2 = 0.0;
    for (int r = 0; r < resamples; ++r) {
        for (std::size_t i = 0; i < pa.size(); ++i) {
            const auto k = pick_pos(rng);
            pa[i] = pos_a[k];
            pb[i] = pos_b[k];
        }
        for (std::size_t j = 0; j < na.size(); ++j) {
            const auto k = pick_neg(rng);
            na[j] = neg_a[k];
            nb[j] = neg_b[k];
        }
        const double d = brute_force_auc(pa, na) - brute_force_auc(pb, nb);
        sum += d;
        sum2 += d * d;
    }
    const double mean = sum / resamples;
    const double sd = std::sqrt(std::max(0.0, (sum2 - resamples * mean * mean) / (resamples - 1)));
    if (sd == 0.0) return observed == 0.0 ? 1.0 : 0.0;
    return std::erfc(std::abs(observed / sd) / std::sqrt(2.0));
}

}  // namespace texrisk::testing
