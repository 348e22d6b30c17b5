#include "texrisk/evaluation/odds_ratio.hpp"

#include <algorithm>
#include <cmath>

#include "texrisk/common/error.hpp"

namespace texrisk::evaluation {

double fisher_exact(long a, long b, long c, long d) {
    if (a < 0 || b < 0 || c < 0 || d < 0) throw Error(ErrorCode::ParameterOutOfRange, "negative cell count");
    const long n = a + b + c + d;
    const long r1 = a + b;
    const long c1 = a + c;
    const long lo = std::max(0L, r1 + c1 - n);
    const long hi = std::min(r1, c1);
    if (lo == hi) return 1.0;

    // Unnormalized hypergeometric weights via the ratio recurrence, scaled so the mode is 1.
    std::vector<double> w(static_cast<std::size_t>(hi - lo + 1));
    const long mode = std::clamp(static_cast<long>(std::floor((r1 + 1.0) * (c1 + 1.0) / (n + 2.0))), lo, hi);
    w[mode - lo] = 1.0;
    for (long x = mode; x < hi; ++x) {
        const double ratio = static_cast<double>(r1 - x) * static_cast<double>(c1 - x) /
                             (static_cast<double>(x + 1) * static_cast<double>(n - r1 - c1 + x + 1));
        w[x + 1 - lo] = w[x - lo] * ratio;
    }
    for (long x = mode; x > lo; --x) {
        const double ratio = static_cast<double>(x) * static_cast<double>(n - r1 - c1 + x) /
                             (static_cast<double>(r1 - x + 1) * static_cast<double>(c1 - x + 1));
        w[x - 1 - lo] = w[x - lo] * ratio;
    }
    const double cutoff = w[a - lo] * (1.0 + 1e-7);
    double total = 0.0;
    double tail = 0.0;
    for (double v : w) {
        total += v;
        if (v <= cutoff) tail += v;
    }
    return std::min(1.0, tail / total);
}

std::vector<double> healthy_quantile_edges(std::vector<double> healthy_values, int q) {
    if (q < 2) throw Error(ErrorCode::ParameterOutOfRange, "q must be at least 2");
    if (healthy_values.empty()) throw Error(ErrorCode::DegenerateClasses, "no healthy women for quantile edges");
    std::sort(healthy_values.begin(), healthy_values.end());
    const double n = static_cast<double>(healthy_values.size());
    std::vector<double> edges;
    for (int j = 1; j < q; ++j) {
        auto idx = static_cast<std::size_t>(std::lround(j * n / q));
        idx = std::min(idx, healthy_values.size() - 1);
        edges.push_back(healthy_values[idx]);
    }
    return edges;
}

int quantile_bin(const std::vector<double>& edges, double value) {
    return static_cast<int>(std::upper_bound(edges.begin(), edges.end(), value) - edges.begin());
}

OrMatrix quantile_or_matrix(const std::vector<OrInput>& women, Positivity event, int q) {
    OrMatrix m;
    m.event = event;
    m.q = q;
    std::vector<double> tex;
    std::vector<double> pmd;
    for (const auto& w : women) {
        if (w.group == CancerGroup::Healthy) {
            tex.push_back(w.texture);
            pmd.push_back(w.pmd);
        }
    }
    m.texture_edges = healthy_quantile_edges(tex, q);
    m.pmd_edges = healthy_quantile_edges(pmd, q);

    m.cells.resize(static_cast<std::size_t>(q * q));
    for (int t = 0; t < q; ++t) {
        for (int p = 0; p < q; ++p) {
            m.cells[t * q + p].texture_quantile = t + 1;
            m.cells[t * q + p].pmd_quantile = p + 1;
        }
    }
    for (const auto& w : women) {
        auto& cell = m.cells[quantile_bin(m.texture_edges, w.texture) * q + quantile_bin(m.pmd_edges, w.pmd)];
        ++cell.n_women;
        cell.n_events += is_positive(w.group, event);
    }

    const auto& ref = m.cells[0];
    const long e_ref = ref.n_events;
    const long h_ref = ref.n_women - ref.n_events;
    m.reference_empty = e_ref == 0 || h_ref == 0;
    for (auto& cell : m.cells) {
        const long e = cell.n_events;
        const long h = cell.n_women - cell.n_events;
        cell.percent = cell.n_women > 0 ? 100.0 * e / cell.n_women : 0.0;
        if (&cell == &ref) {
            cell.odds_ratio = 1.0;
            cell.fisher_p = 1.0;
            continue;
        }
        if (h > 0 && e_ref > 0) cell.odds_ratio = static_cast<double>(e) * h_ref / (static_cast<double>(h) * e_ref);
        cell.fisher_p = fisher_exact(e, h, e_ref, h_ref);
    }
    return m;
}

}  // namespace texrisk::evaluation
