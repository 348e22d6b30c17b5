#pragma once

#include <optional>
#include <vector>

#include "texrisk/evaluation/metrics.hpp"

namespace texrisk::evaluation {

// Two-sided Fisher exact test on [[a, b], [c, d]]. Tables at least as
// extreme are those whose probability does not exceed the observed one
// (relative tolerance 1e-7).
double fisher_exact(long a, long b, long c, long d);

// Upper edges (q-1 of them) from the healthy values; bin k is [edge_k, edge_{k+1}).
std::vector<double> healthy_quantile_edges(std::vector<double> healthy_values, int q);
int quantile_bin(const std::vector<double>& edges, double value);

struct OrMatrixCell {
    int texture_quantile = 1;  // 1-based
    int pmd_quantile = 1;
    long n_women = 0;
    long n_events = 0;
    double percent = 0.0;  // events / women in the cell, in percent
    std::optional<double> odds_ratio;
    double fisher_p = 1.0;
};

struct OrMatrix {
    Positivity event = Positivity::IC;
    int q = 4;
    std::vector<double> texture_edges;
    std::vector<double> pmd_edges;
    std::vector<OrMatrixCell> cells;  // row-major: texture quantile major
    bool reference_empty = false;     // no events or no non-events in (T1, D1)

    const OrMatrixCell& at(int texture_quantile, int pmd_quantile) const {
        return cells[(texture_quantile - 1) * q + (pmd_quantile - 1)];
    }
};

struct OrInput {
    std::string woman_id;
    double texture = 0.0;
    double pmd = 0.0;
    CancerGroup group = CancerGroup::Healthy;
};

OrMatrix quantile_or_matrix(const std::vector<OrInput>& women, Positivity event, int q = 4);

}  // namespace texrisk::evaluation
