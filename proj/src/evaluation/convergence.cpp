#include "texrisk/evaluation/convergence.hpp"

#include <algorithm>
#include <cmath>

#include "texrisk/common/error.hpp"

namespace texrisk::evaluation {

ConvergenceReport convergence_report(const std::vector<AucTrace>& traces) {
    if (traces.empty()) throw Error(ErrorCode::EmptyTrace, "no traces");
    const AucTrace* longest = &traces.front();
    for (const auto& t : traces) {
        if (t.epochs.empty() || t.epochs.size() != t.auc.size()) {
            throw Error(ErrorCode::EmptyTrace, "empty or ragged trace");
        }
        if (t.epochs.size() > longest->epochs.size()) longest = &t;
    }
    const auto& grid = longest->epochs;

    ConvergenceReport out;
    double sum = 0.0;
    for (const auto& t : traces) {
        if (!std::equal(t.epochs.begin(), t.epochs.end(), grid.begin())) {
            throw Error(ErrorCode::LengthMismatch, "trace epochs do not follow the common grid");
        }
        AucTrace padded{grid, t.auc};
        padded.auc.resize(grid.size(), t.auc.back());
        const auto best = std::max_element(padded.auc.begin(), padded.auc.end()) - padded.auc.begin();
        out.argmax_epochs.push_back(grid[best]);
        sum += grid[best];
        out.per_fold_traces.push_back(std::move(padded));
    }
    out.cp_epoch = sum / static_cast<double>(traces.size());

    std::size_t cp_index = 0;
    for (std::size_t i = 1; i < grid.size(); ++i) {
        if (std::abs(grid[i] - out.cp_epoch) < std::abs(grid[cp_index] - out.cp_epoch)) cp_index = i;
    }
    out.cp_grid_epoch = grid[cp_index];
    double lo = out.per_fold_traces.front().auc[cp_index];
    double hi = lo;
    for (const auto& t : out.per_fold_traces) {
        lo = std::min(lo, t.auc[cp_index]);
        hi = std::max(hi, t.auc[cp_index]);
    }
    out.spread_at_cp = hi - lo;
    return out;
}

}  // namespace texrisk::evaluation
