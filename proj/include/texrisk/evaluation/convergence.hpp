#pragma once

#include <vector>

namespace texrisk::evaluation {

struct AucTrace {
    std::vector<int> epochs;
    std::vector<double> auc;
};

struct ConvergenceReport {
    std::vector<AucTrace> per_fold_traces;  // padded to the common grid
    std::vector<int> argmax_epochs;
    double cp_epoch = 0.0;  // mean of the per-fold argmax epochs
    int cp_grid_epoch = 0;  // nearest grid epoch
    double spread_at_cp = 0.0;
};

// Shorter traces must follow the longest one's epoch grid; they are padded
// with their last value. The first maximum wins within a trace.
ConvergenceReport convergence_report(const std::vector<AucTrace>& traces);

}  // namespace texrisk::evaluation
