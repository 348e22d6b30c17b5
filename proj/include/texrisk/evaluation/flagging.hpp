#pragma once

#include <optional>
#include <vector>

#include "texrisk/evaluation/metrics.hpp"

namespace texrisk::evaluation {

// Capture rate per group; empty when the group has no events.
struct CaptureRates {
    std::optional<double> sdc;
    std::optional<double> ic;
    std::optional<double> ltc;
    std::optional<double> all_cancers;
};

struct FlaggingResult {
    double fraction = 0.0;
    std::size_t n_flagged = 0;
    std::vector<bool> flagged;  // aligned with the input entries
    CaptureRates capture;
};

FlaggingResult flag_top_fraction(const LabeledScores& scores, double fraction);

}  // namespace texrisk::evaluation
