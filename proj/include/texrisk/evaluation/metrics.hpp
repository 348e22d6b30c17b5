#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "texrisk/common/cancer_group.hpp"

namespace texrisk::evaluation {

// Which groups count as positive. Everyone else is negative.
enum class Positivity { IC, LTC, IcOrLtc, AllCancers };

std::string_view to_string(Positivity positivity);
Positivity parse_positivity(std::string_view text);
bool is_positive(CancerGroup group, Positivity positivity);

struct ScoreEntry {
    std::string woman_id;
    double score = 0.0;
    CancerGroup group = CancerGroup::Healthy;
};

using LabeledScores = std::vector<ScoreEntry>;

inline constexpr double kZ95 = 1.959963984540054;

struct AucResult {
    double auc = 0.5;
    double ci_low = 0.0;
    double ci_high = 1.0;
    double variance = 0.0;  // DeLong
    Positivity positivity = Positivity::AllCancers;
    std::size_t n_positive = 0;
    std::size_t n_negative = 0;
};

AucResult compute_auc(const LabeledScores& scores, Positivity positivity);

struct DelongResult {
    double p_value = 1.0;
    double z = 0.0;
    AucResult a;
    AucResult b;
};

// Paired inputs are aligned by woman_id; the id sets (and groups) must match.
// Unpaired inputs must not share any woman_id.
DelongResult delong_test(const LabeledScores& a, const LabeledScores& b, Positivity positivity, bool paired);

double sensitivity_at_specificity(const LabeledScores& scores, Positivity positivity, double specificity);

struct RocPoint {
    double fpr = 0.0;
    double tpr = 0.0;
};

std::vector<RocPoint> roc_curve(const LabeledScores& scores, Positivity positivity);

// Midranks (1-based, ties averaged) of values.
std::vector<double> midranks(const std::vector<double>& values);

}  // namespace texrisk::evaluation
