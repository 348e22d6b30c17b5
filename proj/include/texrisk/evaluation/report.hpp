#pragma once

#include <string>
#include <vector>

#include "json.hpp"
#include "texrisk/evaluation/convergence.hpp"
#include "texrisk/evaluation/flagging.hpp"
#include "texrisk/evaluation/metrics.hpp"
#include "texrisk/evaluation/odds_ratio.hpp"

namespace texrisk::evaluation {

inline constexpr const char* kReportSchemaVersion = "texrisk.evaluation/1";

struct NamedAuc {
    std::string label;  // e.g. "R^{train->test}_{raw->flavor:flavor7}"
    AucResult result;
};

struct NamedComparison {
    std::string label_a;
    std::string label_b;
    Positivity positivity = Positivity::AllCancers;
    bool paired = true;
    DelongResult result;
};

struct NamedFlagging {
    std::string label;
    FlaggingResult result;
    std::optional<double> sensitivity_at_90_specificity;
};

struct NamedOrMatrix {
    std::string label;
    OrMatrix matrix;
};

struct NamedConvergence {
    std::string label;
    ConvergenceReport report;
};

struct EvaluationReport {
    std::vector<NamedAuc> aucs;
    std::vector<NamedComparison> comparisons;
    std::vector<NamedFlagging> flagging;
    std::vector<NamedOrMatrix> or_matrices;
    std::vector<NamedConvergence> convergence;
    std::vector<std::string> notes;
};

nlohmann::json to_json(const AucResult& r);
nlohmann::json to_json(const OrMatrix& m);
nlohmann::json to_json(const ConvergenceReport& c);
nlohmann::json to_json(const EvaluationReport& report);

// Table-1 style grid: one row per (label, positivity).
std::string auc_grid_csv(const EvaluationReport& report);
std::string or_matrix_csv(const OrMatrix& m);

std::string svg_traces(const ConvergenceReport& c, const std::string& title);
std::string svg_roc(const std::vector<std::pair<std::string, std::vector<RocPoint>>>& curves,
                    const std::string& title);
std::string svg_or_heatmap(const OrMatrix& m, const std::string& title);

}  // namespace texrisk::evaluation
