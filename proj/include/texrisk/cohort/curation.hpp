#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "texrisk/cohort/records.hpp"

namespace texrisk::cohort {

struct ExcludedRecord {
    WomanRecord record;
    std::vector<ExclusionFlag> reasons;
};

struct ExclusionResult {
    std::vector<WomanRecord> kept;
    std::vector<ExcludedRecord> excluded;
};

ExclusionResult apply_exclusions(const std::vector<WomanRecord>& records);

inline constexpr int kControlsPerCase = 20;
inline constexpr int kAgeToleranceYears = 1;

struct MatchSet {
    std::string case_id;
    std::vector<std::string> control_ids;
    int age_tolerance_years = kAgeToleranceYears;
};

struct InsufficientControls {
    std::string case_id;
    std::size_t eligible = 0;
};

struct MatchResult {
    std::vector<MatchSet> sets;
    std::vector<InsufficientControls> dropped;
};

// Cases are visited in a seeded random order; each draws its controls
// uniformly from the still-unused healthy women within the age tolerance.
MatchResult match_case_controls(const std::vector<WomanRecord>& cases, const std::vector<WomanRecord>& healthy_pool,
                                std::uint64_t seed, int controls_per_case = kControlsPerCase,
                                int age_tolerance = kAgeToleranceYears);

struct ReferenceRiskTable {
    std::map<std::string, double> entries;
    std::string source;
};

nlohmann::json to_json(const ReferenceRiskTable& table);
ReferenceRiskTable reference_from_json(const nlohmann::json& j);

enum class CurationStage { NoiseId, Filtered };

std::string to_string(CurationStage stage);

struct ViewRef {
    std::string woman_id;
    std::string view_id;
    bool operator==(const ViewRef&) const = default;
    auto operator<=>(const ViewRef&) const = default;
};

struct Fold {
    std::vector<ViewRef> training_views;
    std::vector<std::string> validation_women;
};

inline constexpr int kEnsembleFolds = 5;

struct FoldPlan {
    std::vector<Fold> folds;
    std::string stratification_keys;
    std::uint64_t seed = 0;
    CurationStage stage = CurationStage::NoiseId;
    std::vector<MatchSet> match_sets;
    std::map<std::string, int> fold_of;  // every woman in the plan
};

nlohmann::json to_json(const FoldPlan& plan);
FoldPlan fold_plan_from_json(const nlohmann::json& j);

// Cases are stratified by (age decile, cancer group), plus reference-risk
// quartile in the Filtered stage; controls follow their case. Unmatched
// women only ever validate: at random in NoiseId, stratified by group and
// risk quartile in Filtered. Training views initially hold all four views
// of every matched woman outside the fold.
FoldPlan assign_ensemble_folds(const std::vector<WomanRecord>& records, const std::vector<MatchSet>& match_sets,
                               const std::vector<std::string>& unmatched, CurationStage stage,
                               const ReferenceRiskTable* reference, std::uint64_t seed, int n_folds = kEnsembleFolds);

// Keeps only the two views contralateral to each case's cancer, for the
// case and all of its controls.
FoldPlan exclude_cancer_side_views(FoldPlan plan, const std::vector<WomanRecord>& records);

inline constexpr double kHealthyRemovalFraction = 0.10;
inline constexpr double kCaseRemovalFraction = 0.04;

struct RemovedRecord {
    WomanRecord record;
    std::string reason;  // "HighRiskHealthy" or "LowRiskCase"
    double risk = 0.0;
};

struct FilterResult {
    std::vector<WomanRecord> kept;
    std::vector<RemovedRecord> removed;
};

FilterResult filter_noisy_samples(const std::vector<WomanRecord>& records, const ReferenceRiskTable& reference,
                                  double healthy_fraction = kHealthyRemovalFraction,
                                  double case_fraction = kCaseRemovalFraction);

}  // namespace texrisk::cohort
