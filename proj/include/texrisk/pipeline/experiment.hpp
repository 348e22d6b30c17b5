#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "texrisk/cohort/curation.hpp"
#include "texrisk/evaluation/report.hpp"
#include "texrisk/pipeline/dataset.hpp"
#include "texrisk/scoring/ensemble.hpp"
#include "texrisk/scoring/fusion.hpp"
#include "texrisk/scoring/trainer.hpp"

namespace texrisk::pipeline {

struct ScorerChoice {
    enum class Kind { Baseline, Plugin };
    Kind kind = Kind::Baseline;
    std::filesystem::path plugin;  // executable; scores the test set only
};

struct ExperimentSpec {
    std::string name = "experiment";
    std::string train_name = "train";
    std::string test_name = "test";
    std::filesystem::path train_manifest;
    std::filesystem::path train_views;
    std::filesystem::path test_manifest;
    std::filesystem::path test_views;
    DataFormat train_format;
    DataFormat test_format;
    bool use_flavor_augmentation = false;
    bool use_risk_factors = false;
    std::vector<std::uint64_t> seeds{0};
    ScorerChoice scorer;
    scoring::ScorerConfig scorer_config;
    int reference_epochs = 40;
    int controls_per_case = cohort::kControlsPerCase;
    int age_tolerance_years = cohort::kAgeToleranceYears;
    int n_folds = cohort::kEnsembleFolds;
    double healthy_removal_fraction = cohort::kHealthyRemovalFraction;
    double case_removal_fraction = cohort::kCaseRemovalFraction;
    PreparationOptions preparation;
    scoring::FusionConfig fusion;
    double flag_fraction = 0.10;
    std::filesystem::path output_dir;  // empty: keep artifacts in memory only
};

void validate_spec(const ExperimentSpec& spec);
nlohmann::json to_json(const ExperimentSpec& spec);
// Relative paths resolve against base_dir; flavor ids against profiles.
ExperimentSpec experiment_spec_from_json(const nlohmann::json& j, const std::vector<imaging::FlavorProfile>& profiles,
                                         const std::filesystem::path& base_dir = {});

// R^{train->test}_{format->format}
std::string result_label(const ExperimentSpec& spec);

struct StageResult {
    cohort::CurationStage stage = cohort::CurationStage::NoiseId;
    cohort::FoldPlan plan;
    std::vector<cohort::InsufficientControls> dropped_cases;
    std::vector<scoring::TrainedInstance> instances;
    std::map<std::string, double> out_of_fold;  // woman -> validation study score
    evaluation::ConvergenceReport convergence;  // all cancers positive
    std::optional<evaluation::ConvergenceReport> convergence_ic;
};

struct ExperimentResult {
    std::string label;
    std::uint64_t seed = 0;
    std::optional<StageResult> noise_id;
    std::optional<StageResult> filtered;
    cohort::ReferenceRiskTable reference;
    std::vector<cohort::RemovedRecord> removed;
    std::vector<cohort::ExcludedRecord> excluded_train;
    std::vector<cohort::ExcludedRecord> excluded_test;
    imaging::StandardizationStats train_stats;
    imaging::StandardizationStats test_stats;
    evaluation::LabeledScores test_scores;
    std::optional<scoring::FusionModel> fusion;
    std::optional<evaluation::LabeledScores> fusion_scores;
    evaluation::EvaluationReport report;
    std::vector<std::filesystem::path> artifacts;
};

// Exclusions, the noise-identification stage and filtering.
struct CurationOutcome {
    std::vector<cohort::ExcludedRecord> excluded;
    imaging::StandardizationStats train_stats;
    StageResult noise_id;
    cohort::ReferenceRiskTable reference;
    std::vector<cohort::RemovedRecord> removed;
    std::vector<cohort::WomanRecord> kept;
};
CurationOutcome curate(const ExperimentSpec& spec, const Dataset& train, std::uint64_t seed,
                       FeatureCache* cache = nullptr);

// Filtered stage: rematch, stratify folds by reference risk, train with early stopping.
StageResult train_ensemble(const ExperimentSpec& spec, const Dataset& train,
                           const std::vector<cohort::WomanRecord>& records, const cohort::ReferenceRiskTable& reference,
                           const imaging::StandardizationStats& stats, std::uint64_t seed,
                           FeatureCache* cache = nullptr);

// Study scores (mean over views of the per-view ensemble mean) for every
// record. Feature MLP instances use the feature path; any other scorer gets
// standardized canvases.
evaluation::LabeledScores score_dataset(const scoring::EnsembleScorer& ensemble, const Dataset& data,
                                        const std::vector<cohort::WomanRecord>& records, const DataFormat& format,
                                        const imaging::StandardizationStats& stats, const PreparationOptions& options,
                                        std::uint64_t seed, FeatureCache* cache = nullptr);

// AUCs for IC, LTC, IC|LTC and all cancers where defined, flagging, and
// optionally the texture x PMD odds-ratio matrices.
void append_evaluation(evaluation::EvaluationReport& report, const std::string& label,
                       const evaluation::LabeledScores& scores, const std::vector<cohort::WomanRecord>& records,
                       double flag_fraction, bool with_or);

// woman_id,group,score with full double precision.
std::string scores_csv(const evaluation::LabeledScores& scores);
evaluation::LabeledScores parse_scores_csv(const std::string& text);

// Curate (noise identification, filtering) -> train ensemble -> score the
// test set -> evaluate, for one seed. Errors carry the failing stage.
ExperimentResult run_experiment(const ExperimentSpec& spec, const Dataset& train, const Dataset& test,
                                std::uint64_t seed, FeatureCache* cache = nullptr);

// Loads both datasets from the spec paths and runs every seed.
std::vector<ExperimentResult> run_experiment(const ExperimentSpec& spec);

}  // namespace texrisk::pipeline
