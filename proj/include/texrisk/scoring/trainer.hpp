#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "texrisk/common/cancer_group.hpp"
#include "texrisk/scoring/features.hpp"
#include "texrisk/scoring/mlp.hpp"

namespace texrisk::scoring {

struct ScorerConfig {
    int batch_size = 10;
    double learning_rate = 1e-5;
    int max_epochs = 40;
    // Fraction of (view x format) pairs visited per epoch; 0 selects
    // 1 / number of formats (1/6 with six flavors, 1 for raw only).
    double epoch_fraction = 0.0;
    AdamConfig adam{};
    // Applied after the first and second hidden layer.
    std::vector<double> dropout_rates{0.5, 0.25};
    int hidden_width = 512;
    std::uint64_t seed = 0;
    // Off for the reference model: the final epoch's parameters are kept.
    bool early_stopping = true;
};

void validate_config(const ScorerConfig& config);
nlohmann::json to_json(const ScorerConfig& config);
ScorerConfig scorer_config_from_json(const nlohmann::json& j, ScorerConfig base = {});

// Per-feature z-normalization fitted on the training bank.
struct FeatureNormalizer {
    std::vector<double> mean;
    std::vector<double> scale;

    static FeatureNormalizer fit(const std::vector<const FeatureVector*>& samples);
    FeatureVector apply(const FeatureVector& f) const;
};

// One training view: variants[format][k] are the features of the view in
// that format under the k-th pre-drawn geometric augmentation.
struct BankEntry {
    std::string woman_id;
    std::string view_id;
    int label = 0;
    std::vector<std::vector<FeatureVector>> variants;
};

struct ValidationStudy {
    std::string woman_id;
    CancerGroup group = CancerGroup::Healthy;
    std::vector<FeatureVector> views;
};

struct FoldData {
    std::vector<BankEntry> training;
    std::vector<ValidationStudy> validation;
};

struct EpochSample {
    std::size_t entry = 0;
    std::size_t format = 0;
    std::size_t augmentation = 0;
};

// Visit order for one epoch: entries cycle through seeded permutations,
// each paired with a uniformly drawn format and augmentation.
std::vector<EpochSample> draw_epoch(const std::vector<BankEntry>& bank, double epoch_fraction, Rng& rng);

struct TrainedInstance {
    FeatureNormalizer normalizer;
    Mlp model;
    ScorerConfig config;
    int best_epoch = 0;
    double best_auc = 0.0;
    std::vector<int> epochs;
    std::vector<double> auc_all;  // validation AUC, all cancers positive
    std::vector<double> auc_ic;   // NaN when undefined
    std::vector<double> auc_ltc;

    double predict(const FeatureVector& features) const { return model.predict(normalizer.apply(features)); }
    double study_score(const std::vector<FeatureVector>& views) const;
};

nlohmann::json to_json(const TrainedInstance& instance);
TrainedInstance instance_from_json(const nlohmann::json& j);

// Mini-batch Adam on the feature MLP. The returned parameters are those of
// the epoch with the highest validation AUC (or the last epoch when early
// stopping is off). Throws NoValidationPositives.
TrainedInstance train_fold_scorer(const FoldData& data, const ScorerConfig& config);

}  // namespace texrisk::scoring
