#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "texrisk/scoring/mlp.hpp"

namespace texrisk::scoring {

struct FusionInput {
    double texture_score = 0.0;
    double age_years = 0.0;
    bool clips = false;
    double pmd = 0.0;
};

struct FusionConfig {
    int hidden1 = 16;
    int hidden2 = 8;
    int batch_size = 32;
    double learning_rate = 1e-2;
    int max_epochs = 200;
    int patience = 40;           // epochs without held-out improvement
    double holdout_fraction = 0.2;
    std::uint64_t seed = 0;
};

nlohmann::json to_json(const FusionConfig& config);
FusionConfig fusion_config_from_json(const nlohmann::json& j, FusionConfig base = {});

// Three fully connected layers over (texture, age_normalized, clips, pmd).
struct FusionModel {
    Mlp net;
    double age_min = 0.0;
    double age_max = 1.0;
    // z-scaling of the four inputs fitted on the training rows
    std::vector<double> input_mean{0.0, 0.0, 0.0, 0.0};
    std::vector<double> input_scale{1.0, 1.0, 1.0, 1.0};
    int best_epoch = 0;
    double holdout_auc = 0.0;
    std::vector<std::string> warnings;

    // (texture, age in [0,1] over the training range, clips, pmd)
    std::vector<double> raw_inputs(const FusionInput& x) const;
    double predict(const FusionInput& x) const;

    nlohmann::json to_json() const;
    static FusionModel from_json(const nlohmann::json& j);
};

// BCE + Adam with an internal stratified hold-out for early stopping.
// Constant input columns are reported in `warnings`, not thrown.
FusionModel train_fusion(const std::vector<FusionInput>& inputs, const std::vector<int>& labels,
                         const FusionConfig& config = {});
// Column form; throws LengthMismatch unless all arrays align.
FusionModel train_fusion(const std::vector<double>& texture_scores, const std::vector<double>& ages,
                         const std::vector<bool>& clips, const std::vector<double>& pmds,
                         const std::vector<int>& labels, const FusionConfig& config = {});

}  // namespace texrisk::scoring
