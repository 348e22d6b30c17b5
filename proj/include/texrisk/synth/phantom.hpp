#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "texrisk/cohort/records.hpp"
#include "texrisk/imaging/view.hpp"

namespace texrisk::synth {

struct PhantomConfig {
    int n_women = 100;
    std::map<CancerGroup, double> event_rates{
        {CancerGroup::SDC, 0.03}, {CancerGroup::IC, 0.05}, {CancerGroup::LTC, 0.12}};
    std::pair<int, int> age_range{50, 69};
    // half-ellipse semi-axes in mm: along the chest wall, and away from it
    std::pair<double, double> semi_height_mm{95.0, 120.0};
    std::pair<double, double> semi_depth_mm{70.0, 95.0};
    double pixel_spacing_mm = 1.275;
    double base_intensity = 12000.0;
    double noise_std = 40.0;  // at base intensity; scales with sqrt(intensity)
    std::pair<double, double> density_level_range{0.1, 0.6};
    // exp(amplitude * latent) scales the dense-spot pattern energy
    double texture_signal_amplitude = 0.0;
    double lesion_contrast = 0.15;

    // event logit = c + risk_slope * latent + clips_log_odds * clips
    //               + pmd_log_odds * (density - mid) / half_width
    double risk_slope = 1.5;
    double clips_rate = 0.15;
    double clips_log_odds = 0.0;
    double pmd_log_odds = 0.0;
    // per-woman spread of the spot energy that is unrelated to risk
    double texture_nuisance = 0.5;
    // probability that a woman's texture follows the opposite outcome
    double label_noise = 0.0;
    double artifact_rate = 0.0;
    std::string id_prefix = "w";
    std::uint64_t seed = 0;
};

void validate_config(const PhantomConfig& config);
nlohmann::json to_json(const PhantomConfig& config);
PhantomConfig phantom_config_from_json(const nlohmann::json& j, PhantomConfig base = {});

struct WomanPhantom {
    cohort::WomanRecord record;
    std::array<imaging::ViewImage, 4> views;  // LCC, LMLO, RCC, RMLO
    double latent_risk = 0.0;
    double texture_latent = 0.0;  // differs from latent_risk for label-noise women
};

// Women are independent: index i depends only on (config, i).
cohort::WomanRecord generate_record(const PhantomConfig& config, int index);
WomanPhantom generate_woman(const PhantomConfig& config, int index);

std::string woman_id(const PhantomConfig& config, int index);

struct CohortSummary {
    std::vector<cohort::WomanRecord> records;
    std::filesystem::path manifest;
    std::filesystem::path view_root;
};

// Writes <out>/views (PNG + sidecar per view) and <out>/manifest.jsonl.
CohortSummary generate_cohort(const PhantomConfig& config, const std::filesystem::path& out_dir, int workers = 1);

}  // namespace texrisk::synth
