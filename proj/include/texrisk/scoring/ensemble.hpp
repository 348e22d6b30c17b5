#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "texrisk/imaging/geometry.hpp"
#include "texrisk/imaging/standardization.hpp"
#include "texrisk/scoring/trainer.hpp"

namespace texrisk::scoring {

// A view on the network canvas: right views flipped, optionally augmented,
// resampled and padded. Pixels are not yet standardized.
struct CanvasView {
    std::string view_id;
    RealGrid pixels;
    MaskGrid mask;
};

// Mask: Otsu segmentation for raw views, non-zero pixels otherwise.
CanvasView to_canvas(const imaging::ViewImage& view, const imaging::Canvas& canvas,
                     const imaging::GeometricAugmentation& aug = {}, std::string view_id = {});

struct StandardizedView {
    std::string view_id;
    RealGrid pixels;
    MaskGrid mask;
};

StandardizedView standardize(const CanvasView& view, const imaging::StandardizationStats& stats);

// Anything that maps standardized views to probabilities in (0,1).
class ViewScorer {
public:
    virtual ~ViewScorer() = default;
    virtual std::vector<double> score(const std::vector<StandardizedView>& views) const = 0;
};

class MlpViewScorer : public ViewScorer {
public:
    explicit MlpViewScorer(TrainedInstance instance) : instance_(std::move(instance)) {}
    std::vector<double> score(const std::vector<StandardizedView>& views) const override;
    const TrainedInstance& instance() const { return instance_; }

private:
    TrainedInstance instance_;
};

// External scorer: the executable is run as `<exe> <views.jsonl>` and must
// print one score per input line. Each input line is
// {"view_id", "rows", "cols", "pixels": [...row-major], "mask": [...]}.
class PluginScorer : public ViewScorer {
public:
    explicit PluginScorer(std::filesystem::path executable, std::filesystem::path scratch_dir = {});
    std::vector<double> score(const std::vector<StandardizedView>& views) const override;

private:
    std::filesystem::path executable_;
    std::filesystem::path scratch_;
};

struct EnsembleScorer {
    std::vector<std::shared_ptr<const ViewScorer>> instances;
    imaging::StandardizationStats standardization;
    imaging::Canvas canvas = imaging::desk_canvas();
    ScorerConfig config;
};

struct RiskScore {
    std::map<std::string, double> view_scores;
    double study_score = 0.0;
    std::vector<std::string> warnings;  // fewer than 4 views, not 5 instances
};

// Per-view mean over instances, then the mean over views.
// instance_scores[i][v] is instance i's score for view v.
RiskScore aggregate_scores(const std::vector<std::string>& view_ids,
                           const std::vector<std::vector<double>>& instance_scores);

// Views are prepared without augmentation and standardized with the
// ensemble's statistics. Throws NoViews.
RiskScore score_study(const EnsembleScorer& ensemble, const std::vector<imaging::ViewImage>& study_views,
                      const std::vector<std::string>& view_ids = {});

nlohmann::json ensemble_to_json(const std::vector<TrainedInstance>& instances,
                                const imaging::StandardizationStats& stats, const imaging::Canvas& canvas);
EnsembleScorer ensemble_from_json(const nlohmann::json& j);

}  // namespace texrisk::scoring
