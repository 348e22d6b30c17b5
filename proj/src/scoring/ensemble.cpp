#include "texrisk/scoring/ensemble.hpp"

#include <atomic>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <unistd.h>

#include "texrisk/common/error.hpp"
#include "texrisk/imaging/mask.hpp"

namespace texrisk::scoring {

using nlohmann::json;
using imaging::Laterality;

CanvasView to_canvas(const imaging::ViewImage& view, const imaging::Canvas& canvas,
                     const imaging::GeometricAugmentation& aug, std::string view_id) {
    imaging::validate_augmentation(aug);
    RealGrid pixels = imaging::to_real(view.pixels);
    MaskGrid mask = view.format.is_raw() ? imaging::compute_breast_mask(view).mask
                                         : imaging::mask_from_nonzero(view.pixels).mask;
    Laterality chest_wall = view.laterality;
    if (aug.flip_right_views && view.laterality == Laterality::Right) {
        pixels = imaging::flip_horizontal(pixels);
        mask = imaging::flip_horizontal(mask);
        chest_wall = Laterality::Left;
    }
    if (!aug.is_identity()) {
        pixels = imaging::warp_affine(pixels, aug);
        mask = imaging::warp_affine(mask, aug);
    }
    // raw background noise is not tissue
    for (std::size_t i = 0; i < pixels.size(); ++i) {
        if (!mask.storage()[i]) pixels.storage()[i] = 0.0;
    }
    const auto plan = imaging::plan_resample(pixels.rows(), pixels.cols(), view.pixel_spacing_mm, chest_wall, canvas);
    CanvasView out;
    out.view_id = std::move(view_id);
    out.pixels = imaging::resample_and_pad(pixels, plan, canvas);
    out.mask = imaging::resample_and_pad(mask, plan, canvas);
    return out;
}

StandardizedView standardize(const CanvasView& view, const imaging::StandardizationStats& stats) {
    return {view.view_id, imaging::standardize(view.pixels, stats), view.mask};
}

std::vector<double> MlpViewScorer::score(const std::vector<StandardizedView>& views) const {
    std::vector<double> out;
    out.reserve(views.size());
    for (const auto& v : views) out.push_back(instance_.predict(extract_features(v.pixels, v.mask)));
    return out;
}

PluginScorer::PluginScorer(std::filesystem::path executable, std::filesystem::path scratch_dir)
    : executable_(std::move(executable)), scratch_(std::move(scratch_dir)) {
    if (scratch_.empty()) scratch_ = std::filesystem::temp_directory_path();
    std::filesystem::create_directories(scratch_);
    if (!std::filesystem::exists(executable_)) {
        throw Error(ErrorCode::InvalidConfig, "scorer plug-in not found: " + executable_.string());
    }
}

namespace {

std::string shell_quote(const std::string& s) {
    std::string out = "'";
    for (char c : s) {
        if (c == '\'') {
            out += "'\\''";
        } else {
            out += c;
        }
    }
    return out + "'";
}

}  // namespace

std::vector<double> PluginScorer::score(const std::vector<StandardizedView>& views) const {
    static std::atomic<int> counter{0};
    const auto stem = "texrisk_plugin_" + std::to_string(::getpid()) + "_" + std::to_string(counter++);
    const auto input = scratch_ / (stem + ".jsonl");
    const auto output = scratch_ / (stem + ".out");
    {
        std::ofstream out(input);
        if (!out) throw Error(ErrorCode::Io, "cannot write " + input.string());
        for (const auto& v : views) {
            json line = {{"view_id", v.view_id},
                         {"rows", v.pixels.rows()},
                         {"cols", v.pixels.cols()},
                         {"pixels", std::vector<double>(v.pixels.values().begin(), v.pixels.values().end())},
                         {"mask", std::vector<int>(v.mask.values().begin(), v.mask.values().end())}};
            out << line.dump() << '\n';
        }
    }
    const std::string cmd =
        shell_quote(executable_.string()) + " " + shell_quote(input.string()) + " > " + shell_quote(output.string());
    const int status = std::system(cmd.c_str());
    std::vector<double> scores;
    std::ifstream in(output);
    std::string line;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            scores.push_back(std::stod(line));
        } catch (const std::exception&) {
            throw Error(ErrorCode::Io, "plug-in printed a non-numeric line: " + line);
        }
    }
    std::filesystem::remove(input);
    std::filesystem::remove(output);
    if (status != 0) throw Error(ErrorCode::Io, "scorer plug-in exited with status " + std::to_string(status));
    if (scores.size() != views.size()) {
        throw Error(ErrorCode::LengthMismatch, "plug-in returned " + std::to_string(scores.size()) + " scores for " +
                                                   std::to_string(views.size()) + " views");
    }
    for (double s : scores) {
        if (!(s >= 0.0 && s <= 1.0)) throw Error(ErrorCode::ParameterOutOfRange, "plug-in score outside [0,1]");
    }
    return scores;
}

RiskScore aggregate_scores(const std::vector<std::string>& view_ids,
                           const std::vector<std::vector<double>>& instance_scores) {
    if (view_ids.empty()) throw Error(ErrorCode::NoViews, "study without views");
    if (instance_scores.empty()) throw Error(ErrorCode::InvalidConfig, "ensemble without instances");
    RiskScore out;
    double total = 0.0;
    for (std::size_t v = 0; v < view_ids.size(); ++v) {
        // running mean: identical instances reproduce the single score exactly
        double view_score = 0.0;
        for (std::size_t i = 0; i < instance_scores.size(); ++i) {
            if (instance_scores[i].size() != view_ids.size()) {
                throw Error(ErrorCode::LengthMismatch, "instance score count");
            }
            view_score += (instance_scores[i][v] - view_score) / static_cast<double>(i + 1);
        }
        out.view_scores[view_ids[v]] = view_score;
        total += view_score;
    }
    out.study_score = total / static_cast<double>(view_ids.size());
    return out;
}

RiskScore score_study(const EnsembleScorer& ensemble, const std::vector<imaging::ViewImage>& study_views,
                      const std::vector<std::string>& view_ids) {
    if (study_views.empty()) throw Error(ErrorCode::NoViews, "study without views");
    std::vector<std::string> ids = view_ids;
    if (ids.empty()) {
        for (std::size_t i = 0; i < study_views.size(); ++i) ids.push_back("view" + std::to_string(i));
    }
    if (ids.size() != study_views.size()) throw Error(ErrorCode::LengthMismatch, "view ids vs views");
    std::vector<StandardizedView> prepared;
    for (std::size_t i = 0; i < study_views.size(); ++i) {
        prepared.push_back(standardize(to_canvas(study_views[i], ensemble.canvas, {}, ids[i]), ensemble.standardization));
    }
    std::vector<std::vector<double>> per_instance;
    for (const auto& inst : ensemble.instances) per_instance.push_back(inst->score(prepared));
    auto out = aggregate_scores(ids, per_instance);
    if (study_views.size() != 4) {
        out.warnings.push_back("study scored from " + std::to_string(study_views.size()) + " views");
    }
    if (ensemble.instances.size() != 5) {
        out.warnings.push_back("ensemble has " + std::to_string(ensemble.instances.size()) + " instances");
    }
    return out;
}

json ensemble_to_json(const std::vector<TrainedInstance>& instances, const imaging::StandardizationStats& stats,
                      const imaging::Canvas& canvas) {
    json arr = json::array();
    for (const auto& i : instances) arr.push_back(to_json(i));
    return {{"kind", "texrisk.ensemble/1"},
            {"standardization", {{"mean", stats.mean}, {"std", stats.std}, {"sample_size", stats.sample_size}}},
            {"canvas", {{"spacing_mm", canvas.spacing_mm}, {"rows", canvas.rows}, {"cols", canvas.cols}}},
            {"instances", arr}};
}

EnsembleScorer ensemble_from_json(const json& j) {
    EnsembleScorer e;
    try {
        e.standardization.mean = j.at("standardization").at("mean").get<double>();
        e.standardization.std = j.at("standardization").at("std").get<double>();
        e.standardization.sample_size = j.at("standardization").value("sample_size", 0);
        e.canvas.spacing_mm = j.at("canvas").at("spacing_mm").get<double>();
        e.canvas.rows = j.at("canvas").at("rows").get<int>();
        e.canvas.cols = j.at("canvas").at("cols").get<int>();
        for (const auto& inst : j.at("instances")) {
            auto trained = instance_from_json(inst);
            e.config = trained.config;
            e.instances.push_back(std::make_shared<MlpViewScorer>(std::move(trained)));
        }
    } catch (const json::exception& ex) {
        throw Error(ErrorCode::InvalidConfig, std::string("ensemble json: ") + ex.what());
    }
    if (e.instances.empty()) throw Error(ErrorCode::InvalidConfig, "ensemble json: no instances");
    return e;
}

}  // namespace texrisk::scoring
