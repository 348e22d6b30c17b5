#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "doctest.h"
#include "support/nn_oracles.hpp"
#include "support/phantoms.hpp"
#include "support/stat_oracles.hpp"
#include "texrisk/common/error.hpp"
#include "texrisk/scoring/ensemble.hpp"
#include "texrisk/scoring/features.hpp"
#include "texrisk/scoring/fusion.hpp"
#include "texrisk/scoring/mlp.hpp"
#include "texrisk/scoring/trainer.hpp"

using namespace texrisk;
using namespace texrisk::scoring;

namespace {

ErrorCode code_of(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected texrisk::Error");
    return ErrorCode::Io;
}

std::size_t feature_index(const std::string& name) {
    const auto& names = feature_names();
    return static_cast<std::size_t>(std::find(names.begin(), names.end(), name) - names.begin());
}

// Features: dimension 0 shifted by +/- shift according to the label. A
// negative shift gives a strict margin instead: |f0| >= -shift, sign = label.
FeatureVector synthetic_features(Rng& rng, int label, double shift) {
    FeatureVector f(kFeatureCount);
    for (auto& v : f) v = normal(rng);
    if (shift < 0.0) {
        f[0] = (label ? 1.0 : -1.0) * (-shift + std::abs(f[0]));
    } else {
        f[0] += label ? shift : -shift;
    }
    return f;
}

FoldData synthetic_fold(std::uint64_t seed, int n_train, int n_val, double shift, bool shuffle_labels = false,
                        int formats = 1) {
    Rng rng(seed);
    FoldData fold;
    for (int i = 0; i < n_train; ++i) {
        BankEntry e;
        e.woman_id = "t" + std::to_string(i);
        e.view_id = e.woman_id + "_v";
        const int truth = i % 2;
        e.label = shuffle_labels ? static_cast<int>(rng() % 2) : truth;
        e.variants.assign(formats, {});
        for (int f = 0; f < formats; ++f) e.variants[f].push_back(synthetic_features(rng, truth, shift));
        fold.training.push_back(std::move(e));
    }
    for (int i = 0; i < n_val; ++i) {
        ValidationStudy s;
        s.woman_id = "v" + std::to_string(i);
        const int truth = i % 2;
        const int label = shuffle_labels ? static_cast<int>(rng() % 2) : truth;
        s.group = label ? (i % 4 == 1 ? CancerGroup::IC : CancerGroup::LTC) : CancerGroup::Healthy;
        for (int v = 0; v < 4; ++v) s.views.push_back(synthetic_features(rng, truth, shift));
        fold.validation.push_back(std::move(s));
    }
    return fold;
}

ScorerConfig small_config(std::uint64_t seed) {
    ScorerConfig c;
    c.hidden_width = 16;
    c.learning_rate = 1e-3;
    c.max_epochs = 50;
    c.seed = seed;
    return c;
}

class ConstantScorer : public ViewScorer {
public:
    explicit ConstantScorer(std::vector<double> per_view) : per_view_(std::move(per_view)) {}
    std::vector<double> score(const std::vector<StandardizedView>& views) const override {
        std::vector<double> out;
        for (std::size_t i = 0; i < views.size(); ++i) out.push_back(per_view_[i % per_view_.size()]);
        return out;
    }

private:
    std::vector<double> per_view_;
};

EnsembleScorer stub_ensemble(const std::vector<std::vector<double>>& outputs) {
    EnsembleScorer e;
    for (const auto& o : outputs) e.instances.push_back(std::make_shared<ConstantScorer>(o));
    e.standardization = {1000.0, 500.0, 1};
    e.canvas = {1.0, 80, 60};
    return e;
}

}  // namespace

TEST_CASE("features: constant region has zero spread and zero gradient energy") {
    RealGrid img(16, 16, 3.0);
    MaskGrid mask(16, 16, 1);
    const auto f = extract_features(img, mask);
    REQUIRE(f.size() == kFeatureCount);
    CHECK(f[feature_index("std")] == 0.0);
    CHECK(f[feature_index("grad_energy")] == 0.0);
    for (double v : f) CHECK(std::isfinite(v));
}

TEST_CASE("features: checkerboard has more gradient energy than a constant of equal mean") {
    RealGrid checker(8, 8), flat(8, 8, 0.5);
    for (int r = 0; r < 8; ++r) {
        for (int c = 0; c < 8; ++c) checker(r, c) = (r + c) % 2;
    }
    MaskGrid mask(8, 8, 1);
    const auto a = extract_features(checker, mask);
    const auto b = extract_features(flat, mask);
    CHECK(a[feature_index("mean")] == doctest::Approx(b[feature_index("mean")]));
    CHECK(a[feature_index("grad_energy")] > b[feature_index("grad_energy")]);
}

TEST_CASE("features: deterministic, masked-only, empty mask rejected") {
    const auto view = testing::textured_view(60, 50, 5);
    const auto img = imaging::to_real(view.pixels);
    MaskGrid mask(60, 50, 0);
    for (int r = 0; r < 60; ++r) {
        for (int c = 0; c < 50; ++c) mask(r, c) = view.pixels(r, c) > 0;
    }
    CHECK(extract_features(img, mask) == extract_features(img, mask));
    CHECK(code_of([&] { extract_features(img, MaskGrid(60, 50, 0)); }) == ErrorCode::EmptyMask);
    // values outside the mask only move the padding-aware global stats
    auto noisy = img;
    for (int r = 0; r < 60; ++r) {
        for (int c = 0; c < 50; ++c) {
            if (!mask(r, c)) noisy(r, c) = 7.0;
        }
    }
    const auto a = extract_features(img, mask);
    const auto b = extract_features(noisy, mask);
    for (const char* name : {"mean", "std", "skewness", "p50", "dense_fraction", "entropy"}) {
        CHECK(a[feature_index(name)] == doctest::Approx(b[feature_index(name)]));
    }
}

TEST_CASE("bce examples") {
    CHECK(bce_loss({0.5, 0.5, 0.5}, {1, 0, 1}) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    CHECK(bce_loss({0.9, 0.2}, {1, 0}) == doctest::Approx(-(std::log(0.9) + std::log(0.8)) / 2.0).epsilon(1e-12));
    CHECK(bce_loss({0.9, 0.2}, {1, 0}) == doctest::Approx(0.1643).epsilon(1e-3));
    CHECK(bce_loss({1.0, 0.0, 1.0}, {1, 0, 1}) <= -std::log(1.0 - kBceEpsilon) + 1e-15);
    CHECK(code_of([] { bce_loss({0.5}, {1, 0}); }) == ErrorCode::LengthMismatch);
}

TEST_CASE("mlp gradient matches central differences") {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const auto r = testing::gradient_check({5, 7, 4, 1}, seed);
        CHECK(r.max_relative_error < 1e-5);
    }
}

TEST_CASE("fusion-shaped gradient matches central differences") {
    FusionConfig c;
    for (std::uint64_t seed = 11; seed <= 20; ++seed) {
        const auto r = testing::gradient_check({4, c.hidden1, c.hidden2, 1}, seed);
        CHECK(r.max_relative_error < 1e-5);
    }
}

TEST_CASE("dropout gradient is exact for a fixed mask") {
    Mlp net({6, 8, 5, 1}, 3);
    Rng data(4);
    std::vector<std::vector<double>> batch(4, std::vector<double>(6));
    for (auto& x : batch) {
        for (auto& v : x) v = normal(data);
    }
    std::vector<double> labels{1, 0, 1, 0};
    const Rng start(99);
    auto eval = [&](const std::vector<double>& p, std::vector<double>* g) {
        Mlp m = net;
        m.set_parameters(p);
        Rng rng = start;
        std::vector<double> tmp;
        return m.loss_and_gradient(batch, labels, g ? *g : tmp, {{0.5, 0.25}, &rng});
    };
    // non-zero biases keep fully dropped layers off the ReLU kink
    auto params = net.parameters();
    for (auto& p : params) p += normal(data, 0.0, 0.1);
    std::vector<double> grad;
    eval(params, &grad);
    double worst = 0.0;
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto plus = params, minus = params;
        plus[i] += 1e-5;
        minus[i] -= 1e-5;
        const double fd = (eval(plus, nullptr) - eval(minus, nullptr)) / 2e-5;
        worst = std::max(worst, std::abs(fd - grad[i]) / std::max({std::abs(fd), std::abs(grad[i]), 1e-6}));
    }
    CHECK(worst < 1e-4);
}

TEST_CASE("mlp json round trip and output range") {
    Mlp net({3, 4, 2, 1}, 8);
    const auto back = Mlp::from_json(net.to_json());
    for (double x : {-50.0, 0.0, 50.0}) {
        const std::vector<double> in{x, -x, 1.0};
        CHECK(back.predict(in) == net.predict(in));
        CHECK(net.predict(in) >= 0.0);
        CHECK(net.predict(in) <= 1.0);
    }
}

TEST_CASE("flavor draws are uniform over formats") {
    std::vector<BankEntry> bank(2000);
    for (auto& e : bank) e.variants.assign(6, std::vector<FeatureVector>(3, FeatureVector(1)));
    Rng rng(17);
    const auto epoch = draw_epoch(bank, 1.0, rng);
    REQUIRE(epoch.size() >= 10000);
    std::vector<int> count(6, 0);
    for (const auto& s : epoch) ++count[s.format];
    for (int c : count) CHECK(std::abs(static_cast<double>(c) / epoch.size() - 1.0 / 6.0) <= 0.02);
    // default fraction visits 1/6 of the (view, format) pairs
    Rng rng2(18);
    CHECK(draw_epoch(bank, 0.0, rng2).size() == 2000);
}

TEST_CASE("separable features reach training AUC >= 0.99 within 50 epochs") {
    const auto fold = synthetic_fold(21, 400, 100, -0.5);
    auto config = small_config(5);
    config.early_stopping = false;  // final parameters
    const auto t = train_fold_scorer(fold, config);
    CHECK(t.epochs.size() <= 50);
    std::vector<std::pair<double, int>> train_scores;
    for (const auto& e : fold.training) train_scores.push_back({t.predict(e.variants[0][0]), e.label});
    CHECK(testing::brute_force_auc(train_scores) >= 0.99);
}

TEST_CASE("shuffled labels give chance-level validation AUC") {
    const auto fold = synthetic_fold(22, 400, 200, 3.0, true);
    auto config = small_config(6);
    config.max_epochs = 20;
    const auto t = train_fold_scorer(fold, config);
    CHECK(t.best_auc == doctest::Approx(0.5).epsilon(0.2));
    CHECK(std::abs(t.best_auc - 0.5) <= 0.1);
}

TEST_CASE("training is deterministic and the snapshot reproduces the trace maximum") {
    const auto fold = synthetic_fold(23, 200, 60, 0.6, false, 3);
    auto config = small_config(7);
    config.max_epochs = 15;
    const auto a = train_fold_scorer(fold, config);
    const auto b = train_fold_scorer(fold, config);
    CHECK(a.auc_all == b.auc_all);
    CHECK(a.model.parameters() == b.model.parameters());

    const double max_auc = *std::max_element(a.auc_all.begin(), a.auc_all.end());
    CHECK(a.best_auc == max_auc);
    CHECK(a.auc_all[a.best_epoch - 1] == max_auc);
    std::vector<std::pair<double, int>> val;
    for (const auto& s : fold.validation) val.push_back({a.study_score(s.views), is_cancer(s.group) ? 1 : 0});
    CHECK(testing::brute_force_auc(val) == doctest::Approx(max_auc).epsilon(1e-12));

    const auto back = instance_from_json(to_json(a));
    CHECK(back.predict(fold.validation[0].views[0]) == a.predict(fold.validation[0].views[0]));
    CHECK(back.best_epoch == a.best_epoch);
}

TEST_CASE("without early stopping the last epoch is kept") {
    const auto fold = synthetic_fold(24, 100, 40, 0.5);
    auto config = small_config(8);
    config.max_epochs = 6;
    config.early_stopping = false;
    const auto t = train_fold_scorer(fold, config);
    CHECK(t.best_epoch == 6);
    CHECK(t.best_auc == t.auc_all.back());
}

TEST_CASE("trainer errors") {
    auto fold = synthetic_fold(25, 20, 10, 1.0);
    for (auto& s : fold.validation) s.group = CancerGroup::Healthy;
    CHECK(code_of([&] { train_fold_scorer(fold, small_config(1)); }) == ErrorCode::NoValidationPositives);
    auto bad = small_config(1);
    bad.batch_size = 0;
    CHECK(code_of([&] { validate_config(bad); }) == ErrorCode::InvalidConfig);
}

TEST_CASE("aggregation: hand example, permutations, constants") {
    const auto r = aggregate_scores({"a", "b"}, {{0.2, 0.6}, {0.4, 0.8}});
    CHECK(r.view_scores.at("a") == doctest::Approx(0.3));
    CHECK(r.view_scores.at("b") == doctest::Approx(0.7));
    CHECK(r.study_score == doctest::Approx(0.5));
    const auto swapped = aggregate_scores({"b", "a"}, {{0.8, 0.4}, {0.6, 0.2}});
    CHECK(swapped.study_score == doctest::Approx(r.study_score));
    CHECK(swapped.view_scores == r.view_scores);
    CHECK(code_of([] { aggregate_scores({}, {{}}); }) == ErrorCode::NoViews);
}

TEST_CASE("score_study averages instances then views") {
    std::vector<imaging::ViewImage> views;
    for (int i = 0; i < 4; ++i) {
        auto v = testing::textured_view(60, 40, 30 + i, 1.0);
        v.laterality = i < 2 ? imaging::Laterality::Left : imaging::Laterality::Right;
        if (i >= 2) v = imaging::flip_horizontal(v);
        views.push_back(v);
    }
    const auto constant = score_study(stub_ensemble({{0.37}, {0.37}, {0.37}, {0.37}, {0.37}}), views);
    CHECK(constant.study_score == doctest::Approx(0.37).epsilon(1e-15));
    CHECK(constant.warnings.empty());

    const std::vector<std::vector<double>> outs{{0.1, 0.2, 0.3, 0.4}, {0.5, 0.5, 0.9, 0.1}, {0.3, 0.7, 0.2, 0.6}};
    const auto a = score_study(stub_ensemble(outs), views, {"LCC", "LMLO", "RCC", "RMLO"});
    const auto b = score_study(stub_ensemble({outs[2], outs[0], outs[1]}), views, {"LCC", "LMLO", "RCC", "RMLO"});
    CHECK(a.study_score == doctest::Approx(b.study_score).epsilon(1e-15));
    CHECK(a.view_scores.at("RCC") == doctest::Approx((0.3 + 0.9 + 0.2) / 3.0));
    double mean = 0.0;
    for (const auto& [id, s] : a.view_scores) mean += s / 4.0;
    CHECK(a.study_score == doctest::Approx(mean));

    const auto single = score_study(stub_ensemble({outs[0]}), views);
    const auto tripled = score_study(stub_ensemble({outs[0], outs[0], outs[0]}), views);
    CHECK(single.study_score == tripled.study_score);

    const auto partial = score_study(stub_ensemble({{0.2}, {0.2}, {0.2}, {0.2}, {0.2}}), {views[0], views[1]});
    CHECK(partial.study_score == doctest::Approx(0.2));
    CHECK(partial.warnings.size() == 1);
    CHECK(code_of([] { score_study(stub_ensemble({{0.5}}), {}); }) == ErrorCode::NoViews);
}

TEST_CASE("right views are mirrored onto the left-view canvas") {
    auto left = testing::textured_view(80, 50, 41, 1.0);
    auto right = imaging::flip_horizontal(left);
    right.laterality = imaging::Laterality::Right;
    const imaging::Canvas canvas{1.5, 64, 48};
    const auto a = to_canvas(left, canvas);
    const auto b = to_canvas(right, canvas);
    CHECK(a.pixels == b.pixels);
    CHECK(a.mask == b.mask);
    // chest wall flush with column 0
    int touching = 0;
    for (int r = 0; r < canvas.rows; ++r) touching += a.mask(r, 0);
    CHECK(touching > 0);
}

TEST_CASE("mlp view scorer matches the instance on prepared views") {
    const auto fold = synthetic_fold(26, 60, 20, 1.0);
    auto config = small_config(9);
    config.max_epochs = 2;
    const auto inst = train_fold_scorer(fold, config);
    MlpViewScorer scorer(inst);
    const auto view = testing::textured_view(60, 40, 50, 1.0);
    const imaging::StandardizationStats stats{2000.0, 800.0, 1};
    const auto prepared = standardize(to_canvas(view, {1.0, 70, 50}, {}, "x"), stats);
    const auto scores = scorer.score({prepared});
    CHECK(scores.at(0) == inst.predict(extract_features(prepared.pixels, prepared.mask)));

    const auto saved = ensemble_to_json({inst, inst}, stats, {1.0, 70, 50});
    const auto loaded = ensemble_from_json(saved);
    CHECK(loaded.instances.size() == 2);
    CHECK(score_study(loaded, {view}).study_score == doctest::Approx(scores[0]).epsilon(1e-15));
}

TEST_CASE("plug-in scorer contract") {
    const auto dir = std::filesystem::temp_directory_path() / "texrisk_plugin_test";
    std::filesystem::create_directories(dir);
    const auto good = dir / "good.sh";
    const auto bad = dir / "bad.sh";
    {
        std::ofstream(good) << "#!/bin/sh\nwhile IFS= read -r line; do echo 0.25; done < \"$1\"\n";
        std::ofstream(bad) << "#!/bin/sh\necho 0.5\n";
    }
    std::filesystem::permissions(good, std::filesystem::perms::owner_all);
    std::filesystem::permissions(bad, std::filesystem::perms::owner_all);
    StandardizedView v{"v1", RealGrid(4, 4, 0.5), MaskGrid(4, 4, 1)};
    CHECK(PluginScorer(good, dir).score({v, v, v}) == std::vector<double>{0.25, 0.25, 0.25});
    CHECK(code_of([&] { PluginScorer(bad, dir).score({v, v}); }) == ErrorCode::LengthMismatch);
    CHECK(code_of([&] { PluginScorer(dir / "missing.sh"); }) == ErrorCode::InvalidConfig);
    std::filesystem::remove_all(dir);
}

namespace {

struct FusionCohort {
    std::vector<FusionInput> x;
    std::vector<int> y;
};

FusionCohort fusion_cohort(std::uint64_t seed, int n, int mode) {
    Rng rng(seed);
    FusionCohort c;
    for (int i = 0; i < n; ++i) {
        FusionInput in{uniform01(rng), uniform(rng, 50, 70), uniform01(rng) < 0.3, uniform01(rng)};
        int y = 0;
        if (mode == 0) y = in.texture_score > 0.6;
        if (mode == 1) y = in.clips;
        c.x.push_back(in);
        c.y.push_back(y);
    }
    return c;
}

double fusion_auc(const FusionModel& m, const FusionCohort& c) {
    std::vector<std::pair<double, int>> s;
    for (std::size_t i = 0; i < c.x.size(); ++i) s.push_back({m.predict(c.x[i]), c.y[i]});
    return testing::brute_force_auc(s);
}

}  // namespace

TEST_CASE("fusion: texture-determined labels keep the texture AUC") {
    const auto train = fusion_cohort(61, 800, 0);
    const auto test = fusion_cohort(62, 400, 0);
    FusionConfig config;
    config.seed = 3;
    const auto m = train_fusion(train.x, train.y, config);
    std::vector<std::pair<double, int>> tex;
    for (std::size_t i = 0; i < test.x.size(); ++i) tex.push_back({test.x[i].texture_score, test.y[i]});
    CHECK(fusion_auc(m, test) >= testing::brute_force_auc(tex) - 0.01);
}

TEST_CASE("fusion: clips-determined labels") {
    const auto train = fusion_cohort(63, 600, 1);
    const auto test = fusion_cohort(64, 300, 1);
    const auto m = train_fusion(train.x, train.y);
    CHECK(fusion_auc(m, test) >= 0.99);
    CHECK(m.warnings.empty());
}

TEST_CASE("fusion: determinism, constant columns, json, errors") {
    auto c = fusion_cohort(65, 200, 0);
    for (auto& x : c.x) x.pmd = 0.4;
    const auto a = train_fusion(c.x, c.y);
    const auto b = train_fusion(c.x, c.y);
    CHECK(a.net.parameters() == b.net.parameters());
    REQUIRE(a.warnings.size() == 1);
    CHECK(a.warnings[0].find("pmd") != std::string::npos);
    const auto back = FusionModel::from_json(a.to_json());
    CHECK(back.predict(c.x[3]) == a.predict(c.x[3]));
    CHECK(a.raw_inputs({0.1, a.age_min, true, 0.2})[1] == 0.0);
    CHECK(a.raw_inputs({0.1, a.age_max, true, 0.2})[1] == 1.0);

    CHECK(code_of([&] { train_fusion({0.1, 0.2}, {50, 60}, {true}, {0.1, 0.2}, {0, 1}); }) == ErrorCode::LengthMismatch);
    std::vector<int> ones(c.y.size(), 1);
    CHECK(code_of([&] { train_fusion(c.x, ones); }) == ErrorCode::DegenerateClasses);
}
