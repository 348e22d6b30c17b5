#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <string>

#include <unistd.h>

#include "doctest.h"
#include "support/stat_oracles.hpp"
#include "texrisk/cohort/records.hpp"
#include "texrisk/common/error.hpp"
#include "texrisk/imaging/io.hpp"
#include "texrisk/imaging/mask.hpp"
#include "texrisk/scoring/ensemble.hpp"
#include "texrisk/scoring/features.hpp"
#include "texrisk/synth/phantom.hpp"

using namespace texrisk;
using namespace texrisk::synth;
namespace fs = std::filesystem;

namespace {

std::size_t feature_index(const std::string& name) {
    const auto& names = scoring::feature_names();
    return static_cast<std::size_t>(std::find(names.begin(), names.end(), name) - names.begin());
}

double canvas_feature(const imaging::ViewImage& view, std::size_t index) {
    const auto c = scoring::to_canvas(view, imaging::desk_canvas());
    const auto s = scoring::standardize(c, {6000.0, 3000.0, 1});
    return scoring::extract_features(s.pixels, s.mask)[index];
}

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    return sxy / std::sqrt(sxx * syy);
}

struct TempDir {
    fs::path path;
    TempDir() : path(fs::temp_directory_path() / ("texrisk_synth_" + std::to_string(::getpid()))) {
        fs::remove_all(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("cohort of 50 women writes 200 views and 50 manifest lines") {
    TempDir tmp;
    PhantomConfig c;
    c.n_women = 50;
    c.seed = 3;
    const auto summary = generate_cohort(c, tmp.path, 2);
    std::ifstream in(summary.manifest);
    int lines = 0;
    for (std::string line; std::getline(in, line);) lines += !line.empty();
    CHECK(lines == 50);
    int pngs = 0;
    for (const auto& e : fs::directory_iterator(summary.view_root)) pngs += e.path().extension() == ".png";
    CHECK(pngs == 200);
    const auto records = cohort::read_manifest(summary.manifest);
    REQUIRE(records.size() == 50);
    imaging::ViewStore store(summary.view_root);
    const auto w = generate_woman(c, 17);
    CHECK(records[17] == w.record);
    for (int s = 0; s < 4; ++s) CHECK(store.load(records[17].view_ids[s]).pixels == w.views[s].pixels);
}

TEST_CASE("generation is deterministic per woman index") {
    PhantomConfig a;
    a.seed = 9;
    a.texture_signal_amplitude = 1.0;
    PhantomConfig b = a;
    b.n_women = 7;
    const auto x = generate_woman(a, 5);
    const auto y = generate_woman(b, 5);
    CHECK(x.record == y.record);
    for (int s = 0; s < 4; ++s) CHECK(x.views[s].pixels == y.views[s].pixels);
    b.seed = 10;
    CHECK_FALSE(generate_woman(b, 5).views[0].pixels == x.views[0].pixels);
}

TEST_CASE("generated views satisfy raw invariants") {
    PhantomConfig c;
    c.seed = 4;
    c.texture_signal_amplitude = 2.0;
    c.artifact_rate = 0.5;
    for (int i = 0; i < 12; ++i) {
        const auto w = generate_woman(c, i);
        CHECK_NOTHROW(cohort::validate_record(w.record));
        CHECK(w.record.pmd >= 0.0);
        CHECK(w.record.pmd <= 1.0);
        for (int s = 0; s < 4; ++s) {
            const auto& v = w.views[s];
            CHECK_NOTHROW(imaging::validate_view(v));
            CHECK(v.format.is_raw());
            CHECK(v.laterality == cohort::slot_laterality(s));
            const auto mask = imaging::compute_breast_mask(v);
            // tissue touches the chest wall: first column for left, last for right
            const int wall = s < 2 ? 0 : v.pixels.cols() - 1;
            const int far = s < 2 ? v.pixels.cols() - 1 : 0;
            CHECK(mask.mask(v.pixels.rows() / 2, wall) != 0);
            CHECK(mask.mask(v.pixels.rows() / 2, far) == 0);
            CHECK(v.pixels(0, far) == 0);
        }
    }
}

TEST_CASE("null signal gives chance AUC and calibrated event rates") {
    PhantomConfig c;
    c.n_women = 2000;
    c.seed = 21;
    c.texture_signal_amplitude = 0.0;
    const auto g = feature_index("grad_energy");
    std::vector<std::pair<double, int>> scored;
    int events = 0;
    for (int i = 0; i < c.n_women; ++i) {
        const auto w = generate_woman(c, i);
        const bool event = is_cancer(cohort::classify_outcome(w.record));
        events += event;
        scored.push_back({canvas_feature(w.views[0], g), event ? 1 : 0});
    }
    CHECK(std::abs(testing::brute_force_auc(scored) - 0.5) <= 0.05);
    CHECK(std::abs(events / 2000.0 - 0.20) <= 0.03);
}

TEST_CASE("texture signal grows with amplitude and persists across breasts") {
    const auto g = feature_index("grad_energy");
    std::vector<double> corr;
    for (double a : {0.25, 0.5, 1.0}) {
        PhantomConfig c;
        c.seed = 31;
        c.texture_signal_amplitude = a;
        c.event_rates = {{CancerGroup::SDC, 0.05}, {CancerGroup::IC, 0.15}, {CancerGroup::LTC, 0.20}};
        std::vector<double> feature, label, cancer_side, contra;
        for (int i = 0; i < 500; ++i) {
            const auto w = generate_woman(c, i);
            const double lcc = canvas_feature(w.views[0], g);
            const double rcc = canvas_feature(w.views[2], g);
            const bool event = is_cancer(cohort::classify_outcome(w.record));
            feature.push_back(lcc);
            label.push_back(event ? 1.0 : 0.0);
            if (event && a == 1.0) {
                const bool left = w.record.cancer_laterality == imaging::Laterality::Left;
                cancer_side.push_back(left ? lcc : rcc);
                contra.push_back(left ? rcc : lcc);
            }
        }
        corr.push_back(pearson(feature, label));
        if (a == 1.0) {
            REQUIRE(cancer_side.size() > 50);
            CHECK(pearson(cancer_side, contra) > 0.5);
        }
    }
    MESSAGE("point-biserial r: " << corr[0] << " " << corr[1] << " " << corr[2]);
    CHECK(corr[0] > 0.0);
    CHECK(corr[0] < corr[1]);
    CHECK(corr[1] < corr[2]);
}

TEST_CASE("label noise flips the texture latent against the outcome") {
    PhantomConfig c;
    c.seed = 5;
    c.label_noise = 1.0;
    c.event_rates = {{CancerGroup::IC, 0.3}};
    for (int i = 0; i < 20; ++i) {
        const auto w = generate_woman(c, i);
        const bool event = is_cancer(cohort::classify_outcome(w.record));
        CHECK((event ? w.texture_latent <= -1.5 : w.texture_latent >= 1.5));
    }
}

TEST_CASE("phantom config validation and JSON round trip") {
    PhantomConfig c;
    c.texture_signal_amplitude = 1.25;
    c.event_rates = {{CancerGroup::IC, 0.1}};
    c.id_prefix = "x";
    c.seed = 77;
    const auto back = phantom_config_from_json(to_json(c));
    CHECK(to_json(back) == to_json(c));
    auto expect_invalid = [](PhantomConfig bad) {
        try {
            validate_config(bad);
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::InvalidConfig);
            return;
        }
        FAIL("expected InvalidConfig");
    };
    PhantomConfig bad;
    bad.n_women = 0;
    expect_invalid(bad);
    bad = {};
    bad.event_rates = {{CancerGroup::IC, 0.7}, {CancerGroup::LTC, 0.5}};
    expect_invalid(bad);
    bad = {};
    bad.label_noise = 1.5;
    expect_invalid(bad);
    bad = {};
    bad.texture_signal_amplitude = -1.0;
    expect_invalid(bad);
    CHECK_THROWS_AS(phantom_config_from_json({{"age_range", {50}}}), Error);
}
