#include "texrisk/synth/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numbers>
#include <tuple>

#include "texrisk/common/error.hpp"
#include "texrisk/common/parallel.hpp"
#include "texrisk/common/random.hpp"
#include "texrisk/imaging/filters.hpp"
#include "texrisk/imaging/io.hpp"

namespace texrisk::synth {

using nlohmann::json;
using imaging::Laterality;
using imaging::ViewImage;

namespace {

constexpr double kSpotScale = 0.262;  // sd of max(0, Z - 1), Z ~ N(0,1)
constexpr double kTextureBase = 0.08;
constexpr double kSpotBase = 0.05;
constexpr double kMaxAttenuation = 1.2;  // keeps tissue well above the zero background
constexpr double kEdgeScaleMm = 8.0;

double total_rate(const PhantomConfig& c) {
    double sum = 0.0;
    for (const auto& [g, r] : c.event_rates) sum += r;
    return sum;
}

double density_term(const PhantomConfig& c, double level) {
    const double mid = 0.5 * (c.density_level_range.first + c.density_level_range.second);
    const double half = 0.5 * (c.density_level_range.second - c.density_level_range.first);
    return half > 0.0 ? (level - mid) / half : 0.0;
}

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Intercept so that the expected event probability equals the total rate.
double solve_intercept(const PhantomConfig& c) {
    const double target = total_rate(c);
    if (target <= 0.0) return -std::numeric_limits<double>::infinity();
    constexpr int kZ = 241;
    constexpr int kD = 21;
    std::vector<double> z(kZ), wz(kZ);
    double wsum = 0.0;
    for (int i = 0; i < kZ; ++i) {
        z[i] = -6.0 + 12.0 * i / (kZ - 1);
        wz[i] = std::exp(-0.5 * z[i] * z[i]);
        wsum += wz[i];
    }
    for (auto& w : wz) w /= wsum;
    auto mean_p = [&](double b0) {
        double m = 0.0;
        for (int clips = 0; clips < 2; ++clips) {
            const double pc = clips ? c.clips_rate : 1.0 - c.clips_rate;
            if (pc == 0.0) continue;
            for (int d = 0; d < kD; ++d) {
                const double level = c.density_level_range.first +
                                     (c.density_level_range.second - c.density_level_range.first) * (d + 0.5) / kD;
                const double shift = b0 + c.clips_log_odds * clips + c.pmd_log_odds * density_term(c, level);
                for (int i = 0; i < kZ; ++i) m += pc / kD * wz[i] * logistic(shift + c.risk_slope * z[i]);
            }
        }
        return m;
    };
    double lo = -40.0, hi = 40.0;
    for (int it = 0; it < 100; ++it) {
        const double mid = 0.5 * (lo + hi);
        (mean_p(mid) < target ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

double cached_intercept(const PhantomConfig& c) {
    using Key = std::tuple<double, double, double, double, double, double, double>;
    static std::mutex mutex;
    static std::map<Key, double> cache;
    const Key key{total_rate(c), c.risk_slope, c.clips_rate, c.clips_log_odds, c.pmd_log_odds,
                  c.density_level_range.first, c.density_level_range.second};
    std::lock_guard lock(mutex);
    auto it = cache.find(key);
    if (it == cache.end()) it = cache.emplace(key, solve_intercept(c)).first;
    return it->second;
}

RealGrid unit_noise_field(int rows, int cols, double sigma, Rng& rng) {
    RealGrid white(rows, cols);
    for (auto& v : white.storage()) v = normal(rng);
    RealGrid f = imaging::gaussian_blur(white, sigma);
    double mean = 0.0;
    for (double v : f.values()) mean += v;
    mean /= static_cast<double>(f.size());
    double ss = 0.0;
    for (double v : f.values()) ss += (v - mean) * (v - mean);
    const double sd = std::sqrt(ss / static_cast<double>(f.size()));
    for (auto& v : f.storage()) v = sd > 0.0 ? (v - mean) / sd : 0.0;
    return f;
}

// Smooth field drawn on a grid `step` times coarser, bilinearly upsampled.
RealGrid coarse_noise_field(int rows, int cols, double sigma, int step, Rng& rng) {
    const int cr = rows / step + 2;
    const int cc = cols / step + 2;
    const RealGrid coarse = unit_noise_field(cr, cc, sigma / step, rng);
    RealGrid out(rows, cols);
    for (int r = 0; r < rows; ++r) {
        const double y = static_cast<double>(r) / step;
        const int y0 = static_cast<int>(y);
        const double fy = y - y0;
        for (int c = 0; c < cols; ++c) {
            const double x = static_cast<double>(c) / step;
            const int x0 = static_cast<int>(x);
            const double fx = x - x0;
            out(r, c) = (1 - fy) * ((1 - fx) * coarse(y0, x0) + fx * coarse(y0, x0 + 1)) +
                        fy * ((1 - fx) * coarse(y0 + 1, x0) + fx * coarse(y0 + 1, x0 + 1));
        }
    }
    return out;
}

struct WomanTraits {
    double semi_height_mm = 0.0;
    double semi_depth_mm = 0.0;
    double density_level = 0.0;
    double texture_sigma_px = 0.0;
    double spot_amplitude = 0.0;
    CancerGroup group = CancerGroup::Healthy;
    std::optional<Laterality> cancer_side;
    bool artifact = false;
};

struct Geometry {
    int rows = 0;
    int cols = 0;
};

Geometry view_geometry(const PhantomConfig& c) {
    const double h = c.semi_height_mm.second * 1.1;
    const double d = c.semi_depth_mm.second * 1.05;
    return {static_cast<int>(std::ceil(2.0 * h / c.pixel_spacing_mm)) + 8,
            static_cast<int>(std::ceil(d / c.pixel_spacing_mm)) + 8};
}

struct ViewResult {
    ViewImage view;
    double dense_fraction = 0.0;
};

ViewResult render_view(const PhantomConfig& c, const WomanTraits& t, int slot, Rng& rng) {
    const Geometry g = view_geometry(c);
    const Laterality side = cohort::slot_laterality(slot);
    const bool mlo = slot % 2 == 1;
    const double semi_r = t.semi_height_mm * (mlo ? 1.1 : 1.0) / c.pixel_spacing_mm;
    const double semi_c = t.semi_depth_mm * (mlo ? 1.05 : 1.0) / c.pixel_spacing_mm;
    const double cy = 0.5 * (g.rows - 1) + (mlo ? -0.05 * g.rows : 0.0);

    const RealGrid density = coarse_noise_field(g.rows, g.cols, 15.0, 4, rng);
    const RealGrid texture = unit_noise_field(g.rows, g.cols, t.texture_sigma_px, rng);
    const RealGrid spots = unit_noise_field(g.rows, g.cols, t.texture_sigma_px, rng);
    const double level_logit = std::log(t.density_level / (1.0 - t.density_level));

    // optional lesion (cancer side of SDC women) and artifact
    const bool lesion = t.group == CancerGroup::SDC && t.cancer_side == side;
    const double lesion_r = uniform(rng, -0.4, 0.4) * semi_r + cy;
    const double lesion_c = uniform(rng, 0.25, 0.6) * semi_c;
    const double lesion_sigma = 6.0 / c.pixel_spacing_mm;
    const bool artifact = t.artifact && slot == 0;
    const int art_r = static_cast<int>(cy + uniform(rng, -0.3, 0.3) * semi_r);
    const int art_c = static_cast<int>(uniform(rng, 0.2, 0.5) * semi_c);
    const int art_half = std::max(2, static_cast<int>(5.0 / c.pixel_spacing_mm));

    const double edge_scale = kEdgeScaleMm / c.pixel_spacing_mm;
    ViewResult out;
    ViewImage& v = out.view;
    v.pixels = imaging::PixelGrid(g.rows, g.cols, 0);
    v.pixel_spacing_mm = c.pixel_spacing_mm;
    v.laterality = side;
    v.view_position = mlo ? imaging::ViewPosition::MLO : imaging::ViewPosition::CC;
    v.format = imaging::ViewFormat::raw();
    v.i_max = 65535;
    long area = 0;
    long dense = 0;
    for (int r = 0; r < g.rows; ++r) {
        for (int cc = 0; cc < g.cols; ++cc) {
            const double y = (r - cy) / semi_r;
            const double x = cc / semi_c;
            const double rho = std::sqrt(x * x + y * y);
            if (rho > 1.0) continue;
            // depth into the breast from the skin line, in pixels
            const double depth = (1.0 - rho) * std::min(semi_r, semi_c);
            const double thickness = 1.0 - 0.5 * std::exp(-depth / edge_scale);
            const double d = logistic(level_logit + 1.2 * density(r, cc));
            ++area;
            dense += d > 0.5;
            double mu = 0.3 + 0.8 * d + kTextureBase * texture(r, cc) +
                        t.spot_amplitude * std::min(3.0, std::max(0.0, spots(r, cc) - 1.0) / kSpotScale);
            if (lesion) {
                const double dr = r - lesion_r;
                const double dc = cc - lesion_c;
                mu += c.lesion_contrast * std::exp(-0.5 * (dr * dr + dc * dc) / (lesion_sigma * lesion_sigma));
            }
            if (artifact && std::abs(r - art_r) <= art_half && std::abs(cc - art_c) <= art_half) mu += 2.0;
            mu = mu > 0.0 ? kMaxAttenuation * std::tanh(mu / kMaxAttenuation) : mu;
            const double signal = c.base_intensity * std::exp(-thickness * mu);
            const double noisy = signal + c.noise_std * std::sqrt(signal / c.base_intensity) * normal(rng);
            const int col = side == Laterality::Left ? cc : g.cols - 1 - cc;
            v.pixels(r, col) = static_cast<std::uint16_t>(std::clamp(std::lround(noisy), 1L, 65535L));
        }
    }
    out.dense_fraction = area > 0 ? static_cast<double>(dense) / static_cast<double>(area) : 0.0;
    return out;
}

struct Draws {
    cohort::WomanRecord record;
    WomanTraits traits;
    double latent = 0.0;
    double texture_latent = 0.0;
};

Draws draw_woman(const PhantomConfig& c, int index) {
    Rng rng(mix_seed(c.seed, static_cast<std::uint64_t>(index)));
    Draws w;
    auto& rec = w.record;
    rec.woman_id = woman_id(c, index);
    rec.age_years = std::uniform_int_distribution<int>(c.age_range.first, c.age_range.second)(rng);
    rec.screen_date = cohort::add_days(cohort::parse_date("2010-01-01"), std::uniform_int_distribution<long>(0, 729)(rng));
    rec.has_clips = uniform01(rng) < c.clips_rate;

    auto& t = w.traits;
    t.semi_height_mm = uniform(rng, c.semi_height_mm.first, c.semi_height_mm.second);
    t.semi_depth_mm = uniform(rng, c.semi_depth_mm.first, c.semi_depth_mm.second);
    t.density_level = uniform(rng, c.density_level_range.first, c.density_level_range.second);
    t.texture_sigma_px = uniform(rng, 4.0, 8.0);

    w.latent = normal(rng);
    const double logit = cached_intercept(c) + c.risk_slope * w.latent + c.clips_log_odds * (rec.has_clips ? 1.0 : 0.0) +
                         c.pmd_log_odds * density_term(c, t.density_level);
    const bool event = uniform01(rng) < logistic(logit);
    const double which = uniform01(rng) * total_rate(c);
    const double side_draw = uniform01(rng);
    const double nuisance = normal(rng);
    const double noise_draw = uniform01(rng);
    const double noise_tail = std::abs(normal(rng));
    const double days_draw = uniform01(rng);
    const bool false_recall = uniform01(rng) < 0.03;
    t.artifact = uniform01(rng) < c.artifact_rate;

    t.group = CancerGroup::Healthy;
    if (event) {
        double acc = 0.0;
        t.group = CancerGroup::LTC;
        for (const auto& [g, r] : c.event_rates) {
            acc += r;
            if (which < acc) {
                t.group = g;
                break;
            }
        }
    }
    w.texture_latent = w.latent;
    if (noise_draw < c.label_noise) {
        w.texture_latent = is_cancer(t.group) ? -(1.5 + noise_tail) : 1.5 + noise_tail;
    }
    t.spot_amplitude =
        kSpotBase * std::exp(std::clamp(c.texture_signal_amplitude * w.texture_latent + c.texture_nuisance * nuisance, -3.0, 3.0));

    switch (t.group) {
        case CancerGroup::Healthy:
            rec.recalled = false_recall;
            break;
        case CancerGroup::SDC:
            rec.recalled = true;
            rec.diagnosis_date = cohort::add_days(rec.screen_date, 14 + std::lround(days_draw * 136));
            break;
        case CancerGroup::IC:
            rec.diagnosis_date = cohort::add_days(rec.screen_date, 200 + std::lround(days_draw * 500));
            break;
        case CancerGroup::LTC:
            rec.diagnosis_date = cohort::add_days(rec.screen_date, 760 + std::lround(days_draw * 1640));
            break;
    }
    if (is_cancer(t.group)) {
        t.cancer_side = side_draw < 0.5 ? Laterality::Left : Laterality::Right;
        rec.cancer_laterality = t.cancer_side;
    }
    if (t.artifact) rec.exclusion_flags.insert(cohort::ExclusionFlag::VisibleArtifact);
    for (int s = 0; s < 4; ++s) rec.view_ids[s] = rec.woman_id + "_" + cohort::kViewSlotNames[s];
    return w;
}

}  // namespace

void validate_config(const PhantomConfig& c) {
    auto bad = [](const std::string& what) { throw Error(ErrorCode::InvalidConfig, "phantom config: " + what); };
    if (c.n_women < 1) bad("n_women must be >= 1");
    double sum = 0.0;
    for (const auto& [g, r] : c.event_rates) {
        if (!is_cancer(g)) bad("event_rates keys must be cancer groups");
        if (r < 0.0) bad("event rates must be >= 0");
        sum += r;
    }
    if (sum > 1.0) bad("event rates sum above 1");
    if (c.age_range.first > c.age_range.second) bad("age_range");
    if (c.semi_height_mm.first <= 0.0 || c.semi_height_mm.first > c.semi_height_mm.second) bad("semi_height_mm");
    if (c.semi_depth_mm.first <= 0.0 || c.semi_depth_mm.first > c.semi_depth_mm.second) bad("semi_depth_mm");
    if (!(c.pixel_spacing_mm > 0.0)) bad("pixel_spacing_mm");
    if (!(c.base_intensity > 0.0) || c.base_intensity > 60000.0) bad("base_intensity");
    if (c.noise_std < 0.0) bad("noise_std");
    if (c.density_level_range.first <= 0.0 || c.density_level_range.second >= 1.0 ||
        c.density_level_range.first > c.density_level_range.second) {
        bad("density_level_range must lie inside (0,1)");
    }
    if (c.texture_signal_amplitude < 0.0) bad("texture_signal_amplitude must be >= 0");
    if (c.lesion_contrast < 0.0) bad("lesion_contrast must be >= 0");
    if (c.texture_nuisance < 0.0) bad("texture_nuisance must be >= 0");
    for (double p : {c.clips_rate, c.label_noise, c.artifact_rate}) {
        if (p < 0.0 || p > 1.0) bad("probabilities must lie in [0,1]");
    }
    // the tone map needs tissue 20 mm from the skin line
    if (c.semi_depth_mm.first < 30.0) bad("semi_depth_mm below 30 mm");
}

json to_json(const PhantomConfig& c) {
    json rates = json::object();
    for (const auto& [g, r] : c.event_rates) rates[to_string(g)] = r;
    return {{"n_women", c.n_women},
            {"event_rates", rates},
            {"age_range", {c.age_range.first, c.age_range.second}},
            {"semi_height_mm", {c.semi_height_mm.first, c.semi_height_mm.second}},
            {"semi_depth_mm", {c.semi_depth_mm.first, c.semi_depth_mm.second}},
            {"pixel_spacing_mm", c.pixel_spacing_mm},
            {"base_intensity", c.base_intensity},
            {"noise_std", c.noise_std},
            {"density_level_range", {c.density_level_range.first, c.density_level_range.second}},
            {"texture_signal_amplitude", c.texture_signal_amplitude},
            {"lesion_contrast", c.lesion_contrast},
            {"risk_slope", c.risk_slope},
            {"clips_rate", c.clips_rate},
            {"clips_log_odds", c.clips_log_odds},
            {"pmd_log_odds", c.pmd_log_odds},
            {"texture_nuisance", c.texture_nuisance},
            {"label_noise", c.label_noise},
            {"artifact_rate", c.artifact_rate},
            {"id_prefix", c.id_prefix},
            {"seed", c.seed}};
}

PhantomConfig phantom_config_from_json(const json& j, PhantomConfig c) {
    auto pair_of = [&](const char* key, auto& target) {
        if (!j.contains(key)) return;
        const auto& a = j.at(key);
        if (!a.is_array() || a.size() != 2) throw Error(ErrorCode::InvalidConfig, std::string(key) + " needs 2 values");
        a[0].get_to(target.first);
        a[1].get_to(target.second);
    };
    try {
        c.n_women = j.value("n_women", c.n_women);
        if (j.contains("event_rates")) {
            c.event_rates.clear();
            for (const auto& [k, v] : j.at("event_rates").items()) c.event_rates[parse_cancer_group(k)] = v.get<double>();
        }
        pair_of("age_range", c.age_range);
        pair_of("semi_height_mm", c.semi_height_mm);
        pair_of("semi_depth_mm", c.semi_depth_mm);
        pair_of("density_level_range", c.density_level_range);
        c.pixel_spacing_mm = j.value("pixel_spacing_mm", c.pixel_spacing_mm);
        c.base_intensity = j.value("base_intensity", c.base_intensity);
        c.noise_std = j.value("noise_std", c.noise_std);
        c.texture_signal_amplitude = j.value("texture_signal_amplitude", c.texture_signal_amplitude);
        c.lesion_contrast = j.value("lesion_contrast", c.lesion_contrast);
        c.risk_slope = j.value("risk_slope", c.risk_slope);
        c.clips_rate = j.value("clips_rate", c.clips_rate);
        c.clips_log_odds = j.value("clips_log_odds", c.clips_log_odds);
        c.pmd_log_odds = j.value("pmd_log_odds", c.pmd_log_odds);
        c.texture_nuisance = j.value("texture_nuisance", c.texture_nuisance);
        c.label_noise = j.value("label_noise", c.label_noise);
        c.artifact_rate = j.value("artifact_rate", c.artifact_rate);
        c.id_prefix = j.value("id_prefix", c.id_prefix);
        c.seed = j.value("seed", c.seed);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::InvalidConfig, std::string("phantom config: ") + e.what());
    }
    validate_config(c);
    return c;
}

std::string woman_id(const PhantomConfig& config, int index) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%06d", index);
    return config.id_prefix + buf;
}

WomanPhantom generate_woman(const PhantomConfig& config, int index) {
    const Draws d = draw_woman(config, index);
    WomanPhantom w;
    w.record = d.record;
    w.latent_risk = d.latent;
    w.texture_latent = d.texture_latent;
    double dense = 0.0;
    for (int s = 0; s < 4; ++s) {
        Rng rng(mix_seed(mix_seed(config.seed, static_cast<std::uint64_t>(index)), 100 + static_cast<std::uint64_t>(s)));
        auto v = render_view(config, d.traits, s, rng);
        dense += v.dense_fraction;
        w.views[s] = std::move(v.view);
    }
    w.record.pmd = std::clamp(dense / 4.0, 0.0, 1.0);
    return w;
}

cohort::WomanRecord generate_record(const PhantomConfig& config, int index) {
    return generate_woman(config, index).record;
}

CohortSummary generate_cohort(const PhantomConfig& config, const std::filesystem::path& out_dir, int workers) {
    validate_config(config);
    CohortSummary out;
    out.view_root = out_dir / "views";
    out.manifest = out_dir / "manifest.jsonl";
    std::filesystem::create_directories(out.view_root);
    imaging::ViewStore store(out.view_root);
    out.records.resize(static_cast<std::size_t>(config.n_women));
    parallel_for(out.records.size(), workers, [&](std::size_t i) {
        auto w = generate_woman(config, static_cast<int>(i));
        for (int s = 0; s < 4; ++s) store.save(w.record.view_ids[s], w.views[s]);
        out.records[i] = std::move(w.record);
    });
    cohort::write_manifest(out.manifest, out.records);
    return out;
}

}  // namespace texrisk::synth
