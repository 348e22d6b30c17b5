#include "texrisk/imaging/flavor.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <sstream>

#include "texrisk/common/error.hpp"
#include "texrisk/imaging/filters.hpp"

namespace texrisk::imaging {

namespace {

std::uint16_t to_processed_pixel(double v) {
    if (!(v > 0.0)) return 0;  // also maps NaN to 0
    return static_cast<std::uint16_t>(std::min<long>(std::lround(v), kProcessedMax));
}

void check_bounds(std::vector<FieldError>& errors, const char* field, double value, ParameterBounds b) {
    if (!std::isfinite(value)) {
        errors.push_back({field, std::string(field) + " must be finite"});
    } else if (value < b.lo || value > b.hi) {
        std::ostringstream msg;
        msg << field << " = " << value << " outside [" << b.lo << ", " << b.hi << "]";
        errors.push_back({field, msg.str()});
    }
}

}  // namespace

std::string to_string(ToneMapMode mode) {
    return mode == ToneMapMode::MonotoneLogSquareRatio ? "MonotoneLogSquareRatio" : "SquaredLogRatio";
}

ToneMapMode parse_tone_map_mode(const std::string& text) {
    if (text == "MonotoneLogSquareRatio") return ToneMapMode::MonotoneLogSquareRatio;
    if (text == "SquaredLogRatio") return ToneMapMode::SquaredLogRatio;
    throw Error(ErrorCode::ParameterOutOfRange, "tone_map_mode: unknown mode '" + text + "'");
}

std::vector<FieldError> validate_profile(const FlavorProfile& profile, const ProfileBounds& bounds) {
    std::vector<FieldError> errors;
    if (profile.profile_id.empty()) {
        errors.push_back({"profile_id", "profile_id must be non-empty"});
    } else if (!std::all_of(profile.profile_id.begin(), profile.profile_id.end(), [](char ch) {
                   return std::isalnum(static_cast<unsigned char>(ch)) || ch == '_' || ch == '-' || ch == '.';
               })) {
        errors.push_back({"profile_id", "profile_id may only contain letters, digits, '_', '-' and '.'"});
    }
    check_bounds(errors, "alpha", profile.alpha, bounds.alpha);
    check_bounds(errors, "beta", profile.beta, bounds.beta);
    check_bounds(errors, "gamma", profile.gamma, bounds.gamma);
    check_bounds(errors, "delta", profile.delta, bounds.delta);
    check_bounds(errors, "lowpass_sigma_px", profile.lowpass_sigma_px, bounds.lowpass_sigma_px);
    check_bounds(errors, "edge_band_mm", profile.edge_band_mm, bounds.edge_band_mm);
    check_bounds(errors, "interior_threshold_mm", profile.interior_threshold_mm, bounds.interior_threshold_mm);
    return errors;
}

void require_valid_profile(const FlavorProfile& profile) {
    const auto errors = validate_profile(profile);
    if (errors.empty()) return;
    std::string msg = "invalid flavor profile '" + profile.profile_id + "':";
    for (const auto& e : errors) msg += " " + e.message + ";";
    throw Error(ErrorCode::ParameterOutOfRange, msg);
}

std::vector<FlavorProfile> default_profiles() {
    auto make = [](std::string id, double a, double b, double g, double d, double sigma, double band) {
        FlavorProfile p;
        p.profile_id = std::move(id);
        p.alpha = a;
        p.beta = b;
        p.gamma = g;
        p.delta = d;
        p.lowpass_sigma_px = sigma;
        p.edge_band_mm = band;
        p.interior_threshold_mm = 20.0;
        return p;
    };
    return {
        make("flavor1", 4.00, 0.70, 1.00, 0.50, 8.0, 15.0),
        make("flavor2", 4.00, 1.20, 0.95, 1.00, 16.0, 12.0),
        make("flavor3", 4.75, 0.70, 1.05, 1.50, 12.0, 18.0),
        make("flavor4", 4.75, 1.20, 0.90, 0.75, 24.0, 15.0),
        make("flavor5", 5.50, 0.70, 1.00, 2.00, 20.0, 12.0),
        make("flavor6", 5.50, 1.20, 0.85, 1.25, 32.0, 18.0),
        // outside the (alpha, delta) hull of the six above
        make("flavor7", 4.40, 0.95, 0.92, 2.20, 14.0, 16.0),
    };
}

double interior_breast_mean(const ViewImage& view, const BreastMask& mask, const DistanceMap& dmap,
                            const FlavorProfile& profile) {
    const double threshold_px = profile.interior_threshold_mm / view.pixel_spacing_mm;
    double sum = 0.0;
    long count = 0;
    for (int r = 0; r < view.pixels.rows(); ++r) {
        for (int c = 0; c < view.pixels.cols(); ++c) {
            if (mask.mask(r, c) && dmap.dist(r, c) >= threshold_px) {
                sum += view.pixels(r, c);
                ++count;
            }
        }
    }
    if (count == 0) throw Error(ErrorCode::DegenerateBreastMean, "no fully compressed tissue inside the mask");
    const double mean = sum / static_cast<double>(count);
    if (!(mean > 0.0)) throw Error(ErrorCode::DegenerateBreastMean, "fully compressed tissue has zero mean");
    return mean;
}

double tone_map_value(double intensity, double breast_mean, const FlavorProfile& profile) {
    const double ratio = std::max(intensity, 1.0) / breast_mean;
    const double lg = std::log10(ratio);
    const double term = profile.tone_map_mode == ToneMapMode::MonotoneLogSquareRatio ? 2.0 * lg : lg * lg;
    return static_cast<double>(kProcessedMax) / (1.0 + std::exp(profile.alpha * (term - 1.0) + profile.beta));
}

ViewImage apply_tone_map(const ViewImage& view, const BreastMask& mask, const DistanceMap& dmap,
                         const FlavorProfile& profile) {
    if (!view.format.is_raw()) throw Error(ErrorCode::ParameterOutOfRange, "tone map expects a raw view");
    const double breast_mean = interior_breast_mean(view, mask, dmap, profile);
    ViewImage out = view;
    out.format = ViewFormat::flavor(profile.profile_id);
    out.i_max = kProcessedMax;
    for (int r = 0; r < view.pixels.rows(); ++r) {
        for (int c = 0; c < view.pixels.cols(); ++c) {
            out.pixels(r, c) = mask.mask(r, c)
                                   ? to_processed_pixel(tone_map_value(view.pixels(r, c), breast_mean, profile))
                                   : std::uint16_t{0};
        }
    }
    return out;
}

ViewImage apply_tone_map(const ViewImage& view, const BreastMask& mask, const FlavorProfile& profile) {
    return apply_tone_map(view, mask, compute_distance_map(mask), profile);
}

double EdgeGainProfile::gain_at(double d) const {
    if (bin_gain.empty() || d >= band_px) return 1.0;
    const int nb = static_cast<int>(bin_gain.size());
    auto center = [&](int b) { return b == nb - 1 ? 0.5 * (b + band_px) : b + 0.5; };
    if (d <= center(0)) return bin_gain.front();
    for (int b = 0; b + 1 < nb; ++b) {
        const double c0 = center(b);
        const double c1 = center(b + 1);
        if (d <= c1) {
            const double t = (d - c0) / (c1 - c0);
            return bin_gain[static_cast<std::size_t>(b)] * (1.0 - t) + bin_gain[static_cast<std::size_t>(b) + 1] * t;
        }
    }
    // Between the last bin centre and the inner band edge: ramp to 1.
    const double c_last = center(nb - 1);
    const double t = (d - c_last) / (band_px - c_last);
    return bin_gain.back() * (1.0 - t) + t;
}

EdgeGainProfile estimate_edge_gain(const ViewImage& view, const BreastMask& mask, const DistanceMap& dmap,
                                   const FlavorProfile& profile) {
    EdgeGainProfile gain;
    gain.band_px = profile.edge_band_mm / view.pixel_spacing_mm;
    const int nb = std::max(1, static_cast<int>(std::ceil(gain.band_px)));
    std::vector<double> sums(static_cast<std::size_t>(nb), 0.0);
    std::vector<long> counts(static_cast<std::size_t>(nb), 0);
    double interior_sum = 0.0;
    long interior_count = 0;
    for (int r = 0; r < view.pixels.rows(); ++r) {
        for (int c = 0; c < view.pixels.cols(); ++c) {
            if (!mask.mask(r, c)) continue;
            const double d = dmap.dist(r, c);
            if (d >= gain.band_px) {
                interior_sum += view.pixels(r, c);
                ++interior_count;
            } else {
                const auto b = static_cast<std::size_t>(std::min(nb - 1, static_cast<int>(d)));
                sums[b] += view.pixels(r, c);
                ++counts[b];
            }
        }
    }
    if (interior_count == 0) return gain;  // nothing to match against: no-op
    const double interior_mean = interior_sum / static_cast<double>(interior_count);

    std::vector<double> raw_gain(static_cast<std::size_t>(nb), 1.0);
    for (std::size_t b = 0; b < raw_gain.size(); ++b) {
        if (counts[b] == 0) continue;
        const double m = sums[b] / static_cast<double>(counts[b]);
        raw_gain[b] = m > 0.0 ? interior_mean / m : 4.0;
    }
    // 3-bin moving average; the window shrinks symmetrically at the ends.
    gain.bin_gain.resize(raw_gain.size());
    for (int b = 0; b < nb; ++b) {
        const int half = std::min({1, b, nb - 1 - b});
        double acc = 0.0;
        for (int k = b - half; k <= b + half; ++k) acc += raw_gain[static_cast<std::size_t>(k)];
        gain.bin_gain[static_cast<std::size_t>(b)] = std::clamp(acc / (2 * half + 1), 1.0, 4.0);
    }
    return gain;
}

ViewImage correct_peripheral_tissue(const ViewImage& view, const BreastMask& mask, const DistanceMap& dmap,
                                    const FlavorProfile& profile) {
    const EdgeGainProfile gain = estimate_edge_gain(view, mask, dmap, profile);
    ViewImage out = view;
    if (gain.bin_gain.empty()) return out;
    for (int r = 0; r < view.pixels.rows(); ++r) {
        for (int c = 0; c < view.pixels.cols(); ++c) {
            if (!mask.mask(r, c)) {
                out.pixels(r, c) = 0;
                continue;
            }
            const double d = dmap.dist(r, c);
            if (d >= gain.band_px) continue;
            out.pixels(r, c) = to_processed_pixel(view.pixels(r, c) * gain.gain_at(d));
        }
    }
    return out;
}

RealGrid enhancement_mask(const RealGrid& image, const MaskGrid& mask, double sigma_px) {
    const RealGrid low = masked_gaussian_blur(image, mask, sigma_px);
    RealGrid f(image.rows(), image.cols(), 0.0);
    for (int r = 0; r < image.rows(); ++r) {
        for (int c = 0; c < image.cols(); ++c) {
            if (mask(r, c)) f(r, c) = image(r, c) - low(r, c);
        }
    }
    return f;
}

double effective_sigma_px(const FlavorProfile& profile, double pixel_spacing_mm) {
    return std::max(0.25, profile.lowpass_sigma_px * kReferenceSpacingMm / pixel_spacing_mm);
}

ViewImage enhance_contrast(const ViewImage& view, const BreastMask& mask, const FlavorProfile& profile) {
    ViewImage out = view;
    if (profile.gamma == 1.0 && profile.delta == 0.0) {
        for (int r = 0; r < view.pixels.rows(); ++r) {
            for (int c = 0; c < view.pixels.cols(); ++c) {
                if (!mask.mask(r, c)) out.pixels(r, c) = 0;
            }
        }
        return out;
    }
    RealGrid image(view.pixels.rows(), view.pixels.cols(), 0.0);
    for (std::size_t i = 0; i < image.size(); ++i) image.storage()[i] = view.pixels.storage()[i];
    const RealGrid f = profile.delta != 0.0
                           ? enhancement_mask(image, mask.mask, effective_sigma_px(profile, view.pixel_spacing_mm))
                           : RealGrid(image.rows(), image.cols(), 0.0);
    const double i_max = static_cast<double>(kProcessedMax);
    for (int r = 0; r < view.pixels.rows(); ++r) {
        for (int c = 0; c < view.pixels.cols(); ++c) {
            if (!mask.mask(r, c)) {
                out.pixels(r, c) = 0;
                continue;
            }
            const double i = image(r, c);
            out.pixels(r, c) = to_processed_pixel(profile.gamma * i + profile.delta * (f(r, c) / i_max) * i);
        }
    }
    return out;
}

FlavorResult flavorize_with_mask(const ViewImage& raw, const FlavorProfile& profile, const MaskOptions& options) {
    require_valid_profile(profile);
    BreastMask mask = compute_breast_mask(raw, options);
    ViewImage zeroed = raw;
    for (int r = 0; r < raw.pixels.rows(); ++r) {
        for (int c = 0; c < raw.pixels.cols(); ++c) {
            if (!mask.mask(r, c)) zeroed.pixels(r, c) = 0;
        }
    }
    const DistanceMap dmap = compute_distance_map(mask);
    ViewImage toned = apply_tone_map(zeroed, mask, dmap, profile);
    ViewImage corrected = correct_peripheral_tissue(toned, mask, dmap, profile);
    ViewImage enhanced = enhance_contrast(corrected, mask, profile);
    enhanced.format = ViewFormat::flavor(profile.profile_id);
    enhanced.i_max = kProcessedMax;
    return {std::move(enhanced), std::move(mask)};
}

ViewImage flavorize(const ViewImage& raw, const FlavorProfile& profile, const MaskOptions& options) {
    return flavorize_with_mask(raw, profile, options).view;
}

}  // namespace texrisk::imaging
