#pragma once

#include <string>
#include <vector>

#include "texrisk/imaging/distance.hpp"
#include "texrisk/imaging/mask.hpp"
#include "texrisk/imaging/view.hpp"

namespace texrisk::imaging {

// Pixel spacing at which lowpass_sigma_px is expressed.
inline constexpr double kReferenceSpacingMm = 0.255;

enum class ToneMapMode {
    // exponent term log10((I/Ib)^2): monotone non-increasing in I
    MonotoneLogSquareRatio,
    // exponent term (log10(I/Ib))^2, the formula read literally
    SquaredLogRatio,
};

std::string to_string(ToneMapMode mode);
ToneMapMode parse_tone_map_mode(const std::string& text);

struct FlavorProfile {
    std::string profile_id;
    double alpha = 4.5;
    double beta = 1.0;
    double gamma = 1.0;
    double delta = 0.0;
    ToneMapMode tone_map_mode = ToneMapMode::MonotoneLogSquareRatio;
    double lowpass_sigma_px = 8.0;
    double edge_band_mm = 15.0;
    double interior_threshold_mm = 20.0;

    bool operator==(const FlavorProfile&) const = default;
};

struct ParameterBounds {
    double lo;
    double hi;
};

// Hard validation bounds. The tuner UI treats the published ranges
// (alpha 4-5.5, beta 0.7-1.2) as soft bounds inside these.
struct ProfileBounds {
    ParameterBounds alpha{0.5, 12.0};
    ParameterBounds beta{-6.0, 6.0};
    ParameterBounds gamma{0.0, 4.0};
    ParameterBounds delta{0.0, 16.0};
    ParameterBounds lowpass_sigma_px{0.25, 256.0};
    ParameterBounds edge_band_mm{0.5, 100.0};
    ParameterBounds interior_threshold_mm{0.5, 200.0};
};

struct FieldError {
    std::string field;
    std::string message;
};

std::vector<FieldError> validate_profile(const FlavorProfile& profile, const ProfileBounds& bounds = {});
// Throws ParameterOutOfRange naming every offending field.
void require_valid_profile(const FlavorProfile& profile);

// The seven shipped profiles: six training flavors on an (alpha, beta) grid
// with distinct (gamma, delta), and a held-out seventh.
std::vector<FlavorProfile> default_profiles();

// Mean raw intensity over mask pixels at least interior_threshold_mm from the
// skin line. Throws DegenerateBreastMean when that region is empty or dark.
double interior_breast_mean(const ViewImage& view, const BreastMask& mask, const DistanceMap& dmap,
                            const FlavorProfile& profile);

// Inverse-sigmoid tone map of a log intensity ratio. Pure per-pixel function.
double tone_map_value(double intensity, double breast_mean, const FlavorProfile& profile);

ViewImage apply_tone_map(const ViewImage& view, const BreastMask& mask, const DistanceMap& dmap,
                         const FlavorProfile& profile);
ViewImage apply_tone_map(const ViewImage& view, const BreastMask& mask, const FlavorProfile& profile);

// Radial gain profile used for the edge band, one entry per 1-px distance bin.
struct EdgeGainProfile {
    double band_px = 0.0;
    std::vector<double> bin_gain;  // smoothed and clamped
    double gain_at(double distance_px) const;
};

EdgeGainProfile estimate_edge_gain(const ViewImage& view, const BreastMask& mask, const DistanceMap& dmap,
                                   const FlavorProfile& profile);

ViewImage correct_peripheral_tissue(const ViewImage& view, const BreastMask& mask, const DistanceMap& dmap,
                                    const FlavorProfile& profile);

// F = I - lowpass(I), low-pass restricted to the mask. Zero outside the mask.
RealGrid enhancement_mask(const RealGrid& image, const MaskGrid& mask, double sigma_px);

double effective_sigma_px(const FlavorProfile& profile, double pixel_spacing_mm);

ViewImage enhance_contrast(const ViewImage& view, const BreastMask& mask, const FlavorProfile& profile);

struct FlavorResult {
    ViewImage view;
    BreastMask mask;
};

// mask -> zero background -> tone map -> edge correction -> enhancement.
FlavorResult flavorize_with_mask(const ViewImage& raw, const FlavorProfile& profile, const MaskOptions& options = {});
ViewImage flavorize(const ViewImage& raw, const FlavorProfile& profile, const MaskOptions& options = {});

}  // namespace texrisk::imaging
