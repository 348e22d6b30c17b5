#pragma once

#include <cstdint>

#include "texrisk/imaging/mask.hpp"
#include "texrisk/imaging/view.hpp"

namespace texrisk::imaging {

struct GeometricAugmentation {
    double rotation_deg = 0.0;   // [-15, 15]
    double scale_factor = 0.0;   // [-0.2, 0.2], zoom = 1 + scale_factor
    double shear_factor = 0.0;   // [-0.15, 0.15], horizontal shear
    bool flip_right_views = true;

    bool is_identity() const noexcept { return rotation_deg == 0.0 && scale_factor == 0.0 && shear_factor == 0.0; }
};

inline constexpr double kMaxRotationDeg = 15.0;
inline constexpr double kMaxScaleFactor = 0.2;
inline constexpr double kMaxShearFactor = 0.15;

// Throws ParameterOutOfRange.
void validate_augmentation(const GeometricAugmentation& aug);

// Draws each parameter uniformly from its range. Deterministic in the seed.
GeometricAugmentation sample_augmentation(std::uint64_t seed, bool flip_right_views = true);

// Inverse-mapped affine warp about the image centre, bilinear, zero fill.
RealGrid warp_affine(const RealGrid& image, const GeometricAugmentation& aug);
MaskGrid warp_affine(const MaskGrid& mask, const GeometricAugmentation& aug);

// Flips right-laterality views first when aug.flip_right_views is set.
ViewImage geometric_augment(const ViewImage& view, const GeometricAugmentation& aug);

// Target sampling grid for network input.
struct Canvas {
    double spacing_mm = 0.255;
    int rows = 1194;
    int cols = 938;
};

// Reduced canvas covering the same physical extent, for desk-scale runs.
Canvas desk_canvas();

struct ResamplePlan {
    int out_rows = 0;
    int out_cols = 0;
    int row_offset = 0;
    int col_offset = 0;
    double factor = 1.0;  // output px per input px
    bool fit_downscaled = false;
};

ResamplePlan plan_resample(int rows, int cols, double spacing_mm, Laterality laterality, const Canvas& canvas);

RealGrid resample_and_pad(const RealGrid& image, const ResamplePlan& plan, const Canvas& canvas);
MaskGrid resample_and_pad(const MaskGrid& mask, const ResamplePlan& plan, const Canvas& canvas);

// Resamples to the canvas spacing and zero-pads on the side away from the
// chest wall. Oversized views are shrunk to fit and flagged.
ViewImage resample_and_pad(const ViewImage& view, const Canvas& canvas = {});

RealGrid to_real(const PixelGrid& pixels);
PixelGrid to_pixels(const RealGrid& image, int i_max);

}  // namespace texrisk::imaging
