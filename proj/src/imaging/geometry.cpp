#include "texrisk/imaging/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "texrisk/common/error.hpp"
#include "texrisk/common/random.hpp"

namespace texrisk::imaging {

namespace {

struct InverseMap {
    double m00, m01, m10, m11;
    double cx, cy;
};

InverseMap inverse_map(int rows, int cols, const GeometricAugmentation& aug) {
    const double theta = aug.rotation_deg * std::numbers::pi / 180.0;
    const double zoom = 1.0 + aug.scale_factor;
    const double cs = std::cos(theta);
    const double sn = std::sin(theta);
    // forward M = R * (zoom I) * [[1, sh], [0, 1]] acting on (x, y)
    const double f00 = zoom * cs;
    const double f01 = zoom * (cs * aug.shear_factor - sn);
    const double f10 = zoom * sn;
    const double f11 = zoom * (sn * aug.shear_factor + cs);
    const double det = f00 * f11 - f01 * f10;
    return {f11 / det, -f01 / det, -f10 / det, f00 / det, 0.5 * (cols - 1), 0.5 * (rows - 1)};
}

double sample_bilinear(const RealGrid& g, double x, double y) {
    const int x0 = static_cast<int>(std::floor(x));
    const int y0 = static_cast<int>(std::floor(y));
    const double fx = x - x0;
    const double fy = y - y0;
    auto at = [&](int r, int c) { return g.in_bounds(r, c) ? g(r, c) : 0.0; };
    return (1 - fy) * ((1 - fx) * at(y0, x0) + fx * at(y0, x0 + 1)) + fy * ((1 - fx) * at(y0 + 1, x0) + fx * at(y0 + 1, x0 + 1));
}

double sample_clamped(const RealGrid& g, double x, double y) {
    x = std::clamp(x, 0.0, static_cast<double>(g.cols() - 1));
    y = std::clamp(y, 0.0, static_cast<double>(g.rows() - 1));
    const int x0 = std::min(static_cast<int>(x), g.cols() - 1);
    const int y0 = std::min(static_cast<int>(y), g.rows() - 1);
    const int x1 = std::min(x0 + 1, g.cols() - 1);
    const int y1 = std::min(y0 + 1, g.rows() - 1);
    const double fx = x - x0;
    const double fy = y - y0;
    return (1 - fy) * ((1 - fx) * g(y0, x0) + fx * g(y0, x1)) + fy * ((1 - fx) * g(y1, x0) + fx * g(y1, x1));
}

RealGrid mask_to_real(const MaskGrid& mask) {
    RealGrid out(mask.rows(), mask.cols(), 0.0);
    for (std::size_t i = 0; i < mask.size(); ++i) out.storage()[i] = mask.storage()[i] ? 1.0 : 0.0;
    return out;
}

MaskGrid real_to_mask(const RealGrid& g) {
    MaskGrid out(g.rows(), g.cols(), 0);
    for (std::size_t i = 0; i < g.size(); ++i) out.storage()[i] = g.storage()[i] >= 0.5 ? 1 : 0;
    return out;
}

}  // namespace

void validate_augmentation(const GeometricAugmentation& aug) {
    auto check = [](double v, double limit, const char* name) {
        if (!std::isfinite(v) || std::abs(v) > limit) {
            throw Error(ErrorCode::ParameterOutOfRange, std::string(name) + " out of range");
        }
    };
    check(aug.rotation_deg, kMaxRotationDeg, "rotation_deg");
    check(aug.scale_factor, kMaxScaleFactor, "scale_factor");
    check(aug.shear_factor, kMaxShearFactor, "shear_factor");
}

GeometricAugmentation sample_augmentation(std::uint64_t seed, bool flip_right_views) {
    Rng rng(seed);
    GeometricAugmentation aug;
    aug.rotation_deg = uniform(rng, -kMaxRotationDeg, kMaxRotationDeg);
    aug.scale_factor = uniform(rng, -kMaxScaleFactor, kMaxScaleFactor);
    aug.shear_factor = uniform(rng, -kMaxShearFactor, kMaxShearFactor);
    aug.flip_right_views = flip_right_views;
    return aug;
}

RealGrid warp_affine(const RealGrid& image, const GeometricAugmentation& aug) {
    validate_augmentation(aug);
    if (aug.is_identity()) return image;
    const InverseMap inv = inverse_map(image.rows(), image.cols(), aug);
    RealGrid out(image.rows(), image.cols(), 0.0);
    for (int r = 0; r < image.rows(); ++r) {
        for (int c = 0; c < image.cols(); ++c) {
            const double dx = c - inv.cx;
            const double dy = r - inv.cy;
            const double sx = inv.cx + inv.m00 * dx + inv.m01 * dy;
            const double sy = inv.cy + inv.m10 * dx + inv.m11 * dy;
            out(r, c) = sample_bilinear(image, sx, sy);
        }
    }
    return out;
}

MaskGrid warp_affine(const MaskGrid& mask, const GeometricAugmentation& aug) {
    if (aug.is_identity()) {
        validate_augmentation(aug);
        return mask;
    }
    return real_to_mask(warp_affine(mask_to_real(mask), aug));
}

RealGrid to_real(const PixelGrid& pixels) {
    RealGrid out(pixels.rows(), pixels.cols(), 0.0);
    for (std::size_t i = 0; i < pixels.size(); ++i) out.storage()[i] = pixels.storage()[i];
    return out;
}

PixelGrid to_pixels(const RealGrid& image, int i_max) {
    PixelGrid out(image.rows(), image.cols(), 0);
    for (std::size_t i = 0; i < image.size(); ++i) {
        const double v = image.storage()[i];
        out.storage()[i] = v > 0.0 ? static_cast<std::uint16_t>(std::min<long>(std::lround(v), i_max)) : 0;
    }
    return out;
}

ViewImage geometric_augment(const ViewImage& view, const GeometricAugmentation& aug) {
    validate_augmentation(aug);
    ViewImage out = (aug.flip_right_views && view.laterality == Laterality::Right) ? flip_horizontal(view) : view;
    if (aug.is_identity()) return out;
    out.pixels = to_pixels(warp_affine(to_real(out.pixels), aug), view.i_max);
    return out;
}

Canvas desk_canvas() { return Canvas{2.55, 120, 94}; }

ResamplePlan plan_resample(int rows, int cols, double spacing_mm, Laterality laterality, const Canvas& canvas) {
    if (!(spacing_mm > 0.0)) throw Error(ErrorCode::ParameterOutOfRange, "pixel spacing must be positive");
    ResamplePlan plan;
    plan.factor = spacing_mm / canvas.spacing_mm;
    plan.out_rows = static_cast<int>(std::lround(rows * plan.factor));
    plan.out_cols = static_cast<int>(std::lround(cols * plan.factor));
    if (plan.out_rows > canvas.rows || plan.out_cols > canvas.cols) {
        const double shrink = std::min(static_cast<double>(canvas.rows) / plan.out_rows,
                                       static_cast<double>(canvas.cols) / plan.out_cols);
        plan.factor *= shrink;
        plan.out_rows = std::min(canvas.rows, static_cast<int>(std::floor(rows * plan.factor + 1e-9)));
        plan.out_cols = std::min(canvas.cols, static_cast<int>(std::floor(cols * plan.factor + 1e-9)));
        plan.fit_downscaled = true;
    }
    plan.out_rows = std::max(1, plan.out_rows);
    plan.out_cols = std::max(1, plan.out_cols);
    plan.row_offset = (canvas.rows - plan.out_rows) / 2;
    plan.col_offset = laterality == Laterality::Left ? 0 : canvas.cols - plan.out_cols;
    return plan;
}

RealGrid resample_and_pad(const RealGrid& image, const ResamplePlan& plan, const Canvas& canvas) {
    RealGrid out(canvas.rows, canvas.cols, 0.0);
    const bool same_size = plan.out_rows == image.rows() && plan.out_cols == image.cols();
    const double fy = static_cast<double>(image.rows()) / plan.out_rows;
    const double fx = static_cast<double>(image.cols()) / plan.out_cols;
    for (int r = 0; r < plan.out_rows; ++r) {
        for (int c = 0; c < plan.out_cols; ++c) {
            double v;
            if (same_size) {
                v = image(r, c);
            } else {
                const double sy = (r + 0.5) * fy - 0.5;
                const double sx = (c + 0.5) * fx - 0.5;
                v = sample_clamped(image, sx, sy);
            }
            out(r + plan.row_offset, c + plan.col_offset) = v;
        }
    }
    return out;
}

MaskGrid resample_and_pad(const MaskGrid& mask, const ResamplePlan& plan, const Canvas& canvas) {
    return real_to_mask(resample_and_pad(mask_to_real(mask), plan, canvas));
}

ViewImage resample_and_pad(const ViewImage& view, const Canvas& canvas) {
    const ResamplePlan plan =
        plan_resample(view.pixels.rows(), view.pixels.cols(), view.pixel_spacing_mm, view.laterality, canvas);
    ViewImage out = view;
    out.pixels = to_pixels(resample_and_pad(to_real(view.pixels), plan, canvas), view.i_max);
    out.pixel_spacing_mm = view.pixel_spacing_mm / plan.factor;
    if (!plan.fit_downscaled) out.pixel_spacing_mm = canvas.spacing_mm;
    out.fit_downscaled = plan.fit_downscaled;
    return out;
}

}  // namespace texrisk::imaging
