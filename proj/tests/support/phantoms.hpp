#pragma once

// Small deterministic images and brute-force oracles shared by the unit tests.

#include <cmath>
#include <algorithm>
#include <array>
#include <cstdint>
#include <limits>
#include <vector>

#include "texrisk/common/grid.hpp"
#include "texrisk/common/random.hpp"
#include "texrisk/imaging/view.hpp"

namespace texrisk::testing {

// Half ellipse flush with the chest wall at column 0 (left view).
inline bool in_half_ellipse(int r, int c, double cy, double semi_rows, double semi_cols) {
    const double y = (r - cy) / semi_rows;
    const double x = c / semi_cols;
    return x * x + y * y <= 1.0;
}

inline imaging::ViewImage half_ellipse_view(int rows, int cols, double semi_rows, double semi_cols,
                                            std::uint16_t tissue, double spacing_mm = 0.5,
                                            std::uint16_t background = 0) {
    imaging::ViewImage view;
    view.pixels = imaging::PixelGrid(rows, cols, background);
    view.pixel_spacing_mm = spacing_mm;
    view.laterality = imaging::Laterality::Left;
    view.format = imaging::ViewFormat::raw();
    const double cy = 0.5 * (rows - 1);
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            if (in_half_ellipse(r, c, cy, semi_rows, semi_cols)) view.pixels(r, c) = tissue;
        }
    }
    return view;
}

// Half ellipse with smooth blob texture; intensities stay well inside 16 bits.
inline imaging::ViewImage textured_view(int rows, int cols, std::uint64_t seed, double spacing_mm = 0.5) {
    imaging::ViewImage view = half_ellipse_view(rows, cols, 0.42 * rows, 0.8 * cols, 0, spacing_mm);
    Rng rng(seed);
    const double cy = 0.5 * (rows - 1);
    std::vector<std::array<double, 3>> blobs;
    for (int i = 0; i < 40; ++i) {
        blobs.push_back({uniform(rng, 0, rows), uniform(rng, 0, cols), uniform(rng, -400, 400)});
    }
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            if (!in_half_ellipse(r, c, cy, 0.42 * rows, 0.8 * cols)) continue;
            double v = 2000.0;
            for (const auto& b : blobs) {
                const double d2 = (r - b[0]) * (r - b[0]) + (c - b[1]) * (c - b[1]);
                v += b[2] * std::exp(-d2 / 18.0);
            }
            v += normal(rng, 0.0, 20.0);
            view.pixels(r, c) = static_cast<std::uint16_t>(std::clamp(v, 1.0, 60000.0));
        }
    }
    return view;
}

// Nearest-boundary distance by exhaustive search over boundary cells.
inline RealGrid brute_force_distance(const MaskGrid& mask) {
    std::vector<std::pair<int, int>> boundary;
    auto is_boundary = [&](int r, int c) {
        const int dr[4] = {-1, 1, 0, 0};
        const int dc[4] = {0, 0, -1, 1};
        for (int k = 0; k < 4; ++k) {
            const int nr = r + dr[k];
            const int nc = c + dc[k];
            if (mask.in_bounds(nr, nc) && !mask(nr, nc)) return true;
        }
        return false;
    };
    for (int r = 0; r < mask.rows(); ++r) {
        for (int c = 0; c < mask.cols(); ++c) {
            if (mask(r, c) && is_boundary(r, c)) boundary.emplace_back(r, c);
        }
    }
    if (boundary.empty()) {
        for (int r = 0; r < mask.rows(); ++r) {
            for (int c = 0; c < mask.cols(); ++c) {
                if (mask(r, c) && (r == 0 || c == 0 || r == mask.rows() - 1 || c == mask.cols() - 1)) {
                    boundary.emplace_back(r, c);
                }
            }
        }
    }
    RealGrid out(mask.rows(), mask.cols(), 0.0);
    for (int r = 0; r < mask.rows(); ++r) {
        for (int c = 0; c < mask.cols(); ++c) {
            if (!mask(r, c)) continue;
            long best = std::numeric_limits<long>::max();
            for (auto [br, bc] : boundary) {
                const long d2 = static_cast<long>(r - br) * (r - br) + static_cast<long>(c - bc) * (c - bc);
                best = std::min(best, d2);
            }
            out(r, c) = std::sqrt(static_cast<double>(best));
        }
    }
    return out;
}

// Direct 2-D normalised convolution over the mask with the truncated
// Gaussian (radius ceil(3 sigma)); independent of the separable filter.
inline RealGrid brute_force_masked_lowpass(const RealGrid& image, const MaskGrid& mask, double sigma) {
    const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
    RealGrid out(image.rows(), image.cols(), 0.0);
    for (int r = 0; r < image.rows(); ++r) {
        for (int c = 0; c < image.cols(); ++c) {
            if (!mask(r, c)) continue;
            double num = 0.0;
            double den = 0.0;
            for (int dy = -radius; dy <= radius; ++dy) {
                for (int dx = -radius; dx <= radius; ++dx) {
                    const int y = r + dy;
                    const int x = c + dx;
                    if (!image.in_bounds(y, x) || !mask(y, x)) continue;
                    const double w = std::exp(-0.5 * (dx * dx + dy * dy) / (sigma * sigma));
                    num += w * image(y, x);
                    den += w;
                }
            }
            out(r, c) = num / den;
        }
    }
    return out;
}

}  // namespace texrisk::testing
