#include "texrisk/imaging/mask.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <vector>

#include "texrisk/common/error.hpp"

namespace texrisk::imaging {

namespace {

int otsu_threshold(const PixelGrid& pixels, int bins) {
    int max_value = 0;
    for (auto v : pixels.values()) max_value = std::max<int>(max_value, v);
    if (max_value == 0) return 0;

    const double bin_width = (static_cast<double>(max_value) + 1.0) / bins;
    std::vector<double> hist(static_cast<std::size_t>(bins), 0.0);
    for (auto v : pixels.values()) {
        int b = static_cast<int>(v / bin_width);
        hist[static_cast<std::size_t>(std::min(b, bins - 1))] += 1.0;
    }

    const double total = static_cast<double>(pixels.size());
    double sum_all = 0.0;
    for (int b = 0; b < bins; ++b) sum_all += b * hist[static_cast<std::size_t>(b)];

    double weight_bg = 0.0;
    double sum_bg = 0.0;
    double best = -1.0;
    int best_bin = 0;
    for (int b = 0; b < bins - 1; ++b) {
        weight_bg += hist[static_cast<std::size_t>(b)];
        sum_bg += b * hist[static_cast<std::size_t>(b)];
        const double weight_fg = total - weight_bg;
        if (weight_bg == 0.0 || weight_fg == 0.0) continue;
        const double mean_bg = sum_bg / weight_bg;
        const double mean_fg = (sum_all - sum_bg) / weight_fg;
        const double between = weight_bg * weight_fg * (mean_bg - mean_fg) * (mean_bg - mean_fg);
        if (between > best) {
            best = between;
            best_bin = b;
        }
    }
    if (best < 0.0) {
        // Single occupied bin: everything non-zero is foreground.
        return 0;
    }
    return static_cast<int>(std::ceil((best_bin + 1) * bin_width)) - 1;
}

std::vector<std::pair<int, int>> disc_offsets(int radius) {
    std::vector<std::pair<int, int>> offsets;
    for (int dy = -radius; dy <= radius; ++dy) {
        for (int dx = -radius; dx <= radius; ++dx) {
            if (dx * dx + dy * dy <= radius * radius) offsets.emplace_back(dy, dx);
        }
    }
    return offsets;
}

MaskGrid dilate(const MaskGrid& in, const std::vector<std::pair<int, int>>& disc) {
    MaskGrid out(in.rows(), in.cols(), 0);
    for (int r = 0; r < in.rows(); ++r) {
        for (int c = 0; c < in.cols(); ++c) {
            if (!in(r, c)) continue;
            for (auto [dy, dx] : disc) {
                if (in.in_bounds(r + dy, c + dx)) out(r + dy, c + dx) = 1;
            }
        }
    }
    return out;
}

// Out-of-image cells count as foreground so closing never eats the frame edge.
MaskGrid erode(const MaskGrid& in, const std::vector<std::pair<int, int>>& disc) {
    MaskGrid out(in.rows(), in.cols(), 0);
    for (int r = 0; r < in.rows(); ++r) {
        for (int c = 0; c < in.cols(); ++c) {
            bool keep = true;
            for (auto [dy, dx] : disc) {
                if (in.in_bounds(r + dy, c + dx) && !in(r + dy, c + dx)) {
                    keep = false;
                    break;
                }
            }
            out(r, c) = keep ? 1 : 0;
        }
    }
    return out;
}

MaskGrid largest_component(const MaskGrid& in, int& area) {
    Grid<int> label(in.rows(), in.cols(), 0);
    int best_label = 0;
    int best_area = 0;
    int next_label = 0;
    std::queue<std::pair<int, int>> queue;
    for (int r = 0; r < in.rows(); ++r) {
        for (int c = 0; c < in.cols(); ++c) {
            if (!in(r, c) || label(r, c)) continue;
            ++next_label;
            int count = 0;
            label(r, c) = next_label;
            queue.emplace(r, c);
            while (!queue.empty()) {
                auto [y, x] = queue.front();
                queue.pop();
                ++count;
                for (int dy = -1; dy <= 1; ++dy) {
                    for (int dx = -1; dx <= 1; ++dx) {
                        const int ny = y + dy;
                        const int nx = x + dx;
                        if (in.in_bounds(ny, nx) && in(ny, nx) && !label(ny, nx)) {
                            label(ny, nx) = next_label;
                            queue.emplace(ny, nx);
                        }
                    }
                }
            }
            if (count > best_area) {
                best_area = count;
                best_label = next_label;
            }
        }
    }
    MaskGrid out(in.rows(), in.cols(), 0);
    for (int r = 0; r < in.rows(); ++r) {
        for (int c = 0; c < in.cols(); ++c) out(r, c) = (best_label != 0 && label(r, c) == best_label) ? 1 : 0;
    }
    area = best_area;
    return out;
}

void apply_guard(MaskGrid& mask, int guard, int chest_col) {
    if (guard <= 0) return;
    const int rows = mask.rows();
    const int cols = mask.cols();
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            const bool top_bottom = r < guard || r >= rows - guard;
            const bool far_side = chest_col == 0 ? c >= cols - guard : c < guard;
            if (top_bottom || far_side) mask(r, c) = 0;
        }
    }
}

}  // namespace

int chest_wall_column(Laterality laterality, int cols) { return laterality == Laterality::Left ? 0 : cols - 1; }

BreastMask make_mask(MaskGrid grid) {
    BreastMask out;
    out.breast_area_px = 0;
    for (auto v : grid.values()) out.breast_area_px += v ? 1 : 0;
    out.mask = std::move(grid);
    return out;
}

BreastMask compute_breast_mask(const ViewImage& view, const MaskOptions& options) {
    if (!view.format.is_raw()) {
        throw Error(ErrorCode::ParameterOutOfRange, "compute_breast_mask expects a raw view");
    }
    const auto& px = view.pixels;
    const int threshold = otsu_threshold(px, options.histogram_bins);

    MaskGrid fg(px.rows(), px.cols(), 0);
    for (int r = 0; r < px.rows(); ++r) {
        for (int c = 0; c < px.cols(); ++c) fg(r, c) = px(r, c) > threshold ? 1 : 0;
    }
    const int chest_col = chest_wall_column(view.laterality, px.cols());
    apply_guard(fg, options.border_guard_px, chest_col);

    if (options.closing_radius_px > 0) {
        const auto disc = disc_offsets(options.closing_radius_px);
        fg = erode(dilate(fg, disc), disc);
        apply_guard(fg, options.border_guard_px, chest_col);
    }

    int area = 0;
    MaskGrid largest = largest_component(fg, area);
    const double min_area = options.min_area_fraction * static_cast<double>(px.size());
    if (area == 0 || static_cast<double>(area) <= min_area) {
        throw Error(ErrorCode::EmptyMask, "no foreground component exceeds the minimum area");
    }
    BreastMask out;
    out.mask = std::move(largest);
    out.breast_area_px = area;
    return out;
}

BreastMask mask_from_nonzero(const PixelGrid& pixels) {
    MaskGrid grid(pixels.rows(), pixels.cols(), 0);
    for (int r = 0; r < pixels.rows(); ++r) {
        for (int c = 0; c < pixels.cols(); ++c) grid(r, c) = pixels(r, c) > 0 ? 1 : 0;
    }
    return make_mask(std::move(grid));
}

}  // namespace texrisk::imaging
