#pragma once

#include <cstdint>
#include <string>

#include "texrisk/common/grid.hpp"

namespace texrisk::imaging {

inline constexpr int kProcessedMax = 4095;

enum class Laterality { Left, Right };
enum class ViewPosition { CC, MLO };

struct ViewFormat {
    enum class Kind { Raw, Flavor, VendorProcessed };
    Kind kind = Kind::Raw;
    std::string profile_id;  // only for Flavor

    static ViewFormat raw() { return {}; }
    static ViewFormat flavor(std::string id) { return {Kind::Flavor, std::move(id)}; }
    static ViewFormat processed() { return {Kind::VendorProcessed, {}}; }

    bool is_raw() const noexcept { return kind == Kind::Raw; }
    bool operator==(const ViewFormat&) const = default;
};

// "raw", "processed", "flavor:<id>"
std::string to_string(const ViewFormat& format);
ViewFormat parse_view_format(const std::string& tag);

std::string to_string(Laterality laterality);
Laterality parse_laterality(const std::string& text);
std::string to_string(ViewPosition position);
ViewPosition parse_view_position(const std::string& text);

using PixelGrid = Grid<std::uint16_t>;

struct ViewImage {
    PixelGrid pixels;
    double pixel_spacing_mm = 0.1;
    Laterality laterality = Laterality::Left;
    ViewPosition view_position = ViewPosition::CC;
    ViewFormat format;
    int i_max = 65535;
    // Set by resample_and_pad when the view had to be shrunk to fit the canvas.
    bool fit_downscaled = false;

    int width_px() const noexcept { return pixels.cols(); }
    int height_px() const noexcept { return pixels.rows(); }
};

// Throws ParameterOutOfRange when spacing is non-positive or a pixel exceeds i_max.
void validate_view(const ViewImage& view);

// Mirror across the vertical axis. Involution.
template <typename T>
Grid<T> flip_horizontal(const Grid<T>& grid) {
    Grid<T> out(grid.rows(), grid.cols());
    for (int r = 0; r < grid.rows(); ++r) {
        for (int c = 0; c < grid.cols(); ++c) out(r, grid.cols() - 1 - c) = grid(r, c);
    }
    return out;
}

ViewImage flip_horizontal(const ViewImage& view);

}  // namespace texrisk::imaging
