#pragma once

#include <cstdint>
#include <vector>

#include "texrisk/imaging/view.hpp"

namespace texrisk::imaging {

inline constexpr int kDefaultStandardizationSample = 1000;

struct StandardizationStats {
    double mean = 0.0;
    double std = 1.0;
    int sample_size = 0;
};

// min(k, n) distinct indices in [0, n), ascending. Deterministic in seed.
std::vector<std::size_t> sample_view_indices(std::size_t n, std::size_t k, std::uint64_t seed);

// Pooled population mean/std over every pixel (background included).
// Throws ZeroVariance when the pooled std is 0, NoViews when empty.
StandardizationStats pooled_stats(const std::vector<const RealGrid*>& grids);

StandardizationStats compute_standardization(const std::vector<ViewImage>& views, int sample_size,
                                             std::uint64_t seed);

RealGrid standardize(const RealGrid& image, const StandardizationStats& stats);
RealGrid standardize(const ViewImage& view, const StandardizationStats& stats);

}  // namespace texrisk::imaging
