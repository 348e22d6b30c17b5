#pragma once

#include <string>
#include <vector>

#include "texrisk/common/grid.hpp"

namespace texrisk::scoring {

using FeatureVector = std::vector<double>;

inline constexpr int kFeatureCount = 32;

const std::vector<std::string>& feature_names();

// Texture descriptors of one standardized canvas. Everything except the
// global mean/std and area fraction is computed over masked pixels only.
// Throws EmptyMask when the mask is empty or shapes differ.
FeatureVector extract_features(const RealGrid& image, const MaskGrid& mask);

}  // namespace texrisk::scoring
