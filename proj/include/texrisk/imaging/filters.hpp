#pragma once

#include <vector>

#include "texrisk/common/grid.hpp"

namespace texrisk::imaging {

// Normalised Gaussian taps over [-radius, radius], radius = ceil(3 sigma).
std::vector<double> gaussian_kernel(double sigma);

// Separable Gaussian blur restricted to the mask (normalised convolution:
// blur(I*M) / blur(M)). Pixels outside the mask are 0 in the result.
RealGrid masked_gaussian_blur(const RealGrid& image, const MaskGrid& mask, double sigma);

// Plain separable Gaussian blur with zero padding.
RealGrid gaussian_blur(const RealGrid& image, double sigma);

// Mean over a (2r+1)^2 window clipped to the image, via an integral image.
RealGrid box_mean(const RealGrid& image, int radius);

}  // namespace texrisk::imaging
