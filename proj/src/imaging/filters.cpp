#include "texrisk/imaging/filters.hpp"

#include <algorithm>
#include <cmath>

namespace texrisk::imaging {

namespace {

RealGrid convolve_rows(const RealGrid& in, const std::vector<double>& k) {
    const int radius = static_cast<int>(k.size() / 2);
    RealGrid out(in.rows(), in.cols(), 0.0);
    for (int r = 0; r < in.rows(); ++r) {
        for (int c = 0; c < in.cols(); ++c) {
            double acc = 0.0;
            const int lo = std::max(-radius, -c);
            const int hi = std::min(radius, in.cols() - 1 - c);
            for (int t = lo; t <= hi; ++t) acc += k[static_cast<std::size_t>(t + radius)] * in(r, c + t);
            out(r, c) = acc;
        }
    }
    return out;
}

RealGrid convolve_cols(const RealGrid& in, const std::vector<double>& k) {
    const int radius = static_cast<int>(k.size() / 2);
    RealGrid out(in.rows(), in.cols(), 0.0);
    for (int r = 0; r < in.rows(); ++r) {
        const int lo = std::max(-radius, -r);
        const int hi = std::min(radius, in.rows() - 1 - r);
        for (int t = lo; t <= hi; ++t) {
            const double w = k[static_cast<std::size_t>(t + radius)];
            for (int c = 0; c < in.cols(); ++c) out(r, c) += w * in(r + t, c);
        }
    }
    return out;
}

}  // namespace

std::vector<double> gaussian_kernel(double sigma) {
    const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
    std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        const double w = std::exp(-0.5 * (i * i) / (sigma * sigma));
        k[static_cast<std::size_t>(i + radius)] = w;
        sum += w;
    }
    for (auto& w : k) w /= sum;
    return k;
}

RealGrid gaussian_blur(const RealGrid& image, double sigma) {
    const auto k = gaussian_kernel(sigma);
    return convolve_cols(convolve_rows(image, k), k);
}

RealGrid masked_gaussian_blur(const RealGrid& image, const MaskGrid& mask, double sigma) {
    RealGrid weighted(image.rows(), image.cols(), 0.0);
    RealGrid support(image.rows(), image.cols(), 0.0);
    for (int r = 0; r < image.rows(); ++r) {
        for (int c = 0; c < image.cols(); ++c) {
            if (mask(r, c)) {
                weighted(r, c) = image(r, c);
                support(r, c) = 1.0;
            }
        }
    }
    const auto k = gaussian_kernel(sigma);
    const RealGrid num = convolve_cols(convolve_rows(weighted, k), k);
    const RealGrid den = convolve_cols(convolve_rows(support, k), k);
    RealGrid out(image.rows(), image.cols(), 0.0);
    for (int r = 0; r < image.rows(); ++r) {
        for (int c = 0; c < image.cols(); ++c) {
            if (mask(r, c) && den(r, c) > 0.0) out(r, c) = num(r, c) / den(r, c);
        }
    }
    return out;
}

RealGrid box_mean(const RealGrid& image, int radius) {
    const int rows = image.rows();
    const int cols = image.cols();
    Grid<double> integral(rows + 1, cols + 1, 0.0);
    for (int r = 0; r < rows; ++r) {
        double row_sum = 0.0;
        for (int c = 0; c < cols; ++c) {
            row_sum += image(r, c);
            integral(r + 1, c + 1) = integral(r, c + 1) + row_sum;
        }
    }
    RealGrid out(rows, cols, 0.0);
    for (int r = 0; r < rows; ++r) {
        const int r0 = std::max(0, r - radius);
        const int r1 = std::min(rows - 1, r + radius);
        for (int c = 0; c < cols; ++c) {
            const int c0 = std::max(0, c - radius);
            const int c1 = std::min(cols - 1, c + radius);
            const double sum = integral(r1 + 1, c1 + 1) - integral(r0, c1 + 1) - integral(r1 + 1, c0) + integral(r0, c0);
            out(r, c) = sum / static_cast<double>((r1 - r0 + 1) * (c1 - c0 + 1));
        }
    }
    return out;
}

}  // namespace texrisk::imaging
