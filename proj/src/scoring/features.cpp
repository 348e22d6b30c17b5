#include "texrisk/scoring/features.hpp"

#include <algorithm>
#include <cmath>

#include "texrisk/common/error.hpp"
#include "texrisk/imaging/distance.hpp"
#include "texrisk/imaging/filters.hpp"
#include "texrisk/imaging/mask.hpp"

namespace texrisk::scoring {

const std::vector<std::string>& feature_names() {
    static const std::vector<std::string> names{
        "mean",          "std",           "skewness",        "excess_kurtosis", "p10",
        "p50",           "p90",           "upper_spread",    "lower_spread",    "tail_asymmetry",
        "grad_mean",     "grad_std",      "grad_energy",     "laplacian_energy", "contrast_h2",
        "contrast_v2",   "contrast_h4",   "contrast_v4",     "dense_fraction",  "edge_interior_diff",
        "bandpass_fine", "bandpass_mid",  "bandpass_coarse", "entropy",         "area_fraction",
        "global_mean",   "global_std",    "anisotropy",      "interior_std",    "p25",
        "p75",           "bright_fraction"};
    return names;
}

namespace {

constexpr int kEdgeBandPx = 3;

double quantile_sorted(const std::vector<double>& v, double q) {
    const double pos = q * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

// Otsu threshold over values in [lo, hi].
double otsu(const std::vector<double>& sorted) {
    const double lo = sorted.front();
    const double hi = sorted.back();
    if (hi <= lo) return hi;
    constexpr int bins = 64;
    std::vector<double> hist(bins, 0.0);
    for (double v : sorted) hist[std::min(bins - 1, static_cast<int>((v - lo) / (hi - lo) * bins))] += 1.0;
    const double total = static_cast<double>(sorted.size());
    double sum_all = 0.0;
    for (int b = 0; b < bins; ++b) sum_all += b * hist[b];
    double w0 = 0.0;
    double sum0 = 0.0;
    double best = -1.0;
    int best_bin = 0;
    for (int b = 0; b < bins - 1; ++b) {
        w0 += hist[b];
        sum0 += b * hist[b];
        const double w1 = total - w0;
        if (w0 == 0.0 || w1 == 0.0) continue;
        const double m0 = sum0 / w0;
        const double m1 = (sum_all - sum0) / w1;
        const double between = w0 * w1 * (m0 - m1) * (m0 - m1);
        if (between > best) {
            best = between;
            best_bin = b;
        }
    }
    return lo + (best_bin + 1) * (hi - lo) / bins;
}

struct Accumulator {
    double sum = 0.0;
    double sum2 = 0.0;
    long n = 0;
    void add(double v) {
        sum += v;
        sum2 += v * v;
        ++n;
    }
    double mean() const { return n ? sum / n : 0.0; }
    double var() const { return n ? std::max(0.0, sum2 / n - mean() * mean()) : 0.0; }
};

}  // namespace

FeatureVector extract_features(const RealGrid& image, const MaskGrid& mask) {
    if (!image.same_shape(mask)) throw Error(ErrorCode::EmptyMask, "mask does not match the image");
    const int rows = image.rows();
    const int cols = image.cols();
    std::vector<double> values;
    values.reserve(image.size());
    for (std::size_t i = 0; i < image.size(); ++i) {
        if (mask.storage()[i]) values.push_back(image.storage()[i]);
    }
    if (values.empty()) throw Error(ErrorCode::EmptyMask, "no masked pixels");
    auto in = [&](int r, int c) { return r >= 0 && c >= 0 && r < rows && c < cols && mask(r, c); };

    FeatureVector f(kFeatureCount, 0.0);
    const double n = static_cast<double>(values.size());
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= n;
    double m2 = 0.0, m3 = 0.0, m4 = 0.0;
    for (double v : values) {
        const double d = v - mean;
        m2 += d * d;
        m3 += d * d * d;
        m4 += d * d * d * d;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    const double sd = std::sqrt(m2);
    f[0] = mean;
    f[1] = sd;
    f[2] = sd > 1e-12 ? m3 / (sd * sd * sd) : 0.0;
    f[3] = sd > 1e-12 ? m4 / (m2 * m2) - 3.0 : 0.0;

    std::vector<double> sorted = values;
    std::sort(sorted.begin(), sorted.end());
    const double p10 = quantile_sorted(sorted, 0.10);
    const double p25 = quantile_sorted(sorted, 0.25);
    const double p50 = quantile_sorted(sorted, 0.50);
    const double p75 = quantile_sorted(sorted, 0.75);
    const double p90 = quantile_sorted(sorted, 0.90);
    f[4] = p10;
    f[5] = p50;
    f[6] = p90;
    f[7] = p90 - p50;
    f[8] = p50 - p10;
    f[9] = (p90 - p10) > 1e-12 ? ((p90 - p50) - (p50 - p10)) / (p90 - p10) : 0.0;
    f[29] = p25;
    f[30] = p75;

    // gradients and Laplacian where the full stencil lies in the mask
    Accumulator grad, gx2, gy2, lap;
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            if (!in(r, c) || !in(r - 1, c) || !in(r + 1, c) || !in(r, c - 1) || !in(r, c + 1)) continue;
            const double gx = image(r, c + 1) - image(r, c);
            const double gy = image(r + 1, c) - image(r, c);
            grad.add(std::sqrt(gx * gx + gy * gy));
            gx2.add(gx * gx);
            gy2.add(gy * gy);
            const double l = image(r - 1, c) + image(r + 1, c) + image(r, c - 1) + image(r, c + 1) - 4.0 * image(r, c);
            lap.add(l * l);
        }
    }
    f[10] = grad.mean();
    f[11] = std::sqrt(grad.var());
    f[12] = gx2.mean() + gy2.mean();
    f[13] = lap.mean();
    f[27] = std::log((gx2.mean() + 1e-6) / (gy2.mean() + 1e-6));

    auto contrast = [&](int dr, int dc) {
        Accumulator acc;
        for (int r = 0; r < rows; ++r) {
            for (int c = 0; c < cols; ++c) {
                if (!in(r, c) || !in(r + dr, c + dc)) continue;
                const double d = image(r, c) - image(r + dr, c + dc);
                acc.add(d * d);
            }
        }
        return acc.mean();
    };
    f[14] = contrast(0, 2);
    f[15] = contrast(2, 0);
    f[16] = contrast(0, 4);
    f[17] = contrast(4, 0);

    const double threshold = otsu(sorted);
    f[18] = static_cast<double>(sorted.end() - std::upper_bound(sorted.begin(), sorted.end(), threshold)) / n;

    // peripheral band versus interior, by distance to the mask boundary
    const auto dist = imaging::compute_distance_map(imaging::make_mask(mask)).dist;
    Accumulator edge, interior;
    for (std::size_t i = 0; i < image.size(); ++i) {
        if (!mask.storage()[i]) continue;
        (dist.storage()[i] < kEdgeBandPx ? edge : interior).add(image.storage()[i]);
    }
    f[19] = (edge.n && interior.n) ? edge.mean() - interior.mean() : 0.0;
    f[28] = interior.n ? std::sqrt(interior.var()) : sd;

    // band-pass energies from differences of masked box means
    RealGrid masked(rows, cols, 0.0);
    RealGrid weight(rows, cols, 0.0);
    for (std::size_t i = 0; i < image.size(); ++i) {
        if (mask.storage()[i]) {
            masked.storage()[i] = image.storage()[i];
            weight.storage()[i] = 1.0;
        }
    }
    auto smooth = [&](int radius) {
        const auto num = imaging::box_mean(masked, radius);
        const auto den = imaging::box_mean(weight, radius);
        RealGrid out(rows, cols, 0.0);
        for (std::size_t i = 0; i < out.size(); ++i) {
            if (den.storage()[i] > 0.0) out.storage()[i] = num.storage()[i] / den.storage()[i];
        }
        return out;
    };
    const auto s1 = smooth(1);
    const auto s3 = smooth(3);
    const auto s8 = smooth(8);
    Accumulator fine, mid, coarse;
    for (std::size_t i = 0; i < image.size(); ++i) {
        if (!mask.storage()[i]) continue;
        const double a = s1.storage()[i] - s3.storage()[i];
        const double b = s3.storage()[i] - s8.storage()[i];
        const double c = image.storage()[i] - s1.storage()[i];
        fine.add(c * c);
        mid.add(a * a);
        coarse.add(b * b);
    }
    f[20] = fine.mean();
    f[21] = mid.mean();
    f[22] = coarse.mean();

    constexpr int bins = 32;
    std::vector<double> hist(bins, 0.0);
    for (double v : values) hist[std::clamp(static_cast<int>((v + 4.0) / 8.0 * bins), 0, bins - 1)] += 1.0;
    double entropy = 0.0;
    for (double h : hist) {
        if (h > 0.0) entropy -= (h / n) * std::log(h / n);
    }
    f[23] = entropy;

    f[24] = n / static_cast<double>(image.size());
    Accumulator global;
    for (double v : image.values()) global.add(v);
    f[25] = global.mean();
    f[26] = std::sqrt(global.var());

    f[31] = static_cast<double>(sorted.end() - std::upper_bound(sorted.begin(), sorted.end(), mean + sd)) / n;

    for (double v : f) {
        if (!std::isfinite(v)) throw Error(ErrorCode::DegenerateInput, "non-finite feature");
    }
    return f;
}

}  // namespace texrisk::scoring
