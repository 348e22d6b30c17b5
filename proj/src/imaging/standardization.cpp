#include "texrisk/imaging/standardization.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "texrisk/common/error.hpp"
#include "texrisk/common/random.hpp"
#include "texrisk/imaging/geometry.hpp"

namespace texrisk::imaging {

std::vector<std::size_t> sample_view_indices(std::size_t n, std::size_t k, std::uint64_t seed) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    if (k >= n) return idx;
    Rng rng(seed);
    // partial Fisher-Yates
    for (std::size_t i = 0; i < k; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, n - 1);
        std::swap(idx[i], idx[pick(rng)]);
    }
    idx.resize(k);
    std::sort(idx.begin(), idx.end());
    return idx;
}

StandardizationStats pooled_stats(const std::vector<const RealGrid*>& grids) {
    if (grids.empty()) throw Error(ErrorCode::NoViews, "standardization sample is empty");
    long double sum = 0.0L;
    std::size_t count = 0;
    for (const auto* g : grids) {
        for (double v : g->values()) sum += v;
        count += g->size();
    }
    if (count == 0) throw Error(ErrorCode::NoViews, "standardization sample has no pixels");
    const long double mean = sum / static_cast<long double>(count);
    long double ss = 0.0L;
    for (const auto* g : grids) {
        for (double v : g->values()) {
            const long double d = v - mean;
            ss += d * d;
        }
    }
    const double sd = static_cast<double>(std::sqrt(ss / static_cast<long double>(count)));
    if (!(sd > 0.0)) throw Error(ErrorCode::ZeroVariance, "sampled views have zero variance");
    return {static_cast<double>(mean), sd, static_cast<int>(grids.size())};
}

StandardizationStats compute_standardization(const std::vector<ViewImage>& views, int sample_size,
                                             std::uint64_t seed) {
    if (views.empty()) throw Error(ErrorCode::NoViews, "standardization sample is empty");
    const auto picked = sample_view_indices(views.size(), static_cast<std::size_t>(std::max(1, sample_size)), seed);
    std::vector<RealGrid> grids;
    grids.reserve(picked.size());
    for (auto i : picked) grids.push_back(to_real(views[i].pixels));
    std::vector<const RealGrid*> ptrs;
    for (const auto& g : grids) ptrs.push_back(&g);
    return pooled_stats(ptrs);
}

RealGrid standardize(const RealGrid& image, const StandardizationStats& stats) {
    RealGrid out(image.rows(), image.cols(), 0.0);
    for (std::size_t i = 0; i < image.size(); ++i) out.storage()[i] = (image.storage()[i] - stats.mean) / stats.std;
    return out;
}

RealGrid standardize(const ViewImage& view, const StandardizationStats& stats) {
    return standardize(to_real(view.pixels), stats);
}

}  // namespace texrisk::imaging
