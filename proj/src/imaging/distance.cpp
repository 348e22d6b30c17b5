#include "texrisk/imaging/distance.hpp"

#include <cmath>
#include <limits>
#include <vector>

#include "texrisk/common/error.hpp"

namespace texrisk::imaging {

namespace {

constexpr double kFar = 1e20;

// 1-D squared distance transform of f (Felzenszwalb & Huttenlocher).
void transform_1d(const std::vector<double>& f, std::vector<double>& d, std::vector<int>& v, std::vector<double>& z) {
    const int n = static_cast<int>(f.size());
    auto parabola_cut = [&f](int q, int p) {
        return ((f[static_cast<std::size_t>(q)] + static_cast<double>(q) * q) -
                (f[static_cast<std::size_t>(p)] + static_cast<double>(p) * p)) /
               (2.0 * q - 2.0 * p);
    };
    std::size_t k = 0;
    v[0] = 0;
    z[0] = -std::numeric_limits<double>::infinity();
    z[1] = std::numeric_limits<double>::infinity();
    for (int q = 1; q < n; ++q) {
        double s = parabola_cut(q, v[k]);
        while (s <= z[k]) {
            --k;
            s = parabola_cut(q, v[k]);
        }
        ++k;
        v[k] = q;
        z[k] = s;
        z[k + 1] = std::numeric_limits<double>::infinity();
    }
    k = 0;
    for (int q = 0; q < n; ++q) {
        while (z[k + 1] < q) ++k;
        const int p = v[k];
        const double dq = static_cast<double>(q - p);
        d[static_cast<std::size_t>(q)] = dq * dq + f[static_cast<std::size_t>(p)];
    }
}

}  // namespace

MaskGrid boundary_cells(const MaskGrid& mask) {
    MaskGrid boundary(mask.rows(), mask.cols(), 0);
    bool any = false;
    constexpr int dr[4] = {-1, 1, 0, 0};
    constexpr int dc[4] = {0, 0, -1, 1};
    for (int r = 0; r < mask.rows(); ++r) {
        for (int c = 0; c < mask.cols(); ++c) {
            if (!mask(r, c)) continue;
            for (int k = 0; k < 4; ++k) {
                const int nr = r + dr[k];
                const int nc = c + dc[k];
                if (mask.in_bounds(nr, nc) && !mask(nr, nc)) {
                    boundary(r, c) = 1;
                    any = true;
                    break;
                }
            }
        }
    }
    if (!any) {
        for (int r = 0; r < mask.rows(); ++r) {
            for (int c = 0; c < mask.cols(); ++c) {
                const bool edge = r == 0 || c == 0 || r == mask.rows() - 1 || c == mask.cols() - 1;
                if (mask(r, c) && edge) boundary(r, c) = 1;
            }
        }
    }
    return boundary;
}

DistanceMap compute_distance_map(const BreastMask& mask) {
    if (mask.breast_area_px <= 0) throw Error(ErrorCode::EmptyMask, "distance map of an empty mask");
    const MaskGrid sites = boundary_cells(mask.mask);
    const int rows = sites.rows();
    const int cols = sites.cols();

    RealGrid sq(rows, cols, kFar);
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            if (sites(r, c)) sq(r, c) = 0.0;
        }
    }

    const int n = std::max(rows, cols);
    std::vector<double> f(static_cast<std::size_t>(n));
    std::vector<double> d(static_cast<std::size_t>(n));
    std::vector<int> v(static_cast<std::size_t>(n));
    std::vector<double> z(static_cast<std::size_t>(n) + 1);

    for (int c = 0; c < cols; ++c) {
        f.resize(static_cast<std::size_t>(rows));
        d.resize(static_cast<std::size_t>(rows));
        for (int r = 0; r < rows; ++r) f[static_cast<std::size_t>(r)] = sq(r, c);
        transform_1d(f, d, v, z);
        for (int r = 0; r < rows; ++r) sq(r, c) = d[static_cast<std::size_t>(r)];
    }
    for (int r = 0; r < rows; ++r) {
        f.resize(static_cast<std::size_t>(cols));
        d.resize(static_cast<std::size_t>(cols));
        for (int c = 0; c < cols; ++c) f[static_cast<std::size_t>(c)] = sq(r, c);
        transform_1d(f, d, v, z);
        for (int c = 0; c < cols; ++c) sq(r, c) = d[static_cast<std::size_t>(c)];
    }

    DistanceMap out{RealGrid(rows, cols, 0.0)};
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            if (mask.mask(r, c)) out.dist(r, c) = std::sqrt(sq(r, c));
        }
    }
    return out;
}

}  // namespace texrisk::imaging
