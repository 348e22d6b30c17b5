#pragma once

// Independent forward pass and finite-difference gradient oracle for the
// flat-parameter MLP layout (per layer: weights [out][in], then biases).

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "texrisk/common/random.hpp"
#include "texrisk/scoring/mlp.hpp"

namespace texrisk::testing {

struct ForwardResult {
    double loss = 0.0;
    double min_abs_preactivation = std::numeric_limits<double>::infinity();
    double min_clamp_margin = std::numeric_limits<double>::infinity();
};

inline ForwardResult reference_loss(const std::vector<int>& sizes, const std::vector<double>& params,
                                    const std::vector<std::vector<double>>& batch, const std::vector<double>& labels) {
    ForwardResult out;
    for (std::size_t s = 0; s < batch.size(); ++s) {
        std::vector<double> a = batch[s];
        std::size_t k = 0;
        for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
            const int in = sizes[l];
            const int n_out = sizes[l + 1];
            const std::size_t w0 = k;
            const std::size_t b0 = k + static_cast<std::size_t>(in) * n_out;
            std::vector<double> z(n_out);
            for (int o = 0; o < n_out; ++o) {
                double acc = params[b0 + o];
                for (int i = 0; i < in; ++i) acc += params[w0 + static_cast<std::size_t>(o) * in + i] * a[i];
                z[o] = acc;
            }
            k = b0 + n_out;
            if (l + 2 < sizes.size()) {
                for (auto& v : z) {
                    out.min_abs_preactivation = std::min(out.min_abs_preactivation, std::abs(v));
                    v = v > 0.0 ? v : 0.0;
                }
            }
            a = z;
        }
        const double p = 1.0 / (1.0 + std::exp(-a[0]));
        out.min_clamp_margin = std::min({out.min_clamp_margin, p - scoring::kBceEpsilon, 1.0 - scoring::kBceEpsilon - p});
        const double pc = std::clamp(p, scoring::kBceEpsilon, 1.0 - scoring::kBceEpsilon);
        out.loss -= (labels[s] * std::log(pc) + (1.0 - labels[s]) * std::log(1.0 - pc)) / static_cast<double>(batch.size());
    }
    return out;
}

struct GradCheck {
    double max_relative_error = 0.0;
    int redraws = 0;
};

// Draws a random network/batch away from ReLU kinks and compares the
// analytic gradient with central differences of the reference loss.
inline GradCheck gradient_check(const std::vector<int>& sizes, std::uint64_t seed, int batch_size = 6,
                                double step = 1e-5) {
    GradCheck result;
    Rng rng(seed);
    for (;;) {
        scoring::Mlp net(sizes, rng());
        auto params = net.parameters();
        for (auto& p : params) p += normal(rng, 0.0, 0.1);
        net.set_parameters(params);
        std::vector<std::vector<double>> batch(batch_size, std::vector<double>(sizes.front()));
        std::vector<double> labels(batch_size);
        for (int s = 0; s < batch_size; ++s) {
            for (auto& v : batch[s]) v = normal(rng);
            labels[s] = s % 2;
        }
        const auto base = reference_loss(sizes, params, batch, labels);
        // a kink within the perturbation would make the difference meaningless
        if (base.min_abs_preactivation < 1e-4 || base.min_clamp_margin < 1e-4) {
            ++result.redraws;
            continue;
        }
        std::vector<double> grad;
        net.loss_and_gradient(batch, labels, grad);
        for (std::size_t i = 0; i < params.size(); ++i) {
            auto plus = params;
            auto minus = params;
            plus[i] += step;
            minus[i] -= step;
            const double fd = (reference_loss(sizes, plus, batch, labels).loss -
                               reference_loss(sizes, minus, batch, labels).loss) /
                              (2.0 * step);
            const double denom = std::max({std::abs(fd), std::abs(grad[i]), 1e-6});
            result.max_relative_error = std::max(result.max_relative_error, std::abs(fd - grad[i]) / denom);
        }
        return result;
    }
}

}  // namespace texrisk::testing
