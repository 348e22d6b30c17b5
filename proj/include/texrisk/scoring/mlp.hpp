#pragma once

#include <cstdint>
#include <vector>

#include "json.hpp"
#include "texrisk/common/random.hpp"

namespace texrisk::scoring {

inline constexpr double kBceEpsilon = 1e-7;

// Mean binary cross entropy with predictions clamped to [eps, 1 - eps].
double bce_loss(const std::vector<double>& predictions, const std::vector<double>& labels);

double sigmoid(double x);

// Dropout rate applied after each hidden layer (size = hidden layers);
// empty means no dropout. Inverted scaling keeps inference unscaled.
struct MlpTrainOptions {
    std::vector<double> dropout;
    Rng* rng = nullptr;
};

// Fully connected network: ReLU hidden layers, one sigmoid output.
// Weights are row-major [out][in] per layer.
class Mlp {
public:
    Mlp() = default;
    // He-uniform weights, zero biases.
    Mlp(std::vector<int> layer_sizes, std::uint64_t seed);

    const std::vector<int>& layer_sizes() const { return sizes_; }
    int input_size() const { return sizes_.front(); }
    std::size_t parameter_count() const;

    // Flat parameter view: for each layer, weights then biases.
    std::vector<double> parameters() const;
    void set_parameters(const std::vector<double>& flat);

    double predict(const std::vector<double>& x) const;

    using TrainOptions = MlpTrainOptions;

    // Mean BCE over the batch and its gradient w.r.t. the flat parameters.
    double loss_and_gradient(const std::vector<std::vector<double>>& batch, const std::vector<double>& labels,
                             std::vector<double>& gradient, const TrainOptions& options = {}) const;

    nlohmann::json to_json() const;
    static Mlp from_json(const nlohmann::json& j);

private:
    std::vector<int> sizes_;
    std::vector<std::vector<double>> weights_;
    std::vector<std::vector<double>> biases_;
};

struct AdamConfig {
    double learning_rate = 1e-5;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

class Adam {
public:
    Adam(std::size_t n, AdamConfig config) : config_(config), m_(n, 0.0), v_(n, 0.0) {}
    void step(std::vector<double>& params, const std::vector<double>& grad);

private:
    AdamConfig config_;
    std::vector<double> m_;
    std::vector<double> v_;
    long t_ = 0;
};

}  // namespace texrisk::scoring
