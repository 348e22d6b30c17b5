#include "texrisk/scoring/mlp.hpp"

#include <algorithm>
#include <cmath>

#include "texrisk/common/error.hpp"

namespace texrisk::scoring {

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double bce_loss(const std::vector<double>& predictions, const std::vector<double>& labels) {
    if (predictions.size() != labels.size()) throw Error(ErrorCode::LengthMismatch, "predictions vs labels");
    if (predictions.empty()) throw Error(ErrorCode::LengthMismatch, "empty batch");
    double sum = 0.0;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        const double p = std::clamp(predictions[i], kBceEpsilon, 1.0 - kBceEpsilon);
        sum += labels[i] * std::log(p) + (1.0 - labels[i]) * std::log(1.0 - p);
    }
    return -sum / static_cast<double>(predictions.size());
}

Mlp::Mlp(std::vector<int> layer_sizes, std::uint64_t seed) : sizes_(std::move(layer_sizes)) {
    if (sizes_.size() < 2 || sizes_.back() != 1) throw Error(ErrorCode::InvalidConfig, "MLP needs >= 2 layers ending in 1");
    for (int s : sizes_) {
        if (s < 1) throw Error(ErrorCode::InvalidConfig, "layer sizes must be positive");
    }
    Rng rng(seed);
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
        const double limit = std::sqrt(6.0 / sizes_[l]);
        std::vector<double> w(static_cast<std::size_t>(sizes_[l]) * sizes_[l + 1]);
        for (auto& v : w) v = uniform(rng, -limit, limit);
        weights_.push_back(std::move(w));
        biases_.emplace_back(sizes_[l + 1], 0.0);
    }
}

std::size_t Mlp::parameter_count() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l < weights_.size(); ++l) n += weights_[l].size() + biases_[l].size();
    return n;
}

std::vector<double> Mlp::parameters() const {
    std::vector<double> flat;
    flat.reserve(parameter_count());
    for (std::size_t l = 0; l < weights_.size(); ++l) {
        flat.insert(flat.end(), weights_[l].begin(), weights_[l].end());
        flat.insert(flat.end(), biases_[l].begin(), biases_[l].end());
    }
    return flat;
}

void Mlp::set_parameters(const std::vector<double>& flat) {
    if (flat.size() != parameter_count()) throw Error(ErrorCode::LengthMismatch, "parameter vector size");
    std::size_t k = 0;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
        for (auto& w : weights_[l]) w = flat[k++];
        for (auto& b : biases_[l]) b = flat[k++];
    }
}

double Mlp::predict(const std::vector<double>& x) const {
    if (static_cast<int>(x.size()) != sizes_.front()) throw Error(ErrorCode::LengthMismatch, "input width");
    std::vector<double> a = x;
    std::vector<double> z;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
        const int in = sizes_[l];
        const int out = sizes_[l + 1];
        z.assign(out, 0.0);
        for (int o = 0; o < out; ++o) {
            const double* w = &weights_[l][static_cast<std::size_t>(o) * in];
            double s = biases_[l][o];
            for (int i = 0; i < in; ++i) s += w[i] * a[i];
            z[o] = s;
        }
        if (l + 1 < weights_.size()) {
            for (auto& v : z) v = std::max(0.0, v);
        }
        a.swap(z);
    }
    return sigmoid(a[0]);
}

double Mlp::loss_and_gradient(const std::vector<std::vector<double>>& batch, const std::vector<double>& labels,
                              std::vector<double>& gradient, const TrainOptions& options) const {
    if (batch.size() != labels.size() || batch.empty()) throw Error(ErrorCode::LengthMismatch, "batch vs labels");
    const std::size_t layers = weights_.size();
    const bool dropout = !options.dropout.empty();
    if (dropout && (options.dropout.size() != layers - 1 || options.rng == nullptr)) {
        throw Error(ErrorCode::InvalidConfig, "dropout needs one rate per hidden layer and an rng");
    }
    gradient.assign(parameter_count(), 0.0);
    std::vector<std::size_t> offset(layers);
    for (std::size_t l = 0, k = 0; l < layers; ++l) {
        offset[l] = k;
        k += weights_[l].size() + biases_[l].size();
    }

    const double inv_b = 1.0 / static_cast<double>(batch.size());
    double loss = 0.0;
    std::vector<std::vector<double>> acts(layers + 1);  // post-activation (after dropout) per layer
    std::vector<std::vector<double>> keep(layers);      // dropout scale per hidden unit (0 or 1/(1-p))
    std::vector<std::vector<double>> pre(layers);
    for (std::size_t s = 0; s < batch.size(); ++s) {
        if (static_cast<int>(batch[s].size()) != sizes_.front()) throw Error(ErrorCode::LengthMismatch, "input width");
        acts[0] = batch[s];
        for (std::size_t l = 0; l < layers; ++l) {
            const int in = sizes_[l];
            const int out = sizes_[l + 1];
            pre[l].assign(out, 0.0);
            for (int o = 0; o < out; ++o) {
                const double* w = &weights_[l][static_cast<std::size_t>(o) * in];
                double sum = biases_[l][o];
                for (int i = 0; i < in; ++i) sum += w[i] * acts[l][i];
                pre[l][o] = sum;
            }
            acts[l + 1] = pre[l];
            if (l + 1 < layers) {
                keep[l].assign(out, 1.0);
                const double p = dropout ? options.dropout[l] : 0.0;
                for (int o = 0; o < out; ++o) {
                    if (p > 0.0) keep[l][o] = uniform01(*options.rng) < p ? 0.0 : 1.0 / (1.0 - p);
                    acts[l + 1][o] = std::max(0.0, pre[l][o]) * keep[l][o];
                }
            }
        }
        const double logit = acts[layers][0];
        const double y = labels[s];
        const double p = sigmoid(logit);
        const double pc = std::clamp(p, kBceEpsilon, 1.0 - kBceEpsilon);
        loss -= (y * std::log(pc) + (1.0 - y) * std::log(1.0 - pc)) * inv_b;

        // d loss / d logit of the clamped BCE; zero where the clamp is active
        std::vector<double> delta{(p > kBceEpsilon && p < 1.0 - kBceEpsilon) ? (p - y) * inv_b : 0.0};
        for (std::size_t l = layers; l-- > 0;) {
            const int in = sizes_[l];
            const int out = sizes_[l + 1];
            double* gw = &gradient[offset[l]];
            double* gb = gw + weights_[l].size();
            for (int o = 0; o < out; ++o) {
                if (delta[o] == 0.0) continue;
                gb[o] += delta[o];
                double* row = gw + static_cast<std::size_t>(o) * in;
                for (int i = 0; i < in; ++i) row[i] += delta[o] * acts[l][i];
            }
            if (l == 0) break;
            std::vector<double> next(in, 0.0);
            for (int o = 0; o < out; ++o) {
                if (delta[o] == 0.0) continue;
                const double* w = &weights_[l][static_cast<std::size_t>(o) * in];
                for (int i = 0; i < in; ++i) next[i] += w[i] * delta[o];
            }
            for (int i = 0; i < in; ++i) next[i] *= pre[l - 1][i] > 0.0 ? keep[l - 1][i] : 0.0;
            delta.swap(next);
        }
    }
    return loss;
}

nlohmann::json Mlp::to_json() const {
    return {{"layer_sizes", sizes_}, {"weights", weights_}, {"biases", biases_}};
}

Mlp Mlp::from_json(const nlohmann::json& j) {
    Mlp m;
    try {
        m.sizes_ = j.at("layer_sizes").get<std::vector<int>>();
        m.weights_ = j.at("weights").get<std::vector<std::vector<double>>>();
        m.biases_ = j.at("biases").get<std::vector<std::vector<double>>>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::InvalidConfig, std::string("model json: ") + e.what());
    }
    if (m.sizes_.size() < 2 || m.weights_.size() + 1 != m.sizes_.size() || m.biases_.size() != m.weights_.size()) {
        throw Error(ErrorCode::InvalidConfig, "model json: inconsistent layers");
    }
    for (std::size_t l = 0; l < m.weights_.size(); ++l) {
        if (m.weights_[l].size() != static_cast<std::size_t>(m.sizes_[l]) * m.sizes_[l + 1] ||
            m.biases_[l].size() != static_cast<std::size_t>(m.sizes_[l + 1])) {
            throw Error(ErrorCode::InvalidConfig, "model json: weight shape");
        }
    }
    return m;
}

void Adam::step(std::vector<double>& params, const std::vector<double>& grad) {
    ++t_;
    const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
        m_[i] = config_.beta1 * m_[i] + (1.0 - config_.beta1) * grad[i];
        v_[i] = config_.beta2 * v_[i] + (1.0 - config_.beta2) * grad[i] * grad[i];
        params[i] -= config_.learning_rate * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + config_.epsilon);
    }
}

}  // namespace texrisk::scoring
