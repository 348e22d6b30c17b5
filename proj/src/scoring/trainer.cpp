#include "texrisk/scoring/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "texrisk/common/error.hpp"
#include "texrisk/evaluation/metrics.hpp"

namespace texrisk::scoring {

using nlohmann::json;

void validate_config(const ScorerConfig& c) {
    if (c.batch_size < 1) throw Error(ErrorCode::InvalidConfig, "batch_size must be >= 1");
    if (!(c.learning_rate > 0.0)) throw Error(ErrorCode::InvalidConfig, "learning_rate must be > 0");
    if (c.max_epochs < 1) throw Error(ErrorCode::InvalidConfig, "max_epochs must be >= 1");
    if (c.epoch_fraction < 0.0 || c.epoch_fraction > 1.0) throw Error(ErrorCode::InvalidConfig, "epoch_fraction in [0,1]");
    if (c.hidden_width < 1) throw Error(ErrorCode::InvalidConfig, "hidden_width must be >= 1");
    if (c.dropout_rates.size() != 2) throw Error(ErrorCode::InvalidConfig, "dropout_rates needs two entries");
    for (double p : c.dropout_rates) {
        if (p < 0.0 || p >= 1.0) throw Error(ErrorCode::InvalidConfig, "dropout rate in [0,1)");
    }
}

json to_json(const ScorerConfig& c) {
    return {{"batch_size", c.batch_size},
            {"learning_rate", c.learning_rate},
            {"max_epochs", c.max_epochs},
            {"epoch_fraction", c.epoch_fraction},
            {"adam", {{"beta1", c.adam.beta1}, {"beta2", c.adam.beta2}, {"epsilon", c.adam.epsilon}}},
            {"dropout_rates", c.dropout_rates},
            {"hidden_width", c.hidden_width},
            {"seed", c.seed},
            {"early_stopping", c.early_stopping}};
}

ScorerConfig scorer_config_from_json(const json& j, ScorerConfig c) {
    try {
        c.batch_size = j.value("batch_size", c.batch_size);
        c.learning_rate = j.value("learning_rate", c.learning_rate);
        c.max_epochs = j.value("max_epochs", c.max_epochs);
        c.epoch_fraction = j.value("epoch_fraction", c.epoch_fraction);
        if (j.contains("adam")) {
            c.adam.beta1 = j["adam"].value("beta1", c.adam.beta1);
            c.adam.beta2 = j["adam"].value("beta2", c.adam.beta2);
            c.adam.epsilon = j["adam"].value("epsilon", c.adam.epsilon);
        }
        c.adam.learning_rate = c.learning_rate;
        c.dropout_rates = j.value("dropout_rates", c.dropout_rates);
        c.hidden_width = j.value("hidden_width", c.hidden_width);
        c.seed = j.value("seed", c.seed);
        c.early_stopping = j.value("early_stopping", c.early_stopping);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::InvalidConfig, std::string("scorer config: ") + e.what());
    }
    validate_config(c);
    return c;
}

FeatureNormalizer FeatureNormalizer::fit(const std::vector<const FeatureVector*>& samples) {
    if (samples.empty()) throw Error(ErrorCode::NoViews, "no training features");
    const std::size_t k = samples.front()->size();
    FeatureNormalizer n;
    n.mean.assign(k, 0.0);
    n.scale.assign(k, 0.0);
    for (const auto* s : samples) {
        for (std::size_t i = 0; i < k; ++i) n.mean[i] += (*s)[i];
    }
    for (auto& m : n.mean) m /= static_cast<double>(samples.size());
    for (const auto* s : samples) {
        for (std::size_t i = 0; i < k; ++i) n.scale[i] += ((*s)[i] - n.mean[i]) * ((*s)[i] - n.mean[i]);
    }
    for (auto& v : n.scale) {
        v = std::sqrt(v / static_cast<double>(samples.size()));
        if (v < 1e-12) v = 1.0;
    }
    return n;
}

FeatureVector FeatureNormalizer::apply(const FeatureVector& f) const {
    if (f.size() != mean.size()) throw Error(ErrorCode::LengthMismatch, "feature width");
    FeatureVector out(f.size());
    for (std::size_t i = 0; i < f.size(); ++i) out[i] = (f[i] - mean[i]) / scale[i];
    return out;
}

std::vector<EpochSample> draw_epoch(const std::vector<BankEntry>& bank, double epoch_fraction, Rng& rng) {
    if (bank.empty()) return {};
    const std::size_t formats = bank.front().variants.size();
    const double fraction = epoch_fraction > 0.0 ? epoch_fraction : 1.0 / static_cast<double>(formats);
    const auto total = static_cast<std::size_t>(
        std::max(1.0, std::round(fraction * static_cast<double>(bank.size() * formats))));
    std::vector<EpochSample> out;
    out.reserve(total);
    std::vector<std::size_t> perm(bank.size());
    while (out.size() < total) {
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);
        for (std::size_t i = 0; i < perm.size() && out.size() < total; ++i) {
            const auto& entry = bank[perm[i]];
            std::uniform_int_distribution<std::size_t> pick_format(0, entry.variants.size() - 1);
            const std::size_t f = pick_format(rng);
            std::uniform_int_distribution<std::size_t> pick_aug(0, entry.variants[f].size() - 1);
            out.push_back({perm[i], f, pick_aug(rng)});
        }
    }
    return out;
}

double TrainedInstance::study_score(const std::vector<FeatureVector>& views) const {
    if (views.empty()) throw Error(ErrorCode::NoViews, "study without views");
    double sum = 0.0;
    for (const auto& v : views) sum += predict(v);
    return sum / static_cast<double>(views.size());
}

namespace {

double auc_or_nan(const evaluation::LabeledScores& scores, evaluation::Positivity p) {
    try {
        return evaluation::compute_auc(scores, p).auc;
    } catch (const Error&) {
        return std::numeric_limits<double>::quiet_NaN();
    }
}

json nan_safe(const std::vector<double>& v) {
    json out = json::array();
    for (double x : v) out.push_back(std::isfinite(x) ? json(x) : json(nullptr));
    return out;
}

std::vector<double> nan_read(const json& j) {
    std::vector<double> out;
    for (const auto& x : j) out.push_back(x.is_null() ? std::numeric_limits<double>::quiet_NaN() : x.get<double>());
    return out;
}

}  // namespace

TrainedInstance train_fold_scorer(const FoldData& data, const ScorerConfig& config) {
    validate_config(config);
    if (data.training.empty()) throw Error(ErrorCode::NoViews, "empty training bank");
    const std::size_t formats = data.training.front().variants.size();
    std::vector<const FeatureVector*> all;
    for (const auto& e : data.training) {
        if (e.variants.size() != formats || formats == 0) throw Error(ErrorCode::LengthMismatch, "bank formats differ");
        for (const auto& per_format : e.variants) {
            if (per_format.empty()) throw Error(ErrorCode::LengthMismatch, "bank entry without augmentations");
            for (const auto& f : per_format) all.push_back(&f);
        }
    }
    bool has_positive = false;
    for (const auto& s : data.validation) has_positive |= is_cancer(s.group);
    if (!has_positive) throw Error(ErrorCode::NoValidationPositives, "validation set has no cancers");

    TrainedInstance out;
    out.config = config;
    out.normalizer = FeatureNormalizer::fit(all);
    const int width = static_cast<int>(all.front()->size());
    out.model = Mlp({width, config.hidden_width, config.hidden_width, 1}, mix_seed(config.seed, 11));

    // normalized validation features are fixed across epochs
    std::vector<std::vector<FeatureVector>> validation(data.validation.size());
    for (std::size_t s = 0; s < data.validation.size(); ++s) {
        if (data.validation[s].views.empty()) throw Error(ErrorCode::NoViews, data.validation[s].woman_id);
        for (const auto& v : data.validation[s].views) validation[s].push_back(out.normalizer.apply(v));
    }
    evaluation::LabeledScores scores(data.validation.size());
    for (std::size_t s = 0; s < scores.size(); ++s) {
        scores[s].woman_id = data.validation[s].woman_id;
        scores[s].group = data.validation[s].group;
    }

    AdamConfig adam = config.adam;
    adam.learning_rate = config.learning_rate;
    auto params = out.model.parameters();
    Adam optimizer(params.size(), adam);
    Rng rng(mix_seed(config.seed, 12));
    Mlp::TrainOptions options{config.dropout_rates, &rng};
    if (std::all_of(config.dropout_rates.begin(), config.dropout_rates.end(), [](double p) { return p == 0.0; })) {
        options.dropout.clear();
    }

    std::vector<double> best_params = params;
    out.best_auc = -1.0;
    std::vector<std::vector<double>> batch;
    std::vector<double> labels;
    std::vector<double> grad;
    Mlp work = out.model;
    for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
        const auto order = draw_epoch(data.training, config.epoch_fraction, rng);
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            batch.clear();
            labels.clear();
            const std::size_t stop = std::min(order.size(), start + config.batch_size);
            for (std::size_t i = start; i < stop; ++i) {
                const auto& s = order[i];
                const auto& entry = data.training[s.entry];
                batch.push_back(out.normalizer.apply(entry.variants[s.format][s.augmentation]));
                labels.push_back(entry.label);
            }
            work.set_parameters(params);
            work.loss_and_gradient(batch, labels, grad, options);
            optimizer.step(params, grad);
        }
        work.set_parameters(params);
        for (std::size_t s = 0; s < validation.size(); ++s) {
            double sum = 0.0;
            for (const auto& v : validation[s]) sum += work.predict(v);
            scores[s].score = sum / static_cast<double>(validation[s].size());
        }
        const double auc = evaluation::compute_auc(scores, evaluation::Positivity::AllCancers).auc;
        out.epochs.push_back(epoch);
        out.auc_all.push_back(auc);
        out.auc_ic.push_back(auc_or_nan(scores, evaluation::Positivity::IC));
        out.auc_ltc.push_back(auc_or_nan(scores, evaluation::Positivity::LTC));
        if (!config.early_stopping || auc > out.best_auc) {
            out.best_auc = auc;
            out.best_epoch = epoch;
            best_params = params;
        }
    }
    out.model.set_parameters(best_params);
    return out;
}

json to_json(const TrainedInstance& t) {
    return {{"model", t.model.to_json()},
            {"normalizer", {{"mean", t.normalizer.mean}, {"scale", t.normalizer.scale}}},
            {"config", to_json(t.config)},
            {"training_seed", t.config.seed},
            {"best_epoch", t.best_epoch},
            {"best_auc", t.best_auc},
            {"trace", {{"epochs", t.epochs}, {"auc_all", nan_safe(t.auc_all)}, {"auc_ic", nan_safe(t.auc_ic)},
                       {"auc_ltc", nan_safe(t.auc_ltc)}}}};
}

TrainedInstance instance_from_json(const json& j) {
    TrainedInstance t;
    try {
        t.model = Mlp::from_json(j.at("model"));
        t.normalizer.mean = j.at("normalizer").at("mean").get<std::vector<double>>();
        t.normalizer.scale = j.at("normalizer").at("scale").get<std::vector<double>>();
        t.config = scorer_config_from_json(j.at("config"));
        t.best_epoch = j.value("best_epoch", 0);
        t.best_auc = j.value("best_auc", 0.0);
        if (j.contains("trace")) {
            t.epochs = j["trace"].at("epochs").get<std::vector<int>>();
            t.auc_all = nan_read(j["trace"].at("auc_all"));
            t.auc_ic = nan_read(j["trace"].at("auc_ic"));
            t.auc_ltc = nan_read(j["trace"].at("auc_ltc"));
        }
    } catch (const json::exception& e) {
        throw Error(ErrorCode::InvalidConfig, std::string("instance json: ") + e.what());
    }
    if (t.normalizer.mean.size() != static_cast<std::size_t>(t.model.input_size()) ||
        t.normalizer.scale.size() != t.normalizer.mean.size()) {
        throw Error(ErrorCode::InvalidConfig, "instance json: normalizer width");
    }
    return t;
}

}  // namespace texrisk::scoring
