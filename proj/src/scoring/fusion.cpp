#include "texrisk/scoring/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "texrisk/common/error.hpp"
#include "texrisk/evaluation/metrics.hpp"

namespace texrisk::scoring {

using nlohmann::json;

json to_json(const FusionConfig& c) {
    return {{"hidden1", c.hidden1},       {"hidden2", c.hidden2},       {"batch_size", c.batch_size},
            {"learning_rate", c.learning_rate}, {"max_epochs", c.max_epochs}, {"patience", c.patience},
            {"holdout_fraction", c.holdout_fraction}, {"seed", c.seed}};
}

FusionConfig fusion_config_from_json(const json& j, FusionConfig c) {
    try {
        c.hidden1 = j.value("hidden1", c.hidden1);
        c.hidden2 = j.value("hidden2", c.hidden2);
        c.batch_size = j.value("batch_size", c.batch_size);
        c.learning_rate = j.value("learning_rate", c.learning_rate);
        c.max_epochs = j.value("max_epochs", c.max_epochs);
        c.patience = j.value("patience", c.patience);
        c.holdout_fraction = j.value("holdout_fraction", c.holdout_fraction);
        c.seed = j.value("seed", c.seed);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::InvalidConfig, std::string("fusion config: ") + e.what());
    }
    if (c.hidden1 < 1 || c.hidden2 < 1 || c.batch_size < 1 || c.max_epochs < 1 || !(c.learning_rate > 0.0) ||
        c.holdout_fraction <= 0.0 || c.holdout_fraction >= 1.0) {
        throw Error(ErrorCode::InvalidConfig, "fusion config out of range");
    }
    return c;
}

std::vector<double> FusionModel::raw_inputs(const FusionInput& x) const {
    const double span = age_max - age_min;
    const double age = span > 0.0 ? (x.age_years - age_min) / span : 0.0;
    return {x.texture_score, age, x.clips ? 1.0 : 0.0, x.pmd};
}

double FusionModel::predict(const FusionInput& x) const {
    auto v = raw_inputs(x);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = (v[i] - input_mean[i]) / input_scale[i];
    return net.predict(v);
}

json FusionModel::to_json() const {
    return {{"kind", "texrisk.fusion/1"},
            {"inputs", {"texture_score", "age_normalized", "clips_indicator", "pmd"}},
            {"net", net.to_json()},
            {"age_min", age_min},
            {"age_max", age_max},
            {"input_mean", input_mean},
            {"input_scale", input_scale},
            {"best_epoch", best_epoch},
            {"holdout_auc", holdout_auc},
            {"warnings", warnings}};
}

FusionModel FusionModel::from_json(const json& j) {
    FusionModel m;
    try {
        m.net = Mlp::from_json(j.at("net"));
        m.age_min = j.at("age_min").get<double>();
        m.age_max = j.at("age_max").get<double>();
        m.input_mean = j.at("input_mean").get<std::vector<double>>();
        m.input_scale = j.at("input_scale").get<std::vector<double>>();
        m.best_epoch = j.value("best_epoch", 0);
        m.holdout_auc = j.value("holdout_auc", 0.0);
        m.warnings = j.value("warnings", std::vector<std::string>{});
    } catch (const json::exception& e) {
        throw Error(ErrorCode::InvalidConfig, std::string("fusion json: ") + e.what());
    }
    if (m.net.input_size() != 4 || m.input_mean.size() != 4 || m.input_scale.size() != 4) {
        throw Error(ErrorCode::InvalidConfig, "fusion json: expected 4 inputs");
    }
    return m;
}

namespace {

double holdout_auc(const std::vector<std::vector<double>>& x, const std::vector<int>& y,
                   const std::vector<std::size_t>& rows, const Mlp& net) {
    evaluation::LabeledScores scores;
    scores.reserve(rows.size());
    for (auto r : rows) {
        scores.push_back({std::to_string(r), net.predict(x[r]), y[r] ? CancerGroup::IC : CancerGroup::Healthy});
    }
    return evaluation::compute_auc(scores, evaluation::Positivity::AllCancers).auc;
}

}  // namespace

FusionModel train_fusion(const std::vector<FusionInput>& inputs, const std::vector<int>& labels,
                         const FusionConfig& config) {
    const FusionConfig c = fusion_config_from_json(json::object(), config);
    if (inputs.size() != labels.size()) throw Error(ErrorCode::LengthMismatch, "fusion inputs vs labels");
    std::vector<std::size_t> pos, neg;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] != 0 && labels[i] != 1) throw Error(ErrorCode::ParameterOutOfRange, "labels must be 0/1");
        (labels[i] ? pos : neg).push_back(i);
    }
    if (pos.size() < 2 || neg.size() < 2) throw Error(ErrorCode::DegenerateClasses, "fusion needs both classes");

    FusionModel m;
    const auto [amin, amax] = std::minmax_element(inputs.begin(), inputs.end(),
                                                  [](const auto& a, const auto& b) { return a.age_years < b.age_years; });
    m.age_min = amin->age_years;
    m.age_max = amax->age_years;

    std::vector<std::vector<double>> x;
    x.reserve(inputs.size());
    for (const auto& in : inputs) x.push_back(m.raw_inputs(in));

    static const char* kNames[4] = {"texture_score", "age_normalized", "clips_indicator", "pmd"};
    for (std::size_t k = 0; k < 4; ++k) {
        double mean = 0.0;
        for (const auto& r : x) mean += r[k];
        mean /= static_cast<double>(x.size());
        double ss = 0.0;
        for (const auto& r : x) ss += (r[k] - mean) * (r[k] - mean);
        const double sd = std::sqrt(ss / static_cast<double>(x.size()));
        m.input_mean[k] = mean;
        if (sd < 1e-12) {
            m.input_scale[k] = 1.0;
            m.warnings.push_back(std::string("DegenerateInput: ") + kNames[k] + " is constant");
        } else {
            m.input_scale[k] = sd;
        }
    }
    for (auto& r : x) {
        for (std::size_t k = 0; k < 4; ++k) r[k] = (r[k] - m.input_mean[k]) / m.input_scale[k];
    }

    // stratified hold-out
    Rng rng(mix_seed(c.seed, 31));
    std::shuffle(pos.begin(), pos.end(), rng);
    std::shuffle(neg.begin(), neg.end(), rng);
    std::vector<std::size_t> train, hold;
    for (const auto* cls : {&pos, &neg}) {
        const auto n_hold = std::clamp<std::size_t>(
            static_cast<std::size_t>(std::llround(c.holdout_fraction * static_cast<double>(cls->size()))), 1,
            cls->size() - 1);
        hold.insert(hold.end(), cls->begin(), cls->begin() + static_cast<long>(n_hold));
        train.insert(train.end(), cls->begin() + static_cast<long>(n_hold), cls->end());
    }
    std::sort(train.begin(), train.end());
    std::sort(hold.begin(), hold.end());

    m.net = Mlp({4, c.hidden1, c.hidden2, 1}, mix_seed(c.seed, 32));
    auto params = m.net.parameters();
    auto best = params;
    Adam adam(params.size(), {c.learning_rate, 0.9, 0.999, 1e-8});
    Mlp work = m.net;
    std::vector<std::vector<double>> batch;
    std::vector<double> batch_labels, grad;
    m.holdout_auc = -1.0;
    int since_best = 0;
    for (int epoch = 1; epoch <= c.max_epochs; ++epoch) {
        std::shuffle(train.begin(), train.end(), rng);
        for (std::size_t start = 0; start < train.size(); start += static_cast<std::size_t>(c.batch_size)) {
            batch.clear();
            batch_labels.clear();
            const auto stop = std::min(train.size(), start + static_cast<std::size_t>(c.batch_size));
            for (auto i = start; i < stop; ++i) {
                batch.push_back(x[train[i]]);
                batch_labels.push_back(labels[train[i]]);
            }
            work.set_parameters(params);
            work.loss_and_gradient(batch, batch_labels, grad);
            adam.step(params, grad);
        }
        work.set_parameters(params);
        const double auc = holdout_auc(x, labels, hold, work);
        if (auc > m.holdout_auc) {
            m.holdout_auc = auc;
            m.best_epoch = epoch;
            best = params;
            since_best = 0;
        } else if (++since_best >= c.patience) {
            break;
        }
    }
    m.net.set_parameters(best);
    return m;
}

FusionModel train_fusion(const std::vector<double>& texture_scores, const std::vector<double>& ages,
                         const std::vector<bool>& clips, const std::vector<double>& pmds,
                         const std::vector<int>& labels, const FusionConfig& config) {
    const auto n = texture_scores.size();
    if (ages.size() != n || clips.size() != n || pmds.size() != n || labels.size() != n) {
        throw Error(ErrorCode::LengthMismatch, "fusion columns differ in length");
    }
    std::vector<FusionInput> rows(n);
    for (std::size_t i = 0; i < n; ++i) rows[i] = {texture_scores[i], ages[i], clips[i], pmds[i]};
    return train_fusion(rows, labels, config);
}

}  // namespace texrisk::scoring
