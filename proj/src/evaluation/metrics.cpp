#include "texrisk/evaluation/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>
#include <unordered_set>

#include "texrisk/common/error.hpp"

namespace texrisk::evaluation {

std::string_view to_string(Positivity positivity) {
    switch (positivity) {
        case Positivity::IC: return "IC";
        case Positivity::LTC: return "LTC";
        case Positivity::IcOrLtc: return "IC|LTC";
        case Positivity::AllCancers: return "AllCancers";
    }
    return "?";
}

Positivity parse_positivity(std::string_view text) {
    for (auto p : {Positivity::IC, Positivity::LTC, Positivity::IcOrLtc, Positivity::AllCancers}) {
        if (text == to_string(p)) return p;
    }
    throw Error(ErrorCode::InvalidConfig, "unknown positivity '" + std::string(text) + "'");
}

bool is_positive(CancerGroup group, Positivity positivity) {
    switch (positivity) {
        case Positivity::IC: return group == CancerGroup::IC;
        case Positivity::LTC: return group == CancerGroup::LTC;
        case Positivity::IcOrLtc: return group == CancerGroup::IC || group == CancerGroup::LTC;
        case Positivity::AllCancers: return group != CancerGroup::Healthy;
    }
    return false;
}

std::vector<double> midranks(const std::vector<double>& values) {
    std::vector<std::size_t> order(values.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return values[i] < values[j]; });
    std::vector<double> ranks(values.size());
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
        const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
        i = j + 1;
    }
    return ranks;
}

namespace {

struct Split {
    std::vector<double> pos;
    std::vector<double> neg;
};

Split split(const LabeledScores& scores, Positivity positivity) {
    Split s;
    for (const auto& e : scores) {
        if (!std::isfinite(e.score)) throw Error(ErrorCode::DegenerateInput, "non-finite score for " + e.woman_id);
        (is_positive(e.group, positivity) ? s.pos : s.neg).push_back(e.score);
    }
    if (s.pos.empty() || s.neg.empty()) {
        throw Error(ErrorCode::DegenerateClasses, std::string("need positives and negatives under ") +
                                                      std::string(to_string(positivity)));
    }
    return s;
}

// DeLong structural components: v10[i] for each positive, v01[j] for each negative.
struct Components {
    std::vector<double> v10;
    std::vector<double> v01;
    double auc = 0.0;
};

Components components(const Split& s) {
    const std::size_t m = s.pos.size();
    const std::size_t n = s.neg.size();
    std::vector<double> all(s.pos);
    all.insert(all.end(), s.neg.begin(), s.neg.end());
    const auto r_all = midranks(all);
    const auto r_pos = midranks(s.pos);
    const auto r_neg = midranks(s.neg);
    Components c;
    c.v10.resize(m);
    c.v01.resize(n);
    // Mann-Whitney U from the rank sum; every term is a half-integer so the sum is exact.
    double u = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        c.v10[i] = (r_all[i] - r_pos[i]) / static_cast<double>(n);
        u += r_all[i] - r_pos[i];
    }
    for (std::size_t j = 0; j < n; ++j) {
        c.v01[j] = 1.0 - (r_all[m + j] - r_neg[j]) / static_cast<double>(m);
    }
    c.auc = u / (static_cast<double>(m) * static_cast<double>(n));
    return c;
}

double covariance(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t k = x.size();
    if (k < 2) return 0.0;
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / k;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / k;
    double s = 0.0;
    for (std::size_t i = 0; i < k; ++i) s += (x[i] - mx) * (y[i] - my);
    return s / static_cast<double>(k - 1);
}

double delong_variance(const Components& c) {
    const double v = covariance(c.v10, c.v10) / c.v10.size() + covariance(c.v01, c.v01) / c.v01.size();
    return std::max(0.0, v);
}

AucResult make_result(const Components& c, Positivity positivity) {
    AucResult r;
    r.auc = c.auc;
    r.variance = delong_variance(c);
    const double half = kZ95 * std::sqrt(r.variance);
    r.ci_low = std::clamp(r.auc - half, 0.0, 1.0);
    r.ci_high = std::clamp(r.auc + half, 0.0, 1.0);
    r.positivity = positivity;
    r.n_positive = c.v10.size();
    r.n_negative = c.v01.size();
    return r;
}

double two_sided_p(double diff, double variance, double* z_out) {
    if (variance <= 0.0) {
        *z_out = 0.0;
        return diff == 0.0 ? 1.0 : 0.0;
    }
    const double z = diff / std::sqrt(variance);
    *z_out = z;
    return std::min(1.0, std::erfc(std::abs(z) / std::sqrt(2.0)));
}

}  // namespace

AucResult compute_auc(const LabeledScores& scores, Positivity positivity) {
    return make_result(components(split(scores, positivity)), positivity);
}

DelongResult delong_test(const LabeledScores& a, const LabeledScores& b, Positivity positivity, bool paired) {
    DelongResult out;
    if (!paired) {
        std::unordered_set<std::string> ids;
        for (const auto& e : a) ids.insert(e.woman_id);
        for (const auto& e : b) {
            if (ids.count(e.woman_id)) {
                throw Error(ErrorCode::PairingMismatch, "unpaired test on overlapping cohorts (" + e.woman_id + ")");
            }
        }
        const auto ca = components(split(a, positivity));
        const auto cb = components(split(b, positivity));
        out.a = make_result(ca, positivity);
        out.b = make_result(cb, positivity);
        out.p_value = two_sided_p(out.a.auc - out.b.auc, out.a.variance + out.b.variance, &out.z);
        return out;
    }

    if (a.size() != b.size()) throw Error(ErrorCode::PairingMismatch, "paired inputs differ in size");
    std::unordered_map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < b.size(); ++i) {
        if (!index.emplace(b[i].woman_id, i).second) {
            throw Error(ErrorCode::PairingMismatch, "duplicate woman_id " + b[i].woman_id);
        }
    }
    LabeledScores aligned;
    aligned.reserve(a.size());
    std::unordered_set<std::string> seen;
    for (const auto& e : a) {
        auto it = index.find(e.woman_id);
        if (it == index.end() || !seen.insert(e.woman_id).second) {
            throw Error(ErrorCode::PairingMismatch, "woman_id " + e.woman_id + " not paired");
        }
        const auto& other = b[it->second];
        if (other.group != e.group) throw Error(ErrorCode::PairingMismatch, "group differs for " + e.woman_id);
        aligned.push_back(other);
    }
    const auto ca = components(split(a, positivity));
    const auto cb = components(split(aligned, positivity));
    out.a = make_result(ca, positivity);
    out.b = make_result(cb, positivity);
    const double m = static_cast<double>(ca.v10.size());
    const double n = static_cast<double>(ca.v01.size());
    const double var = (covariance(ca.v10, ca.v10) + covariance(cb.v10, cb.v10) - 2.0 * covariance(ca.v10, cb.v10)) / m +
                       (covariance(ca.v01, ca.v01) + covariance(cb.v01, cb.v01) - 2.0 * covariance(ca.v01, cb.v01)) / n;
    out.p_value = two_sided_p(out.a.auc - out.b.auc, std::max(0.0, var), &out.z);
    return out;
}

double sensitivity_at_specificity(const LabeledScores& scores, Positivity positivity, double specificity) {
    if (!(specificity > 0.0 && specificity < 1.0)) {
        throw Error(ErrorCode::ParameterOutOfRange, "specificity must lie in (0,1)");
    }
    auto s = split(scores, positivity);
    std::sort(s.neg.begin(), s.neg.end());
    const double n = static_cast<double>(s.neg.size());
    const double needed = specificity * n - 1e-9;

    // smallest negative score with at least `needed` negatives strictly below it
    std::size_t i = 0;
    while (i < s.neg.size()) {
        if (static_cast<double>(i) >= needed) break;
        ++i;
        while (i < s.neg.size() && s.neg[i] == s.neg[i - 1]) ++i;
    }
    std::size_t hits = 0;
    if (i < s.neg.size()) {
        const double threshold = s.neg[i];
        for (double p : s.pos) hits += p >= threshold;
    } else {
        const double top = s.neg.back();
        for (double p : s.pos) hits += p > top;
    }
    return static_cast<double>(hits) / static_cast<double>(s.pos.size());
}

std::vector<RocPoint> roc_curve(const LabeledScores& scores, Positivity positivity) {
    auto s = split(scores, positivity);
    std::vector<double> thresholds(s.pos);
    thresholds.insert(thresholds.end(), s.neg.begin(), s.neg.end());
    std::sort(thresholds.begin(), thresholds.end(), std::greater<>());
    thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
    std::sort(s.pos.begin(), s.pos.end(), std::greater<>());
    std::sort(s.neg.begin(), s.neg.end(), std::greater<>());
    std::vector<RocPoint> curve{{0.0, 0.0}};
    std::size_t ip = 0;
    std::size_t in = 0;
    for (double t : thresholds) {
        while (ip < s.pos.size() && s.pos[ip] >= t) ++ip;
        while (in < s.neg.size() && s.neg[in] >= t) ++in;
        curve.push_back({static_cast<double>(in) / s.neg.size(), static_cast<double>(ip) / s.pos.size()});
    }
    return curve;
}

}  // namespace texrisk::evaluation
