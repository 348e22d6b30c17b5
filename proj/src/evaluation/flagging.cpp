#include "texrisk/evaluation/flagging.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "texrisk/common/error.hpp"

namespace texrisk::evaluation {

FlaggingResult flag_top_fraction(const LabeledScores& scores, double fraction) {
    if (!(fraction > 0.0 && fraction < 1.0)) throw Error(ErrorCode::ParameterOutOfRange, "fraction must lie in (0,1)");
    FlaggingResult out;
    out.fraction = fraction;
    const std::size_t n = scores.size();
    out.n_flagged = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n) + 1e-9));
    out.flagged.assign(n, false);

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
        if (scores[i].score != scores[j].score) return scores[i].score > scores[j].score;
        return scores[i].woman_id < scores[j].woman_id;
    });
    for (std::size_t k = 0; k < out.n_flagged; ++k) out.flagged[order[k]] = true;

    auto rate = [&](auto&& pred) -> std::optional<double> {
        std::size_t total = 0;
        std::size_t hit = 0;
        for (std::size_t i = 0; i < n; ++i) {
            if (!pred(scores[i].group)) continue;
            ++total;
            hit += out.flagged[i];
        }
        if (total == 0) return std::nullopt;
        return static_cast<double>(hit) / static_cast<double>(total);
    };
    out.capture.sdc = rate([](CancerGroup g) { return g == CancerGroup::SDC; });
    out.capture.ic = rate([](CancerGroup g) { return g == CancerGroup::IC; });
    out.capture.ltc = rate([](CancerGroup g) { return g == CancerGroup::LTC; });
    out.capture.all_cancers = rate([](CancerGroup g) { return is_cancer(g); });
    return out;
}

}  // namespace texrisk::evaluation
