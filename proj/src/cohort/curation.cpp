#include "texrisk/cohort/curation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>
#include <unordered_set>

#include "texrisk/common/error.hpp"
#include "texrisk/common/random.hpp"

namespace texrisk::cohort {

using nlohmann::json;

ExclusionResult apply_exclusions(const std::vector<WomanRecord>& records) {
    ExclusionResult out;
    for (const auto& r : records) {
        if (r.exclusion_flags.empty()) {
            out.kept.push_back(r);
        } else {
            out.excluded.push_back({r, {r.exclusion_flags.begin(), r.exclusion_flags.end()}});
        }
    }
    return out;
}

MatchResult match_case_controls(const std::vector<WomanRecord>& cases, const std::vector<WomanRecord>& healthy_pool,
                                std::uint64_t seed, int controls_per_case, int age_tolerance) {
    std::unordered_set<std::string> case_ids;
    for (const auto& c : cases) {
        if (!is_cancer(classify_outcome(c))) throw Error(ErrorCode::InvalidConfig, c.woman_id + " is not a case");
        case_ids.insert(c.woman_id);
    }
    // pool bucketed by age, ids sorted so the draw only depends on the seed
    std::map<int, std::vector<std::string>> by_age;
    for (const auto& h : healthy_pool) {
        if (case_ids.count(h.woman_id)) throw Error(ErrorCode::InvalidConfig, h.woman_id + " is both case and control");
        if (classify_outcome(h) != CancerGroup::Healthy) {
            throw Error(ErrorCode::InvalidConfig, h.woman_id + " in the control pool is not healthy");
        }
        by_age[h.age_years].push_back(h.woman_id);
    }
    for (auto& [age, ids] : by_age) std::sort(ids.begin(), ids.end());

    std::vector<std::size_t> order(cases.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return cases[a].woman_id < cases[b].woman_id; });
    Rng rng(mix_seed(seed, 1));
    std::shuffle(order.begin(), order.end(), rng);

    std::unordered_set<std::string> used;
    MatchResult out;
    for (std::size_t idx : order) {
        const auto& c = cases[idx];
        std::vector<std::string> eligible;
        for (int age = c.age_years - age_tolerance; age <= c.age_years + age_tolerance; ++age) {
            auto it = by_age.find(age);
            if (it == by_age.end()) continue;
            for (const auto& id : it->second) {
                if (!used.count(id)) eligible.push_back(id);
            }
        }
        if (eligible.size() < static_cast<std::size_t>(controls_per_case)) {
            out.dropped.push_back({c.woman_id, eligible.size()});
            continue;
        }
        MatchSet set{c.woman_id, {}, age_tolerance};
        for (int k = 0; k < controls_per_case; ++k) {
            std::uniform_int_distribution<std::size_t> pick(k, eligible.size() - 1);
            std::swap(eligible[k], eligible[pick(rng)]);
            set.control_ids.push_back(eligible[k]);
            used.insert(eligible[k]);
        }
        std::sort(set.control_ids.begin(), set.control_ids.end());
        out.sets.push_back(std::move(set));
    }
    std::sort(out.sets.begin(), out.sets.end(), [](const MatchSet& a, const MatchSet& b) { return a.case_id < b.case_id; });
    std::sort(out.dropped.begin(), out.dropped.end(),
              [](const auto& a, const auto& b) { return a.case_id < b.case_id; });
    return out;
}

json to_json(const ReferenceRiskTable& table) { return {{"source", table.source}, {"entries", table.entries}}; }

ReferenceRiskTable reference_from_json(const json& j) {
    ReferenceRiskTable t;
    t.source = j.value("source", "");
    t.entries = j.at("entries").get<std::map<std::string, double>>();
    return t;
}

std::string to_string(CurationStage stage) { return stage == CurationStage::NoiseId ? "NoiseId" : "Filtered"; }

namespace {

std::vector<double> quantile_edges(std::vector<double> values, int q) {
    std::vector<double> edges;
    if (values.empty()) return edges;
    std::sort(values.begin(), values.end());
    const double n = static_cast<double>(values.size());
    for (int j = 1; j < q; ++j) {
        auto idx = std::min(static_cast<std::size_t>(std::lround(j * n / q)), values.size() - 1);
        edges.push_back(values[idx]);
    }
    return edges;
}

int bin_of(const std::vector<double>& edges, double v) {
    return static_cast<int>(std::upper_bound(edges.begin(), edges.end(), v) - edges.begin());
}

double risk_of(const ReferenceRiskTable& table, const std::string& id) {
    auto it = table.entries.find(id);
    if (it == table.entries.end()) throw Error(ErrorCode::MissingReferenceRisk, "no reference risk for " + id);
    return it->second;
}

// Deals stratum members to folds round-robin; the offset carries over
// between strata so group totals stay balanced too.
void deal(const std::map<std::string, std::vector<std::string>>& strata, int n_folds, Rng& rng,
          std::map<std::string, int>& fold_of) {
    int offset = 0;
    for (const auto& [key, members] : strata) {
        auto shuffled = members;
        std::sort(shuffled.begin(), shuffled.end());
        std::shuffle(shuffled.begin(), shuffled.end(), rng);
        for (std::size_t i = 0; i < shuffled.size(); ++i) {
            fold_of[shuffled[i]] = static_cast<int>((offset + i) % n_folds);
        }
        offset = static_cast<int>((offset + shuffled.size()) % n_folds);
    }
}

std::string pad(int v) {
    char buf[8];
    std::snprintf(buf, sizeof buf, "%02d", v);
    return buf;
}

}  // namespace

FoldPlan assign_ensemble_folds(const std::vector<WomanRecord>& records, const std::vector<MatchSet>& match_sets,
                               const std::vector<std::string>& unmatched, CurationStage stage,
                               const ReferenceRiskTable* reference, std::uint64_t seed, int n_folds) {
    if (n_folds < 2) throw Error(ErrorCode::ParameterOutOfRange, "need at least two folds");
    if (stage == CurationStage::Filtered && reference == nullptr) {
        throw Error(ErrorCode::MissingReferenceRisk, "filtered stage needs a reference risk table");
    }
    std::unordered_map<std::string, const WomanRecord*> by_id;
    for (const auto& r : records) by_id[r.woman_id] = &r;
    auto lookup = [&](const std::string& id) -> const WomanRecord& {
        auto it = by_id.find(id);
        if (it == by_id.end()) throw Error(ErrorCode::InvalidConfig, "unknown woman " + id);
        return *it->second;
    };
    std::unordered_set<std::string> seen;
    auto claim = [&](const std::string& id) {
        if (!seen.insert(id).second) throw Error(ErrorCode::InvalidConfig, id + " appears twice in the fold inputs");
    };

    FoldPlan plan;
    plan.seed = seed;
    plan.stage = stage;
    plan.match_sets = match_sets;
    std::sort(plan.match_sets.begin(), plan.match_sets.end(),
              [](const MatchSet& a, const MatchSet& b) { return a.case_id < b.case_id; });

    std::vector<double> case_ages;
    std::vector<double> case_risks;
    for (const auto& m : plan.match_sets) {
        claim(m.case_id);
        for (const auto& c : m.control_ids) claim(c);
        const auto& r = lookup(m.case_id);
        if (!is_cancer(classify_outcome(r))) throw Error(ErrorCode::InvalidConfig, m.case_id + " is not a case");
        case_ages.push_back(r.age_years);
        if (reference && stage == CurationStage::Filtered) case_risks.push_back(risk_of(*reference, m.case_id));
    }
    for (const auto& id : unmatched) {
        claim(id);
        lookup(id);
    }
    const auto age_edges = quantile_edges(case_ages, 10);
    const auto case_risk_edges = quantile_edges(case_risks, 4);

    const bool filtered = stage == CurationStage::Filtered;
    std::map<std::string, std::vector<std::string>> case_strata;
    for (const auto& m : plan.match_sets) {
        const auto& r = lookup(m.case_id);
        std::string key = std::string(to_string(classify_outcome(r)));
        if (filtered) key += "/q" + std::to_string(bin_of(case_risk_edges, risk_of(*reference, m.case_id)));
        key += "/age" + pad(bin_of(age_edges, r.age_years));
        case_strata[key].push_back(m.case_id);
    }

    std::map<std::string, std::vector<std::string>> other_strata;
    if (filtered) {
        std::vector<double> risks;
        for (const auto& id : unmatched) risks.push_back(risk_of(*reference, id));
        const auto edges = quantile_edges(risks, 4);
        for (const auto& id : unmatched) {
            const std::string key = std::string(to_string(classify_outcome(lookup(id)))) + "/q" +
                                    std::to_string(bin_of(edges, risk_of(*reference, id)));
            other_strata[key].push_back(id);
        }
        plan.stratification_keys =
            "cases: cancer_group x reference_risk_quartile x age_decile; controls follow their case; "
            "unmatched: cancer_group x reference_risk_quartile";
    } else {
        other_strata["all"] = unmatched;
        plan.stratification_keys = "cases: cancer_group x age_decile; controls follow their case; unmatched: random";
    }

    Rng rng(mix_seed(seed, 2));
    deal(case_strata, n_folds, rng, plan.fold_of);
    for (const auto& m : plan.match_sets) {
        for (const auto& c : m.control_ids) plan.fold_of[c] = plan.fold_of[m.case_id];
    }
    std::map<std::string, int> unmatched_fold;
    deal(other_strata, n_folds, rng, unmatched_fold);

    plan.folds.assign(n_folds, {});
    for (const auto& [id, fold] : plan.fold_of) {
        const auto& r = lookup(id);
        for (int k = 0; k < n_folds; ++k) {
            if (k == fold) {
                plan.folds[k].validation_women.push_back(id);
            } else {
                for (const auto& v : r.view_ids) plan.folds[k].training_views.push_back({id, v});
            }
        }
    }
    for (const auto& [id, fold] : unmatched_fold) {
        plan.fold_of[id] = fold;
        plan.folds[fold].validation_women.push_back(id);
    }
    for (auto& f : plan.folds) std::sort(f.validation_women.begin(), f.validation_women.end());
    return plan;
}

FoldPlan exclude_cancer_side_views(FoldPlan plan, const std::vector<WomanRecord>& records) {
    std::unordered_map<std::string, const WomanRecord*> by_id;
    for (const auto& r : records) by_id[r.woman_id] = &r;
    // woman -> laterality whose views must not be trained on
    std::unordered_map<std::string, Laterality> blocked;
    for (const auto& m : plan.match_sets) {
        auto it = by_id.find(m.case_id);
        if (it == by_id.end()) throw Error(ErrorCode::InvalidConfig, "unknown case " + m.case_id);
        if (!it->second->cancer_laterality) throw Error(ErrorCode::MissingLaterality, m.case_id);
        const Laterality side = *it->second->cancer_laterality;
        blocked[m.case_id] = side;
        for (const auto& c : m.control_ids) blocked[c] = side;
    }
    auto slot_of = [&](const ViewRef& v) {
        const auto& ids = by_id.at(v.woman_id)->view_ids;
        const auto pos = std::find(ids.begin(), ids.end(), v.view_id) - ids.begin();
        if (pos == 4) throw Error(ErrorCode::InvalidConfig, "view " + v.view_id + " not listed for " + v.woman_id);
        return static_cast<int>(pos);
    };
    for (auto& f : plan.folds) {
        std::erase_if(f.training_views, [&](const ViewRef& v) {
            auto it = blocked.find(v.woman_id);
            return it != blocked.end() && slot_laterality(slot_of(v)) == it->second;
        });
    }
    return plan;
}

FilterResult filter_noisy_samples(const std::vector<WomanRecord>& records, const ReferenceRiskTable& reference,
                                  double healthy_fraction, double case_fraction) {
    struct Item {
        std::size_t index;
        double risk;
    };
    std::map<CancerGroup, std::vector<Item>> groups;
    for (std::size_t i = 0; i < records.size(); ++i) {
        groups[classify_outcome(records[i])].push_back({i, risk_of(reference, records[i].woman_id)});
    }
    std::vector<int> removed_reason(records.size(), -1);
    auto take = [&](std::vector<Item>& items, double fraction, bool highest, int reason) {
        std::sort(items.begin(), items.end(), [&](const Item& a, const Item& b) {
            if (a.risk != b.risk) return highest ? a.risk > b.risk : a.risk < b.risk;
            return records[a.index].woman_id < records[b.index].woman_id;
        });
        const auto n = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(items.size()) + 1e-9));
        for (std::size_t k = 0; k < n; ++k) removed_reason[items[k].index] = reason;
    };
    for (auto& [group, items] : groups) {
        if (group == CancerGroup::Healthy) {
            take(items, healthy_fraction, true, 0);
        } else {
            take(items, case_fraction, false, 1);
        }
    }
    FilterResult out;
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (removed_reason[i] < 0) {
            out.kept.push_back(records[i]);
        } else {
            out.removed.push_back({records[i], removed_reason[i] == 0 ? "HighRiskHealthy" : "LowRiskCase",
                                   reference.entries.at(records[i].woman_id)});
        }
    }
    return out;
}

json to_json(const FoldPlan& plan) {
    json folds = json::array();
    for (const auto& f : plan.folds) {
        json views = json::array();
        for (const auto& v : f.training_views) views.push_back({v.woman_id, v.view_id});
        folds.push_back({{"training_views", views}, {"validation_women", f.validation_women}});
    }
    json sets = json::array();
    for (const auto& m : plan.match_sets) {
        sets.push_back({{"case_id", m.case_id},
                        {"control_ids", m.control_ids},
                        {"age_tolerance_years", m.age_tolerance_years}});
    }
    return {{"seed", plan.seed},
            {"stage", to_string(plan.stage)},
            {"stratification_keys", plan.stratification_keys},
            {"folds", folds},
            {"match_sets", sets},
            {"fold_of", plan.fold_of}};
}

FoldPlan fold_plan_from_json(const json& j) {
    try {
        FoldPlan plan;
        plan.seed = j.at("seed").get<std::uint64_t>();
        const auto stage = j.at("stage").get<std::string>();
        if (stage != "NoiseId" && stage != "Filtered") throw Error(ErrorCode::InvalidConfig, "unknown stage " + stage);
        plan.stage = stage == "NoiseId" ? CurationStage::NoiseId : CurationStage::Filtered;
        plan.stratification_keys = j.value("stratification_keys", "");
        for (const auto& f : j.at("folds")) {
            Fold fold;
            for (const auto& v : f.at("training_views")) {
                fold.training_views.push_back({v.at(0).get<std::string>(), v.at(1).get<std::string>()});
            }
            fold.validation_women = f.at("validation_women").get<std::vector<std::string>>();
            plan.folds.push_back(std::move(fold));
        }
        for (const auto& m : j.value("match_sets", json::array())) {
            plan.match_sets.push_back({m.at("case_id").get<std::string>(),
                                       m.at("control_ids").get<std::vector<std::string>>(),
                                       m.value("age_tolerance_years", kAgeToleranceYears)});
        }
        plan.fold_of = j.value("fold_of", std::map<std::string, int>{});
        return plan;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::InvalidConfig, std::string("fold plan: ") + e.what());
    }
}

}  // namespace texrisk::cohort
