#include <algorithm>
#include <filesystem>
#include <map>
#include <set>

#include "doctest.h"
#include "support/cohorts.hpp"
#include "texrisk/cohort/curation.hpp"
#include "texrisk/common/error.hpp"

using namespace texrisk;
using namespace texrisk::cohort;
using texrisk::testing::make_woman;
using texrisk::testing::random_cohort;

namespace {

ErrorCode code_of(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected texrisk::Error");
    return ErrorCode::Io;
}

WomanRecord diagnosed(bool recalled, long days) {
    auto r = make_woman("w", 60, CancerGroup::Healthy);
    r.recalled = recalled;
    r.diagnosis_date = add_days(r.screen_date, days);
    r.cancer_laterality = Laterality::Left;
    return r;
}

struct Split {
    std::vector<WomanRecord> cases;
    std::vector<WomanRecord> healthy;
};

Split split(const std::vector<WomanRecord>& records) {
    Split s;
    for (const auto& r : records) (is_cancer(classify_outcome(r)) ? s.cases : s.healthy).push_back(r);
    return s;
}

std::vector<std::string> unmatched_ids(const std::vector<WomanRecord>& records, const MatchResult& m) {
    std::set<std::string> matched;
    for (const auto& s : m.sets) {
        matched.insert(s.case_id);
        matched.insert(s.control_ids.begin(), s.control_ids.end());
    }
    std::vector<std::string> out;
    for (const auto& r : records) {
        if (!matched.count(r.woman_id)) out.push_back(r.woman_id);
    }
    return out;
}

ReferenceRiskTable random_reference(Rng& rng, const std::vector<WomanRecord>& records) {
    ReferenceRiskTable t;
    for (const auto& r : records) t.entries[r.woman_id] = uniform01(rng);
    return t;
}

// Leakage and balance checks shared by the property tests.
void check_plan(const FoldPlan& plan, const std::vector<WomanRecord>& records) {
    std::map<std::string, const WomanRecord*> by_id;
    for (const auto& r : records) by_id[r.woman_id] = &r;
    std::map<std::string, Laterality> blocked;
    for (const auto& m : plan.match_sets) {
        blocked[m.case_id] = *by_id[m.case_id]->cancer_laterality;
        for (const auto& c : m.control_ids) {
            blocked[c] = *by_id[m.case_id]->cancer_laterality;
            REQUIRE(plan.fold_of.at(c) == plan.fold_of.at(m.case_id));
        }
    }
    for (std::size_t k = 0; k < plan.folds.size(); ++k) {
        const auto& f = plan.folds[k];
        const std::set<std::string> validation(f.validation_women.begin(), f.validation_women.end());
        for (const auto& v : f.training_views) {
            REQUIRE_FALSE(validation.count(v.woman_id));
            REQUIRE(blocked.count(v.woman_id));  // only matched women train
            const auto& ids = by_id[v.woman_id]->view_ids;
            const int slot = static_cast<int>(std::find(ids.begin(), ids.end(), v.view_id) - ids.begin());
            REQUIRE(slot < 4);
            REQUIRE(slot_laterality(slot) != blocked[v.woman_id]);
        }
    }
}

}  // namespace

TEST_CASE("outcome classification") {
    CHECK(classify_outcome(make_woman("h", 60, CancerGroup::Healthy)) == CancerGroup::Healthy);
    CHECK(classify_outcome(diagnosed(true, 152)) == CancerGroup::SDC);   // 5 months
    CHECK(classify_outcome(diagnosed(false, 609)) == CancerGroup::IC);   // 20 months
    CHECK(classify_outcome(diagnosed(false, 913)) == CancerGroup::LTC);  // 30 months
    CHECK(classify_outcome(diagnosed(false, 100)) == CancerGroup::IC);   // not recalled
    CHECK(classify_outcome(diagnosed(true, 182)) == CancerGroup::SDC);   // 5.98 months
    CHECK(classify_outcome(diagnosed(true, 183)) == CancerGroup::IC);    // 6.01 months
    CHECK(classify_outcome(diagnosed(false, 730)) == CancerGroup::IC);   // 23.98 months
    CHECK(classify_outcome(diagnosed(false, 731)) == CancerGroup::LTC);  // 24.01 months
    CHECK(code_of([] { classify_outcome(diagnosed(false, -1)); }) == ErrorCode::InvalidDates);
}

TEST_CASE("records round-trip through the JSON-lines manifest") {
    Rng rng(1);
    auto records = random_cohort(rng, 30, 0.3);
    records[3].exclusion_flags = {ExclusionFlag::PriorCancer, ExclusionFlag::VisibleArtifact};
    records[4].has_clips = true;
    const auto path = std::filesystem::temp_directory_path() / "texrisk_cohort_manifest.jsonl";
    write_manifest(path, records);
    CHECK(read_manifest(path) == records);

    records.push_back(records.front());
    write_manifest(path, records);
    CHECK(code_of([&] { read_manifest(path); }) == ErrorCode::InvalidConfig);
    std::filesystem::remove(path);

    auto j = to_json(records[0]);
    j["pmd"] = 1.5;
    CHECK(code_of([&] { record_from_json(j); }) == ErrorCode::ParameterOutOfRange);
    j = to_json(records[0]);
    j["diagnosis_date"] = "2001-01-01";
    CHECK(code_of([&] { record_from_json(j); }) == ErrorCode::InvalidDates);
    CHECK(code_of([] { parse_date("2012-02-30"); }) == ErrorCode::InvalidDates);
}

TEST_CASE("exclusions partition the input") {
    std::vector<WomanRecord> records;
    for (int i = 0; i < 10; ++i) records.push_back(make_woman("w" + std::to_string(i), 55, CancerGroup::Healthy));
    records[2].exclusion_flags = {ExclusionFlag::PriorCancer};
    records[5].exclusion_flags = {ExclusionFlag::CorruptedView};
    records[7].exclusion_flags = {ExclusionFlag::BilateralClips, ExclusionFlag::VisibleArtifact};
    const auto r = apply_exclusions(records);
    CHECK(r.kept.size() == 7);
    REQUIRE(r.excluded.size() == 3);
    CHECK(r.excluded[0].reasons == std::vector<ExclusionFlag>{ExclusionFlag::PriorCancer});
    CHECK(r.excluded[2].reasons.size() == 2);
    std::set<std::string> all;
    for (const auto& k : r.kept) all.insert(k.woman_id);
    for (const auto& e : r.excluded) CHECK(all.insert(e.record.woman_id).second);
    CHECK(all.size() == records.size());
}

TEST_CASE("age matching within one year") {
    std::vector<WomanRecord> pool;
    int id = 0;
    for (int age : {56, 57, 58, 55, 59}) {
        for (int k = 0; k < 10; ++k) pool.push_back(make_woman("h" + std::to_string(id++), age, CancerGroup::Healthy));
    }
    const std::vector<WomanRecord> cases{make_woman("c1", 57, CancerGroup::IC)};
    const auto m = match_case_controls(cases, pool, 3);
    REQUIRE(m.sets.size() == 1);
    CHECK(m.sets[0].control_ids.size() == 20);
    std::map<std::string, int> ages;
    for (const auto& h : pool) ages[h.woman_id] = h.age_years;
    for (const auto& c : m.sets[0].control_ids) {
        CHECK(ages[c] >= 56);
        CHECK(ages[c] <= 58);
    }

    std::vector<WomanRecord> small(pool.begin(), pool.begin() + 19);
    const auto d = match_case_controls(cases, small, 3);
    CHECK(d.sets.empty());
    REQUIRE(d.dropped.size() == 1);
    CHECK(d.dropped[0].case_id == "c1");
    CHECK(d.dropped[0].eligible == 19);

    const std::vector<WomanRecord> two{make_woman("c1", 57, CancerGroup::IC), make_woman("c2", 57, CancerGroup::LTC)};
    auto big = pool;
    for (int age : {56, 57, 58}) {
        for (int k = 0; k < 10; ++k) big.push_back(make_woman("h" + std::to_string(id++), age, CancerGroup::Healthy));
    }
    const auto a = match_case_controls(two, big, 9);
    const auto b = match_case_controls(two, big, 9);
    REQUIRE(a.sets.size() == 2);
    for (int k = 0; k < 2; ++k) CHECK(a.sets[k].control_ids == b.sets[k].control_ids);

    CHECK(code_of([&] { match_case_controls(two, two, 1); }) == ErrorCode::InvalidConfig);
}

TEST_CASE("matching validity on random cohorts") {
    Rng rng(55);
    for (int trial = 0; trial < 30; ++trial) {
        const auto records = random_cohort(rng, 1500, 0.03 + 0.01 * (trial % 3));
        const auto s = split(records);
        const auto m = match_case_controls(s.cases, s.healthy, trial);
        std::map<std::string, int> age;
        for (const auto& r : records) age[r.woman_id] = r.age_years;
        std::set<std::string> used;
        for (const auto& set : m.sets) {
            REQUIRE(set.control_ids.size() == 20);
            for (const auto& c : set.control_ids) {
                REQUIRE(std::abs(age[c] - age[set.case_id]) <= 1);
                REQUIRE(used.insert(c).second);
            }
        }
        CHECK(m.sets.size() + m.dropped.size() == s.cases.size());
    }
}

TEST_CASE("fold assignment arithmetic") {
    std::vector<WomanRecord> records;
    std::vector<MatchSet> sets;
    for (int i = 0; i < 100; ++i) {
        const std::string cid = "c" + std::to_string(1000 + i);
        records.push_back(make_woman(cid, 60, CancerGroup::IC));
        MatchSet m{cid, {}, 1};
        for (int k = 0; k < 2; ++k) {
            const std::string hid = cid + "h" + std::to_string(k);
            records.push_back(make_woman(hid, 60, CancerGroup::Healthy));
            m.control_ids.push_back(hid);
        }
        sets.push_back(m);
    }
    const auto plan = assign_ensemble_folds(records, sets, {}, CurationStage::NoiseId, nullptr, 4);
    REQUIRE(plan.folds.size() == 5);
    std::vector<int> per_fold(5, 0);
    for (const auto& m : sets) {
        ++per_fold[plan.fold_of.at(m.case_id)];
        for (const auto& c : m.control_ids) CHECK(plan.fold_of.at(c) == plan.fold_of.at(m.case_id));
    }
    CHECK(per_fold == std::vector<int>(5, 20));

    // 50 IC + 50 LTC spread over ages
    std::vector<WomanRecord> mixed;
    std::vector<MatchSet> mixed_sets;
    for (int i = 0; i < 100; ++i) {
        const std::string cid = "c" + std::to_string(1000 + i);
        mixed.push_back(make_woman(cid, 50 + i % 17, i < 50 ? CancerGroup::IC : CancerGroup::LTC));
        mixed_sets.push_back({cid, {}, 1});
    }
    const auto p2 = assign_ensemble_folds(mixed, mixed_sets, {}, CurationStage::NoiseId, nullptr, 11);
    for (const auto& f : p2.folds) {
        int ic = 0, ltc = 0;
        for (const auto& id : f.validation_women) {
            const int i = std::stoi(id.substr(1)) - 1000;
            (i < 50 ? ic : ltc) += 1;
        }
        CHECK(ic == 10);
        CHECK(ltc == 10);
    }

    CHECK(code_of([&] { assign_ensemble_folds(records, sets, {}, CurationStage::Filtered, nullptr, 1); }) ==
          ErrorCode::MissingReferenceRisk);
    ReferenceRiskTable partial;
    partial.entries["c1000"] = 0.5;
    CHECK(code_of([&] { assign_ensemble_folds(records, sets, {}, CurationStage::Filtered, &partial, 1); }) ==
          ErrorCode::MissingReferenceRisk);
}

TEST_CASE("cancer-side views are excluded for cases and their controls") {
    std::vector<WomanRecord> records{make_woman("c1", 60, CancerGroup::LTC, Laterality::Left),
                                     make_woman("c2", 61, CancerGroup::IC, Laterality::Right)};
    std::vector<MatchSet> sets{{"c1", {}, 1}, {"c2", {}, 1}};
    for (int k = 0; k < 20; ++k) {
        records.push_back(make_woman("a" + std::to_string(k), 60, CancerGroup::Healthy));
        records.push_back(make_woman("b" + std::to_string(k), 61, CancerGroup::Healthy));
        sets[0].control_ids.push_back("a" + std::to_string(k));
        sets[1].control_ids.push_back("b" + std::to_string(k));
    }
    records.push_back(make_woman("u1", 63, CancerGroup::Healthy));
    const auto plan = exclude_cancer_side_views(
        assign_ensemble_folds(records, sets, {"u1"}, CurationStage::NoiseId, nullptr, 5), records);
    check_plan(plan, records);
    for (const auto& f : plan.folds) {
        for (const auto& v : f.training_views) {
            if (v.woman_id == "c1" || v.woman_id[0] == 'a') {
                CHECK((v.view_id.ends_with("RCC") || v.view_id.ends_with("RMLO")));
            } else {
                CHECK((v.view_id.ends_with("LCC") || v.view_id.ends_with("LMLO")));
            }
        }
    }
    // c1 trains in 4 of 5 folds with exactly its two right views
    int c1_views = 0;
    for (const auto& f : plan.folds) {
        c1_views += static_cast<int>(std::count_if(f.training_views.begin(), f.training_views.end(),
                                                   [](const ViewRef& v) { return v.woman_id == "c1"; }));
    }
    CHECK(c1_views == 8);
    // unmatched women validate only
    const int uf = plan.fold_of.at("u1");
    CHECK(std::count(plan.folds[uf].validation_women.begin(), plan.folds[uf].validation_women.end(), "u1") == 1);

    const auto empty = assign_ensemble_folds(records, {}, {"u1", "a1"}, CurationStage::NoiseId, nullptr, 5);
    CHECK(to_json(exclude_cancer_side_views(empty, records)) == to_json(empty));

    auto no_side = records;
    no_side[0].cancer_laterality.reset();
    const auto p = assign_ensemble_folds(no_side, sets, {}, CurationStage::NoiseId, nullptr, 5);
    CHECK(code_of([&] { exclude_cancer_side_views(p, no_side); }) == ErrorCode::MissingLaterality);
}

TEST_CASE("fold plans are leakage-free, balanced and deterministic on random cohorts") {
    Rng rng(808);
    for (int trial = 0; trial < 100; ++trial) {
        const auto records = random_cohort(rng, 400 + trial * 5, 0.035);
        const auto s = split(records);
        const auto m = match_case_controls(s.cases, s.healthy, trial);
        const auto unmatched = unmatched_ids(records, m);
        const bool filtered = trial % 2 == 1;
        const auto reference = random_reference(rng, records);
        const auto* ref = filtered ? &reference : nullptr;
        const auto stage = filtered ? CurationStage::Filtered : CurationStage::NoiseId;
        const auto plan = exclude_cancer_side_views(
            assign_ensemble_folds(records, m.sets, unmatched, stage, ref, trial), records);
        check_plan(plan, records);

        // per-stratum balance: recompute strata independently
        std::vector<double> ages;
        std::vector<double> risks;
        for (const auto& set : m.sets) {
            const auto& r = *std::find_if(records.begin(), records.end(),
                                          [&](const WomanRecord& w) { return w.woman_id == set.case_id; });
            ages.push_back(r.age_years);
            risks.push_back(reference.entries.at(set.case_id));
        }
        auto edges = [](std::vector<double> v, int q) {
            std::sort(v.begin(), v.end());
            std::vector<double> e;
            for (int j = 1; j < q && !v.empty(); ++j) {
                e.push_back(v[std::min<std::size_t>(std::lround(j * double(v.size()) / q), v.size() - 1)]);
            }
            return e;
        };
        const auto age_edges = edges(ages, 10);
        const auto risk_edges = edges(risks, 4);
        std::map<std::string, std::vector<int>> counts;
        std::map<std::string, std::vector<int>> group_counts;
        for (std::size_t i = 0; i < m.sets.size(); ++i) {
            const auto& r = *std::find_if(records.begin(), records.end(),
                                          [&](const WomanRecord& w) { return w.woman_id == m.sets[i].case_id; });
            const auto group = std::string(to_string(classify_outcome(r)));
            std::string key = group + "/" +
                              std::to_string(std::upper_bound(age_edges.begin(), age_edges.end(), ages[i]) -
                                             age_edges.begin());
            if (filtered) {
                key += "/" + std::to_string(std::upper_bound(risk_edges.begin(), risk_edges.end(), risks[i]) -
                                            risk_edges.begin());
            }
            counts[key].resize(5);
            group_counts[group].resize(5);
            ++counts[key][plan.fold_of.at(m.sets[i].case_id)];
            ++group_counts[group][plan.fold_of.at(m.sets[i].case_id)];
        }
        for (const auto& [key, c] : counts) {
            REQUIRE(*std::max_element(c.begin(), c.end()) - *std::min_element(c.begin(), c.end()) <= 1);
        }
        for (const auto& [key, c] : group_counts) {
            REQUIRE(*std::max_element(c.begin(), c.end()) - *std::min_element(c.begin(), c.end()) <= 1);
        }
        // every woman validates exactly once
        std::multiset<std::string> validated;
        for (const auto& f : plan.folds) validated.insert(f.validation_women.begin(), f.validation_women.end());
        REQUIRE(validated.size() == records.size());
        REQUIRE(std::set<std::string>(validated.begin(), validated.end()).size() == records.size());

        if (trial % 10 == 0) {
            const auto again = exclude_cancer_side_views(
                assign_ensemble_folds(records, m.sets, unmatched, stage, ref, trial), records);
            CHECK(to_json(again).dump() == to_json(plan).dump());
            CHECK(to_json(fold_plan_from_json(to_json(plan))).dump() == to_json(plan).dump());
        }
    }
}

TEST_CASE("noise filtering removes exact fractions") {
    std::vector<WomanRecord> records;
    ReferenceRiskTable ref;
    Rng rng(6);
    for (int i = 0; i < 1000; ++i) {
        records.push_back(make_woman("h" + std::to_string(i), 60, CancerGroup::Healthy));
        ref.entries[records.back().woman_id] = uniform01(rng);
    }
    for (int i = 0; i < 50; ++i) {
        records.push_back(make_woman("s" + std::to_string(i), 60, CancerGroup::SDC));
        ref.entries[records.back().woman_id] = uniform01(rng);
    }
    const auto r = filter_noisy_samples(records, ref);
    int healthy_removed = 0, sdc_removed = 0;
    double min_removed = 1, max_kept = 0;
    for (const auto& x : r.removed) {
        if (x.reason == "HighRiskHealthy") {
            ++healthy_removed;
            min_removed = std::min(min_removed, x.risk);
        } else {
            ++sdc_removed;
        }
    }
    for (const auto& k : r.kept) {
        if (k.woman_id[0] == 'h') max_kept = std::max(max_kept, ref.entries[k.woman_id]);
    }
    CHECK(healthy_removed == 100);
    CHECK(sdc_removed == 2);
    CHECK(min_removed >= max_kept);
    CHECK(r.kept.size() + r.removed.size() == records.size());

    std::vector<WomanRecord> ties;
    ReferenceRiskTable flat;
    for (int i = 9; i >= 0; --i) {
        ties.push_back(make_woman("t" + std::to_string(i), 60, CancerGroup::Healthy));
        flat.entries[ties.back().woman_id] = 0.3;
    }
    const auto t = filter_noisy_samples(ties, flat);
    REQUIRE(t.removed.size() == 1);
    CHECK(t.removed[0].record.woman_id == "t0");

    flat.entries.erase("t4");
    CHECK(code_of([&] { filter_noisy_samples(ties, flat); }) == ErrorCode::MissingReferenceRisk);
}

TEST_CASE("noise filtering matches a re-sorting oracle on random cohorts") {
    Rng rng(909);
    for (int trial = 0; trial < 100; ++trial) {
        const auto records = random_cohort(rng, 200 + static_cast<int>(uniform(rng, 0, 800)), 0.2);
        ReferenceRiskTable ref;
        // coarse risks force ties
        for (const auto& w : records) ref.entries[w.woman_id] = std::floor(uniform(rng, 0, 20)) / 20.0;
        const auto r = filter_noisy_samples(records, ref);

        std::map<CancerGroup, std::vector<std::pair<double, std::string>>> groups;
        for (const auto& w : records) groups[classify_outcome(w)].push_back({ref.entries[w.woman_id], w.woman_id});
        std::set<std::string> expected;
        for (auto& [g, items] : groups) {
            if (g == CancerGroup::Healthy) {
                std::sort(items.begin(), items.end(), [](const auto& a, const auto& b) {
                    return a.first != b.first ? a.first > b.first : a.second < b.second;
                });
                const std::size_t n = items.size() / 10;
                for (std::size_t k = 0; k < n; ++k) expected.insert(items[k].second);
            } else {
                std::sort(items.begin(), items.end());
                const std::size_t n = items.size() * 4 / 100;
                for (std::size_t k = 0; k < n; ++k) expected.insert(items[k].second);
            }
        }
        std::set<std::string> got;
        for (const auto& x : r.removed) got.insert(x.record.woman_id);
        REQUIRE(got == expected);
        REQUIRE(r.kept.size() + r.removed.size() == records.size());
    }
}
