#pragma once

#include <string>
#include <vector>

#include "texrisk/cohort/records.hpp"
#include "texrisk/common/random.hpp"

namespace texrisk::testing {

inline cohort::WomanRecord make_woman(const std::string& id, int age, CancerGroup group,
                                      imaging::Laterality side = imaging::Laterality::Left) {
    cohort::WomanRecord r;
    r.woman_id = id;
    r.age_years = age;
    r.screen_date = cohort::parse_date("2012-03-01");
    r.pmd = 0.2;
    for (int s = 0; s < 4; ++s) r.view_ids[s] = id + "_" + cohort::kViewSlotNames[s];
    switch (group) {
        case CancerGroup::Healthy: return r;
        case CancerGroup::SDC:
            r.recalled = true;
            r.diagnosis_date = cohort::add_days(r.screen_date, 60);
            break;
        case CancerGroup::IC: r.diagnosis_date = cohort::add_days(r.screen_date, 400); break;
        case CancerGroup::LTC: r.diagnosis_date = cohort::add_days(r.screen_date, 1200); break;
    }
    r.cancer_laterality = side;
    return r;
}

// Random cohort with ages 50-69 and the given case prevalence.
inline std::vector<cohort::WomanRecord> random_cohort(Rng& rng, int n, double case_rate) {
    std::vector<cohort::WomanRecord> out;
    const CancerGroup groups[] = {CancerGroup::SDC, CancerGroup::IC, CancerGroup::LTC};
    for (int i = 0; i < n; ++i) {
        const int age = 50 + static_cast<int>(uniform(rng, 0, 20));
        const bool is_case = uniform01(rng) < case_rate;
        const auto group = is_case ? groups[static_cast<int>(uniform(rng, 0, 3))] : CancerGroup::Healthy;
        const auto side = uniform01(rng) < 0.5 ? imaging::Laterality::Left : imaging::Laterality::Right;
        char id[16];
        std::snprintf(id, sizeof id, "w%05d", i);
        auto r = make_woman(id, age, group, side);
        r.pmd = uniform01(rng);
        out.push_back(r);
    }
    return out;
}

}  // namespace texrisk::testing
