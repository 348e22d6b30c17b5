#include "texrisk/common/cancer_group.hpp"

#include "texrisk/common/error.hpp"

namespace texrisk {

std::string_view to_string(CancerGroup group) {
    switch (group) {
        case CancerGroup::Healthy: return "Healthy";
        case CancerGroup::SDC: return "SDC";
        case CancerGroup::IC: return "IC";
        case CancerGroup::LTC: return "LTC";
    }
    return "?";
}

CancerGroup parse_cancer_group(std::string_view text) {
    for (auto g : {CancerGroup::Healthy, CancerGroup::SDC, CancerGroup::IC, CancerGroup::LTC}) {
        if (text == to_string(g)) return g;
    }
    throw Error(ErrorCode::InvalidConfig, "unknown cancer group '" + std::string(text) + "'");
}

}  // namespace texrisk
