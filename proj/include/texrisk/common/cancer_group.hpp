#pragma once

#include <string>
#include <string_view>

namespace texrisk {

enum class CancerGroup { Healthy, SDC, IC, LTC };

std::string_view to_string(CancerGroup group);
CancerGroup parse_cancer_group(std::string_view text);

inline bool is_cancer(CancerGroup group) { return group != CancerGroup::Healthy; }

}  // namespace texrisk
