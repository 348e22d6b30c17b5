#pragma once

#include <array>
#include <chrono>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "texrisk/common/cancer_group.hpp"
#include "texrisk/imaging/view.hpp"

namespace texrisk::cohort {

using Date = std::chrono::year_month_day;
using imaging::Laterality;

Date parse_date(const std::string& iso);  // YYYY-MM-DD
std::string to_string(const Date& date);
Date add_days(const Date& date, long days);
long days_between(const Date& from, const Date& to);

enum class ExclusionFlag { VisibleArtifact, CorruptedView, PriorCancer, ContralateralClips, BilateralClips };

std::string to_string(ExclusionFlag flag);
ExclusionFlag parse_exclusion_flag(const std::string& text);

// Index order of WomanRecord::view_ids.
enum class ViewSlot { LCC = 0, LMLO = 1, RCC = 2, RMLO = 3 };
inline constexpr std::array<const char*, 4> kViewSlotNames{"LCC", "LMLO", "RCC", "RMLO"};

inline Laterality slot_laterality(int slot) { return slot < 2 ? Laterality::Left : Laterality::Right; }

struct WomanRecord {
    std::string woman_id;
    int age_years = 0;
    Date screen_date{};
    bool recalled = false;
    std::optional<Date> diagnosis_date;
    std::optional<Laterality> cancer_laterality;
    bool has_clips = false;
    double pmd = 0.0;
    std::set<ExclusionFlag> exclusion_flags;
    std::array<std::string, 4> view_ids;  // LCC, LMLO, RCC, RMLO

    bool operator==(const WomanRecord&) const = default;
};

// Throws InvalidDates or ParameterOutOfRange.
void validate_record(const WomanRecord& record);

nlohmann::json to_json(const WomanRecord& record);
WomanRecord record_from_json(const nlohmann::json& j);

// One record per line. Duplicate woman_ids are rejected.
std::vector<WomanRecord> read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const std::vector<WomanRecord>& records);

inline constexpr double kDaysPerMonth = 30.44;

// SDC: recalled and diagnosed within 6 months. IC: otherwise within 24
// months. LTC: 24 months or later. Healthy: no diagnosis.
CancerGroup classify_outcome(const WomanRecord& record);

}  // namespace texrisk::cohort
