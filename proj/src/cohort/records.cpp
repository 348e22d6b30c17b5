#include "texrisk/cohort/records.hpp"

#include <cstdio>
#include <fstream>
#include <unordered_set>

#include "texrisk/common/error.hpp"

namespace texrisk::cohort {

using nlohmann::json;
namespace chr = std::chrono;

Date parse_date(const std::string& iso) {
    int y = 0;
    unsigned m = 0;
    unsigned d = 0;
    char tail = 0;
    if (std::sscanf(iso.c_str(), "%d-%u-%u%c", &y, &m, &d, &tail) != 3) {
        throw Error(ErrorCode::InvalidDates, "malformed date '" + iso + "'");
    }
    const Date date{chr::year(y), chr::month(m), chr::day(d)};
    if (!date.ok()) throw Error(ErrorCode::InvalidDates, "invalid date '" + iso + "'");
    return date;
}

std::string to_string(const Date& date) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(date.year()),
                  static_cast<unsigned>(date.month()), static_cast<unsigned>(date.day()));
    return buf;
}

Date add_days(const Date& date, long days) { return Date(chr::sys_days(date) + chr::days(days)); }

long days_between(const Date& from, const Date& to) {
    return (chr::sys_days(to) - chr::sys_days(from)).count();
}

std::string to_string(ExclusionFlag flag) {
    switch (flag) {
        case ExclusionFlag::VisibleArtifact: return "VisibleArtifact";
        case ExclusionFlag::CorruptedView: return "CorruptedView";
        case ExclusionFlag::PriorCancer: return "PriorCancer";
        case ExclusionFlag::ContralateralClips: return "ContralateralClips";
        case ExclusionFlag::BilateralClips: return "BilateralClips";
    }
    return "?";
}

ExclusionFlag parse_exclusion_flag(const std::string& text) {
    for (auto f : {ExclusionFlag::VisibleArtifact, ExclusionFlag::CorruptedView, ExclusionFlag::PriorCancer,
                   ExclusionFlag::ContralateralClips, ExclusionFlag::BilateralClips}) {
        if (text == to_string(f)) return f;
    }
    throw Error(ErrorCode::InvalidConfig, "unknown exclusion flag '" + text + "'");
}

void validate_record(const WomanRecord& r) {
    if (r.woman_id.empty()) throw Error(ErrorCode::InvalidConfig, "empty woman_id");
    if (!r.screen_date.ok()) throw Error(ErrorCode::InvalidDates, r.woman_id + ": bad screen date");
    if (r.diagnosis_date && days_between(r.screen_date, *r.diagnosis_date) < 0) {
        throw Error(ErrorCode::InvalidDates, r.woman_id + ": diagnosis precedes screening");
    }
    if (!(r.pmd >= 0.0 && r.pmd <= 1.0)) throw Error(ErrorCode::ParameterOutOfRange, r.woman_id + ": pmd outside [0,1]");
}

json to_json(const WomanRecord& r) {
    json flags = json::array();
    for (auto f : r.exclusion_flags) flags.push_back(to_string(f));
    return {{"woman_id", r.woman_id},
            {"age_years", r.age_years},
            {"screen_date", to_string(r.screen_date)},
            {"recalled", r.recalled},
            {"diagnosis_date", r.diagnosis_date ? json(to_string(*r.diagnosis_date)) : json(nullptr)},
            {"cancer_laterality",
             r.cancer_laterality ? json(imaging::to_string(*r.cancer_laterality)) : json(nullptr)},
            {"has_clips", r.has_clips},
            {"pmd", r.pmd},
            {"exclusion_flags", flags},
            {"view_ids", r.view_ids}};
}

WomanRecord record_from_json(const json& j) {
    try {
        WomanRecord r;
        r.woman_id = j.at("woman_id").get<std::string>();
        r.age_years = j.at("age_years").get<int>();
        r.screen_date = parse_date(j.at("screen_date").get<std::string>());
        r.recalled = j.at("recalled").get<bool>();
        if (j.contains("diagnosis_date") && !j["diagnosis_date"].is_null()) {
            r.diagnosis_date = parse_date(j["diagnosis_date"].get<std::string>());
        }
        if (j.contains("cancer_laterality") && !j["cancer_laterality"].is_null()) {
            r.cancer_laterality = imaging::parse_laterality(j["cancer_laterality"].get<std::string>());
        }
        r.has_clips = j.value("has_clips", false);
        r.pmd = j.at("pmd").get<double>();
        for (const auto& f : j.value("exclusion_flags", json::array())) {
            r.exclusion_flags.insert(parse_exclusion_flag(f.get<std::string>()));
        }
        r.view_ids = j.at("view_ids").get<std::array<std::string, 4>>();
        validate_record(r);
        return r;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::InvalidConfig, std::string("manifest record: ") + e.what());
    }
}

std::vector<WomanRecord> read_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::Io, "cannot open manifest " + path.string());
    std::vector<WomanRecord> records;
    std::unordered_set<std::string> ids;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw Error(ErrorCode::InvalidConfig, path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
        auto record = record_from_json(j);
        if (!ids.insert(record.woman_id).second) {
            throw Error(ErrorCode::InvalidConfig, "duplicate woman_id " + record.woman_id);
        }
        records.push_back(std::move(record));
    }
    return records;
}

void write_manifest(const std::filesystem::path& path, const std::vector<WomanRecord>& records) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::Io, "cannot write manifest " + path.string());
    for (const auto& r : records) out << to_json(r).dump() << '\n';
}

CancerGroup classify_outcome(const WomanRecord& record) {
    if (!record.diagnosis_date) return CancerGroup::Healthy;
    const long days = days_between(record.screen_date, *record.diagnosis_date);
    if (days < 0) throw Error(ErrorCode::InvalidDates, record.woman_id + ": diagnosis precedes screening");
    const double months = static_cast<double>(days) / kDaysPerMonth;
    if (record.recalled && months <= 6.0) return CancerGroup::SDC;
    if (months < 24.0) return CancerGroup::IC;
    return CancerGroup::LTC;
}

}  // namespace texrisk::cohort
