#include "texrisk/pipeline/dataset.hpp"

#include <cstdio>
#include <set>

#include "texrisk/common/error.hpp"
#include "texrisk/common/parallel.hpp"
#include "texrisk/common/random.hpp"
#include "texrisk/scoring/ensemble.hpp"

namespace texrisk::pipeline {

using nlohmann::json;

imaging::ViewImage MemoryViewSource::load(const std::string& view_id) const {
    auto it = views_.find(view_id);
    if (it == views_.end()) throw Error(ErrorCode::Io, "unknown view " + view_id);
    return it->second;
}

Dataset load_dataset(const std::string& name, const std::filesystem::path& manifest,
                     const std::filesystem::path& view_root) {
    Dataset d;
    d.name = name;
    d.records = cohort::read_manifest(manifest);
    if (!std::filesystem::is_directory(view_root)) throw Error(ErrorCode::Io, "no view store at " + view_root.string());
    d.views = std::make_shared<StoreViewSource>(view_root);
    return d;
}

Dataset phantom_dataset(const std::string& name, const synth::PhantomConfig& config, int workers) {
    synth::validate_config(config);
    std::vector<synth::WomanPhantom> women(static_cast<std::size_t>(config.n_women));
    parallel_for(women.size(), workers, [&](std::size_t i) { women[i] = synth::generate_woman(config, static_cast<int>(i)); });
    auto source = std::make_shared<MemoryViewSource>();
    Dataset d;
    d.name = name;
    for (auto& w : women) {
        for (std::size_t s = 0; s < 4; ++s) source->add(w.record.view_ids[s], std::move(w.views[s]));
        d.records.push_back(std::move(w.record));
    }
    d.views = source;
    return d;
}

DataFormat DataFormat::flavors(std::vector<imaging::FlavorProfile> profiles) {
    if (profiles.empty()) throw Error(ErrorCode::InvalidConfig, "flavor set is empty");
    std::set<std::string> ids;
    for (const auto& p : profiles) {
        imaging::require_valid_profile(p);
        if (!ids.insert(p.profile_id).second) throw Error(ErrorCode::InvalidConfig, "duplicate profile " + p.profile_id);
    }
    return {Kind::FlavorSet, std::move(profiles)};
}

DataFormat DataFormat::member(std::size_t i) const {
    if (i >= count()) throw Error(ErrorCode::ParameterOutOfRange, "format member out of range");
    if (kind != Kind::FlavorSet) return *this;
    return {Kind::FlavorSet, {profiles[i]}};
}

std::string DataFormat::label() const {
    switch (kind) {
        case Kind::Raw:
            return "raw";
        case Kind::Processed:
            return "processed";
        case Kind::FlavorSet:
            break;
    }
    if (profiles.size() == 1) return profiles.front().profile_id;
    return profiles.front().profile_id + ".." + profiles.back().profile_id;
}

DataFormat parse_data_format(const json& j, const std::vector<imaging::FlavorProfile>& profiles) {
    if (j.is_string()) {
        const auto s = j.get<std::string>();
        if (s == "raw") return DataFormat::raw();
        if (s == "processed") return DataFormat::processed();
        throw Error(ErrorCode::InvalidConfig, "unknown format '" + s + "'");
    }
    if (!j.is_object() || !j.contains("flavors") || !j["flavors"].is_array()) {
        throw Error(ErrorCode::InvalidConfig, "format must be \"raw\", \"processed\" or {\"flavors\": [...]}");
    }
    std::vector<imaging::FlavorProfile> chosen;
    for (const auto& id : j["flavors"]) {
        const auto want = id.get<std::string>();
        auto it = std::find_if(profiles.begin(), profiles.end(), [&](const auto& p) { return p.profile_id == want; });
        if (it == profiles.end()) throw Error(ErrorCode::InvalidConfig, "unknown flavor profile '" + want + "'");
        chosen.push_back(*it);
    }
    return DataFormat::flavors(std::move(chosen));
}

json to_json(const DataFormat& f) {
    switch (f.kind) {
        case DataFormat::Kind::Raw:
            return "raw";
        case DataFormat::Kind::Processed:
            return "processed";
        case DataFormat::Kind::FlavorSet:
            break;
    }
    json ids = json::array();
    for (const auto& p : f.profiles) ids.push_back(p.profile_id);
    return {{"flavors", ids}};
}

imaging::ViewImage render(const imaging::ViewImage& stored, const DataFormat& format, std::size_t index) {
    switch (format.kind) {
        case DataFormat::Kind::Raw:
            if (!stored.format.is_raw()) throw Error(ErrorCode::InvalidConfig, "raw format requested for a processed view");
            return stored;
        case DataFormat::Kind::Processed:
            if (stored.format.is_raw()) throw Error(ErrorCode::InvalidConfig, "processed format requested for a raw view");
            return stored;
        case DataFormat::Kind::FlavorSet:
            break;
    }
    if (index >= format.profiles.size()) throw Error(ErrorCode::ParameterOutOfRange, "flavor index");
    return imaging::flavorize(stored, format.profiles[index]);
}

namespace {

std::uint64_t text_hash(const std::string& s) {
    std::uint64_t h = 1469598103934665603ULL;  // FNV-1a
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::string stats_tag(const imaging::StandardizationStats& s) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g/%.17g", s.mean, s.std);
    return buf;
}

std::string canvas_tag(const imaging::Canvas& c) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g/%d/%d", c.spacing_mm, c.rows, c.cols);
    return buf;
}

}  // namespace

imaging::GeometricAugmentation view_augmentation(const std::string& view_id, int k, std::uint64_t seed) {
    if (k == 0) return {};
    return imaging::sample_augmentation(mix_seed(mix_seed(seed, text_hash(view_id)), static_cast<std::uint64_t>(k)));
}

imaging::StandardizationStats sample_standardization(const ViewSource& source, const std::vector<std::string>& view_ids,
                                                     const DataFormat& format, const PreparationOptions& options,
                                                     std::uint64_t seed) {
    if (view_ids.empty()) throw Error(ErrorCode::NoViews, "no views to standardize");
    const std::size_t members = format.count();
    const auto picked = imaging::sample_view_indices(view_ids.size() * members,
                                                     static_cast<std::size_t>(std::max(1, options.standardization_sample)),
                                                     seed);
    std::vector<RealGrid> grids(picked.size());
    parallel_for(picked.size(), options.workers, [&](std::size_t i) {
        const auto& id = view_ids[picked[i] / members];
        const auto view = render(source.load(id), format, picked[i] % members);
        grids[i] = scoring::to_canvas(view, options.canvas).pixels;
    });
    std::vector<const RealGrid*> ptrs;
    for (const auto& g : grids) ptrs.push_back(&g);
    return imaging::pooled_stats(ptrs);
}

bool FeatureCache::lookup(const std::string& key, scoring::FeatureVector& out) const {
    std::lock_guard lock(mutex_);
    auto it = entries_.find(key);
    if (it == entries_.end()) return false;
    out = it->second;
    return true;
}

void FeatureCache::store(const std::string& key, const scoring::FeatureVector& f) {
    std::lock_guard lock(mutex_);
    entries_[key] = f;
}

std::size_t FeatureCache::size() const {
    std::lock_guard lock(mutex_);
    return entries_.size();
}

FeatureTable prepare_features(const Dataset& dataset, const std::vector<std::string>& view_ids,
                              const DataFormat& format, int augmentations, const imaging::StandardizationStats& stats,
                              const PreparationOptions& options, std::uint64_t seed, FeatureCache* cache) {
    if (augmentations < 1) throw Error(ErrorCode::InvalidConfig, "augmentations must be >= 1");
    const std::size_t members = format.count();
    std::vector<std::vector<std::vector<scoring::FeatureVector>>> out(
        view_ids.size(), std::vector<std::vector<scoring::FeatureVector>>(members));
    const std::string prefix = dataset.name + "|" + stats_tag(stats) + "|" + canvas_tag(options.canvas) + "|" +
                               std::to_string(seed) + "|";
    parallel_for(view_ids.size() * members, options.workers, [&](std::size_t task) {
        const std::size_t v = task / members;
        const std::size_t m = task % members;
        const auto& id = view_ids[v];
        const std::string key_base = prefix + format.member(m).label() + "|" + id + "|";
        auto& slot = out[v][m];
        slot.resize(static_cast<std::size_t>(augmentations));
        std::vector<int> missing;
        for (int k = 0; k < augmentations; ++k) {
            if (!cache || !cache->lookup(key_base + std::to_string(k), slot[k])) missing.push_back(k);
        }
        if (missing.empty()) return;
        const auto view = render(dataset.views->load(id), format, m);
        for (int k : missing) {
            const auto canvas = scoring::to_canvas(view, options.canvas, view_augmentation(id, k, seed), id);
            const auto standardized = scoring::standardize(canvas, stats);
            try {
                slot[k] = scoring::extract_features(standardized.pixels, standardized.mask);
            } catch (const Error& e) {
                throw Error(e.code(), "view " + id + ": " + e.message());
            }
            if (cache) cache->store(key_base + std::to_string(k), slot[k]);
        }
    });
    FeatureTable table;
    for (std::size_t v = 0; v < view_ids.size(); ++v) table[view_ids[v]] = std::move(out[v]);
    return table;
}

}  // namespace texrisk::pipeline
