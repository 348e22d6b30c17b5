#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "json.hpp"
#include "texrisk/cohort/records.hpp"
#include "texrisk/imaging/flavor.hpp"
#include "texrisk/imaging/geometry.hpp"
#include "texrisk/imaging/io.hpp"
#include "texrisk/imaging/standardization.hpp"
#include "texrisk/scoring/features.hpp"
#include "texrisk/synth/phantom.hpp"

namespace texrisk::pipeline {

class ViewSource {
public:
    virtual ~ViewSource() = default;
    virtual imaging::ViewImage load(const std::string& view_id) const = 0;
};

class StoreViewSource : public ViewSource {
public:
    explicit StoreViewSource(std::filesystem::path root) : store_(std::move(root)) {}
    imaging::ViewImage load(const std::string& view_id) const override { return store_.load(view_id); }

private:
    imaging::ViewStore store_;
};

class MemoryViewSource : public ViewSource {
public:
    void add(const std::string& view_id, imaging::ViewImage view) { views_[view_id] = std::move(view); }
    imaging::ViewImage load(const std::string& view_id) const override;
    std::size_t size() const { return views_.size(); }

private:
    std::map<std::string, imaging::ViewImage> views_;
};

struct Dataset {
    std::string name;
    std::vector<cohort::WomanRecord> records;
    std::shared_ptr<const ViewSource> views;
};

// Manifest next to a view store: <dir>/manifest.jsonl and <dir>/views.
Dataset load_dataset(const std::string& name, const std::filesystem::path& manifest,
                     const std::filesystem::path& view_root);

// Phantom cohort generated straight into memory, no view store on disk.
Dataset phantom_dataset(const std::string& name, const synth::PhantomConfig& config, int workers = 1);

// What a dataset is presented as: stored raw views, raw views flavorized
// with one of a set of profiles, or stored vendor-processed views.
struct DataFormat {
    enum class Kind { Raw, FlavorSet, Processed };
    Kind kind = Kind::Raw;
    std::vector<imaging::FlavorProfile> profiles;

    static DataFormat raw() { return {}; }
    static DataFormat processed() { return {Kind::Processed, {}}; }
    static DataFormat flavors(std::vector<imaging::FlavorProfile> profiles);

    std::size_t count() const { return kind == Kind::FlavorSet ? profiles.size() : 1; }
    // Only the i-th member.
    DataFormat member(std::size_t i) const;
    std::string label() const;  // "raw", "processed", "flavor1", "flavor1..flavor6"
};

// "raw", "processed", or {"flavors": [ids]} resolved against `profiles`.
DataFormat parse_data_format(const nlohmann::json& j, const std::vector<imaging::FlavorProfile>& profiles);
nlohmann::json to_json(const DataFormat& format);

// The i-th presentation of a stored view.
imaging::ViewImage render(const imaging::ViewImage& stored, const DataFormat& format, std::size_t index);

struct PreparationOptions {
    imaging::Canvas canvas = imaging::desk_canvas();
    int augmentations = 2;  // per view and format, the first is the identity
    int standardization_sample = 1000;
    int workers = 1;
};

imaging::GeometricAugmentation view_augmentation(const std::string& view_id, int k, std::uint64_t seed);

// Pooled over a seeded sample of (view, format member) canvases.
imaging::StandardizationStats sample_standardization(const ViewSource& source, const std::vector<std::string>& view_ids,
                                                     const DataFormat& format, const PreparationOptions& options,
                                                     std::uint64_t seed);

// features[view_id][member][k]
using FeatureTable = std::map<std::string, std::vector<std::vector<scoring::FeatureVector>>>;

// Memoizes features across experiments sharing a dataset.
class FeatureCache {
public:
    bool lookup(const std::string& key, scoring::FeatureVector& out) const;
    void store(const std::string& key, const scoring::FeatureVector& f);
    std::size_t size() const;

private:
    mutable std::mutex mutex_;
    std::map<std::string, scoring::FeatureVector> entries_;
};

FeatureTable prepare_features(const Dataset& dataset, const std::vector<std::string>& view_ids,
                              const DataFormat& format, int augmentations, const imaging::StandardizationStats& stats,
                              const PreparationOptions& options, std::uint64_t seed, FeatureCache* cache = nullptr);

}  // namespace texrisk::pipeline
