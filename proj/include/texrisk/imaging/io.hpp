#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "texrisk/imaging/flavor.hpp"
#include "texrisk/imaging/view.hpp"

namespace texrisk::imaging {

// 16-bit grayscale PNG.
std::vector<unsigned char> encode_png16(const PixelGrid& pixels);
PixelGrid decode_png16(const std::vector<unsigned char>& bytes);
void write_png16(const std::filesystem::path& path, const PixelGrid& pixels);
PixelGrid read_png16(const std::filesystem::path& path);

nlohmann::json view_sidecar(const ViewImage& view);
void apply_sidecar(const nlohmann::json& sidecar, ViewImage& view);

nlohmann::json to_json(const FlavorProfile& profile);
// Throws ParameterOutOfRange on type errors; does not range-check.
FlavorProfile profile_from_json(const nlohmann::json& j);

// A profile set is a directory of <profile_id>.json documents, or a single
// JSON file holding an array of profiles.
std::vector<FlavorProfile> load_profiles(const std::filesystem::path& path);
void save_profile(const std::filesystem::path& dir, const FlavorProfile& profile);

// Directory of <view_id>.png + <view_id>.json pairs.
class ViewStore {
public:
    explicit ViewStore(std::filesystem::path root);

    const std::filesystem::path& root() const noexcept { return root_; }
    bool contains(const std::string& view_id) const;
    ViewImage load(const std::string& view_id) const;
    void save(const std::string& view_id, const ViewImage& view) const;
    std::vector<std::string> list_ids() const;

private:
    std::filesystem::path root_;
};

}  // namespace texrisk::imaging
