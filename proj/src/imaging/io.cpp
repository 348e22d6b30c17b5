#include "texrisk/imaging/io.hpp"

#include <png.h>

#include <algorithm>
#include <cstring>
#include <fstream>

#include "texrisk/common/error.hpp"

namespace texrisk::imaging {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct ReadCursor {
    const std::vector<unsigned char>* bytes;
    std::size_t offset;
};

void png_read_from_vector(png_structp png, png_bytep out, png_size_t length) {
    auto* cursor = static_cast<ReadCursor*>(png_get_io_ptr(png));
    if (cursor->offset + length > cursor->bytes->size()) png_error(png, "truncated PNG");
    std::memcpy(out, cursor->bytes->data() + cursor->offset, length);
    cursor->offset += length;
}

void png_write_to_vector(png_structp png, png_bytep data, png_size_t length) {
    auto* out = static_cast<std::vector<unsigned char>*>(png_get_io_ptr(png));
    out->insert(out->end(), data, data + length);
}

void png_flush_noop(png_structp) {}

std::vector<unsigned char> read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const fs::path& path, const std::vector<unsigned char>& bytes) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

template <typename T>
T get_field(const json& j, const char* key) {
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw Error(ErrorCode::ParameterOutOfRange, std::string(key) + ": " + e.what());
    }
}

}  // namespace

std::vector<unsigned char> encode_png16(const PixelGrid& pixels) {
    std::vector<unsigned char> out;
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, &info);
        throw Error(ErrorCode::Io, "libpng initialisation failed");
    }
    std::vector<unsigned char> row(static_cast<std::size_t>(pixels.cols()) * 2);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw Error(ErrorCode::Io, "PNG encoding failed");
    }
    png_set_write_fn(png, &out, png_write_to_vector, png_flush_noop);
    png_set_IHDR(png, info, static_cast<png_uint_32>(pixels.cols()), static_cast<png_uint_32>(pixels.rows()), 16,
                 PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (int r = 0; r < pixels.rows(); ++r) {
        for (int c = 0; c < pixels.cols(); ++c) {
            const std::uint16_t v = pixels(r, c);
            row[static_cast<std::size_t>(2 * c)] = static_cast<unsigned char>(v >> 8);
            row[static_cast<std::size_t>(2 * c + 1)] = static_cast<unsigned char>(v & 0xFF);
        }
        png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    return out;
}

PixelGrid decode_png16(const std::vector<unsigned char>& bytes) {
    if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0) throw Error(ErrorCode::Io, "not a PNG stream");
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw Error(ErrorCode::Io, "libpng initialisation failed");
    }
    PixelGrid pixels;
    std::vector<unsigned char> row;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw Error(ErrorCode::Io, "PNG decoding failed");
    }
    ReadCursor cursor{&bytes, 0};
    png_set_read_fn(png, &cursor, png_read_from_vector);
    png_read_info(png, info);
    const int width = static_cast<int>(png_get_image_width(png, info));
    const int height = static_cast<int>(png_get_image_height(png, info));
    const int depth = png_get_bit_depth(png, info);
    const int color = png_get_color_type(png, info);
    if (color != PNG_COLOR_TYPE_GRAY) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw Error(ErrorCode::Io, "expected a grayscale PNG");
    }
    if (depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    png_read_update_info(png, info);
    const std::size_t rowbytes = png_get_rowbytes(png, info);
    row.resize(rowbytes);
    pixels = PixelGrid(height, width, 0);
    for (int r = 0; r < height; ++r) {
        png_read_row(png, row.data(), nullptr);
        for (int c = 0; c < width; ++c) {
            pixels(r, c) = depth == 16 ? static_cast<std::uint16_t>((row[static_cast<std::size_t>(2 * c)] << 8) |
                                                                    row[static_cast<std::size_t>(2 * c + 1)])
                                       : row[static_cast<std::size_t>(c)];
        }
    }
    png_destroy_read_struct(&png, &info, nullptr);
    return pixels;
}

void write_png16(const fs::path& path, const PixelGrid& pixels) { write_file(path, encode_png16(pixels)); }

PixelGrid read_png16(const fs::path& path) { return decode_png16(read_file(path)); }

json view_sidecar(const ViewImage& view) {
    return json{{"pixel_spacing_mm", view.pixel_spacing_mm},
                {"laterality", to_string(view.laterality)},
                {"view_position", to_string(view.view_position)},
                {"format", to_string(view.format)},
                {"i_max", view.i_max},
                {"width_px", view.width_px()},
                {"height_px", view.height_px()}};
}

void apply_sidecar(const json& sidecar, ViewImage& view) {
    view.pixel_spacing_mm = get_field<double>(sidecar, "pixel_spacing_mm");
    view.laterality = parse_laterality(get_field<std::string>(sidecar, "laterality"));
    view.view_position = parse_view_position(get_field<std::string>(sidecar, "view_position"));
    view.format = parse_view_format(get_field<std::string>(sidecar, "format"));
    view.i_max = sidecar.value("i_max", view.format.is_raw() ? 65535 : kProcessedMax);
}

json to_json(const FlavorProfile& p) {
    return json{{"profile_id", p.profile_id},
                {"alpha", p.alpha},
                {"beta", p.beta},
                {"gamma", p.gamma},
                {"delta", p.delta},
                {"tone_map_mode", to_string(p.tone_map_mode)},
                {"lowpass_sigma_px", p.lowpass_sigma_px},
                {"edge_band_mm", p.edge_band_mm},
                {"interior_threshold_mm", p.interior_threshold_mm}};
}

FlavorProfile profile_from_json(const json& j) {
    if (!j.is_object()) throw Error(ErrorCode::ParameterOutOfRange, "profile must be a JSON object");
    FlavorProfile p;
    p.profile_id = get_field<std::string>(j, "profile_id");
    p.alpha = get_field<double>(j, "alpha");
    p.beta = get_field<double>(j, "beta");
    p.gamma = get_field<double>(j, "gamma");
    p.delta = get_field<double>(j, "delta");
    if (j.contains("tone_map_mode")) p.tone_map_mode = parse_tone_map_mode(get_field<std::string>(j, "tone_map_mode"));
    if (j.contains("lowpass_sigma_px")) p.lowpass_sigma_px = get_field<double>(j, "lowpass_sigma_px");
    if (j.contains("edge_band_mm")) p.edge_band_mm = get_field<double>(j, "edge_band_mm");
    if (j.contains("interior_threshold_mm")) p.interior_threshold_mm = get_field<double>(j, "interior_threshold_mm");
    return p;
}

std::vector<FlavorProfile> load_profiles(const fs::path& path) {
    std::vector<FlavorProfile> profiles;
    auto parse_file = [](const fs::path& file) {
        const auto bytes = read_file(file);
        try {
            return json::parse(bytes.begin(), bytes.end());
        } catch (const json::exception& e) {
            throw Error(ErrorCode::InvalidConfig, file.string() + ": " + e.what());
        }
    };
    if (fs::is_directory(path)) {
        std::vector<fs::path> files;
        for (const auto& entry : fs::directory_iterator(path)) {
            if (entry.path().extension() == ".json") files.push_back(entry.path());
        }
        std::sort(files.begin(), files.end());
        for (const auto& f : files) profiles.push_back(profile_from_json(parse_file(f)));
    } else {
        const json j = parse_file(path);
        if (j.is_array()) {
            for (const auto& item : j) profiles.push_back(profile_from_json(item));
        } else {
            profiles.push_back(profile_from_json(j));
        }
    }
    for (std::size_t i = 0; i < profiles.size(); ++i) {
        for (std::size_t k = 0; k < i; ++k) {
            if (profiles[i].profile_id == profiles[k].profile_id) {
                throw Error(ErrorCode::InvalidConfig, "duplicate profile_id '" + profiles[i].profile_id + "'");
            }
        }
    }
    return profiles;
}

void save_profile(const fs::path& dir, const FlavorProfile& profile) {
    require_valid_profile(profile);
    fs::create_directories(dir);
    const std::string text = to_json(profile).dump(2) + "\n";
    write_file(dir / (profile.profile_id + ".json"), std::vector<unsigned char>(text.begin(), text.end()));
}

ViewStore::ViewStore(fs::path root) : root_(std::move(root)) {}

bool ViewStore::contains(const std::string& view_id) const {
    return fs::exists(root_ / (view_id + ".png")) && fs::exists(root_ / (view_id + ".json"));
}

ViewImage ViewStore::load(const std::string& view_id) const {
    if (!contains(view_id)) throw Error(ErrorCode::Io, "view '" + view_id + "' not found in " + root_.string());
    ViewImage view;
    view.pixels = read_png16(root_ / (view_id + ".png"));
    const auto bytes = read_file(root_ / (view_id + ".json"));
    apply_sidecar(json::parse(bytes.begin(), bytes.end()), view);
    return view;
}

void ViewStore::save(const std::string& view_id, const ViewImage& view) const {
    fs::create_directories(root_);
    write_png16(root_ / (view_id + ".png"), view.pixels);
    const std::string text = view_sidecar(view).dump(2) + "\n";
    write_file(root_ / (view_id + ".json"), std::vector<unsigned char>(text.begin(), text.end()));
}

std::vector<std::string> ViewStore::list_ids() const {
    std::vector<std::string> ids;
    if (!fs::is_directory(root_)) return ids;
    for (const auto& entry : fs::directory_iterator(root_)) {
        if (entry.path().extension() == ".png" && fs::exists(fs::path(entry.path()).replace_extension(".json"))) {
            ids.push_back(entry.path().stem().string());
        }
    }
    std::sort(ids.begin(), ids.end());
    return ids;
}

}  // namespace texrisk::imaging
