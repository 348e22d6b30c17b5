#include "texrisk/imaging/view.hpp"

#include "texrisk/common/error.hpp"

namespace texrisk::imaging {

std::string to_string(const ViewFormat& format) {
    switch (format.kind) {
        case ViewFormat::Kind::Raw: return "raw";
        case ViewFormat::Kind::VendorProcessed: return "processed";
        case ViewFormat::Kind::Flavor: return "flavor:" + format.profile_id;
    }
    return "raw";
}

ViewFormat parse_view_format(const std::string& tag) {
    if (tag == "raw") return ViewFormat::raw();
    if (tag == "processed") return ViewFormat::processed();
    if (tag.rfind("flavor:", 0) == 0 && tag.size() > 7) return ViewFormat::flavor(tag.substr(7));
    throw Error(ErrorCode::InvalidConfig, "unknown view format tag '" + tag + "'");
}

std::string to_string(Laterality laterality) { return laterality == Laterality::Left ? "Left" : "Right"; }

Laterality parse_laterality(const std::string& text) {
    if (text == "Left" || text == "L") return Laterality::Left;
    if (text == "Right" || text == "R") return Laterality::Right;
    throw Error(ErrorCode::InvalidConfig, "unknown laterality '" + text + "'");
}

std::string to_string(ViewPosition position) { return position == ViewPosition::CC ? "CC" : "MLO"; }

ViewPosition parse_view_position(const std::string& text) {
    if (text == "CC") return ViewPosition::CC;
    if (text == "MLO") return ViewPosition::MLO;
    throw Error(ErrorCode::InvalidConfig, "unknown view position '" + text + "'");
}

void validate_view(const ViewImage& view) {
    if (!(view.pixel_spacing_mm > 0.0)) {
        throw Error(ErrorCode::ParameterOutOfRange, "pixel_spacing_mm must be positive");
    }
    for (auto v : view.pixels.values()) {
        if (v > view.i_max) throw Error(ErrorCode::ParameterOutOfRange, "pixel exceeds i_max");
    }
}

ViewImage flip_horizontal(const ViewImage& view) {
    ViewImage out = view;
    out.pixels = flip_horizontal(view.pixels);
    return out;
}

}  // namespace texrisk::imaging
