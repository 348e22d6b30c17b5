#include "texrisk/pipeline/tuner.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <fstream>
#include <regex>

#include "httplib.h"
#include "texrisk/common/error.hpp"

namespace texrisk::pipeline {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string base64(const std::vector<unsigned char>& bytes) {
    std::string out(4 * ((bytes.size() + 2) / 3), '\0');
    const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), bytes.data(),
                                  static_cast<int>(bytes.size()));
    out.resize(static_cast<std::size_t>(n));
    return out;
}

void send_json(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& message) {
    send_json(res, status, {{"error", message}});
}

void send_field_errors(httplib::Response& res, const std::vector<imaging::FieldError>& errors) {
    json arr = json::array();
    for (const auto& e : errors) arr.push_back({{"field", e.field}, {"message", e.message}});
    send_json(res, 422, {{"errors", arr}});
}

// Field-level parsing so every problem is reported, not just the first.
std::vector<imaging::FieldError> parse_profile(const json& j, imaging::FlavorProfile& p, bool require_id) {
    std::vector<imaging::FieldError> errors;
    if (!j.is_object()) return {{"profile", "must be a JSON object"}};
    static const std::regex id_pattern("[A-Za-z0-9_.-]{1,64}");
    if (j.contains("profile_id")) {
        if (!j["profile_id"].is_string() || !std::regex_match(j["profile_id"].get<std::string>(), id_pattern))
            errors.push_back({"profile_id", "must be 1-64 characters from [A-Za-z0-9_.-]"});
        else
            p.profile_id = j["profile_id"].get<std::string>();
    } else if (require_id) {
        errors.push_back({"profile_id", "is required"});
    }
    auto number = [&](const char* key, double& target, bool required) {
        if (!j.contains(key)) {
            if (required) errors.push_back({key, "is required"});
            return;
        }
        if (!j[key].is_number()) {
            errors.push_back({key, "must be a number"});
            return;
        }
        target = j[key].get<double>();
    };
    number("alpha", p.alpha, true);
    number("beta", p.beta, true);
    number("gamma", p.gamma, true);
    number("delta", p.delta, true);
    number("lowpass_sigma_px", p.lowpass_sigma_px, false);
    number("edge_band_mm", p.edge_band_mm, false);
    number("interior_threshold_mm", p.interior_threshold_mm, false);
    if (j.contains("tone_map_mode")) {
        try {
            p.tone_map_mode = imaging::parse_tone_map_mode(j["tone_map_mode"].get<std::string>());
        } catch (const std::exception&) {
            errors.push_back({"tone_map_mode", "unknown tone map mode"});
        }
    }
    if (!errors.empty()) return errors;
    return imaging::validate_profile(p);
}

}  // namespace

std::vector<long> masked_histogram(const imaging::PixelGrid& pixels, const MaskGrid& mask, int bins) {
    if (!pixels.same_shape(mask)) throw Error(ErrorCode::LengthMismatch, "mask does not match the image");
    std::vector<long> hist(static_cast<std::size_t>(bins), 0);
    const double width = 4096.0 / bins;
    for (int r = 0; r < pixels.rows(); ++r)
        for (int c = 0; c < pixels.cols(); ++c) {
            if (!mask(r, c)) continue;
            const int b = std::min(bins - 1, static_cast<int>(pixels(r, c) / width));
            ++hist[static_cast<std::size_t>(b)];
        }
    return hist;
}

TunerService::TunerService(fs::path view_root, fs::path profile_dir, fs::path static_dir)
    : store_(std::move(view_root)),
      profile_dir_(std::move(profile_dir)),
      static_dir_(std::move(static_dir)),
      server_(std::make_unique<httplib::Server>()) {
    if (!fs::is_directory(store_.root())) throw Error(ErrorCode::Io, "no view store at " + store_.root().string());
    if (raw_view_ids().empty()) throw Error(ErrorCode::InvalidConfig, "view store holds no raw views");
    install_routes();
}

TunerService::~TunerService() { stop(); }

std::vector<std::string> TunerService::raw_view_ids() const {
    std::vector<std::string> ids;
    for (const auto& id : store_.list_ids()) {
        try {
            std::ifstream in(store_.root() / (id + ".json"));
            if (json::parse(in).value("format", "") == "raw") ids.push_back(id);
        } catch (const std::exception&) {
            // unreadable sidecar: not offered
        }
    }
    return ids;
}

int TunerService::bind(const std::string& host, int port) {
    if (port == 0) return server_->bind_to_any_port(host);
    return server_->bind_to_port(host, port) ? port : -1;
}

void TunerService::serve() { server_->listen_after_bind(); }

void TunerService::stop() {
    if (server_) server_->stop();
}

void TunerService::install_routes() {
    auto& s = *server_;
    s.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
        try {
            std::rethrow_exception(ep);
        } catch (const std::exception& e) {
            send_error(res, 500, e.what());
        } catch (...) {
            send_error(res, 500, "unknown error");
        }
    });

    s.Get("/api/views", [this](const httplib::Request&, httplib::Response& res) {
        send_json(res, 200, raw_view_ids());
    });

    s.Get(R"(/api/views/([^/]+)/raw)", [this](const httplib::Request& req, httplib::Response& res) {
        const std::string id = req.matches[1];
        const auto ids = raw_view_ids();
        if (std::find(ids.begin(), ids.end(), id) == ids.end()) return send_error(res, 404, "unknown view " + id);
        const auto png = imaging::encode_png16(store_.load(id).pixels);
        res.set_content(std::string(png.begin(), png.end()), "image/png");
    });

    s.Post("/api/preview", [this](const httplib::Request& req, httplib::Response& res) {
        json body;
        try {
            body = json::parse(req.body);
        } catch (const json::exception& e) {
            return send_error(res, 400, std::string("malformed JSON: ") + e.what());
        }
        if (!body.is_object() || !body.contains("view_id") || !body["view_id"].is_string())
            return send_field_errors(res, {{"view_id", "is required"}});
        const auto id = body["view_id"].get<std::string>();
        imaging::FlavorProfile profile;
        profile.profile_id = "preview";
        body.erase("view_id");
        if (auto errors = parse_profile(body, profile, false); !errors.empty()) return send_field_errors(res, errors);
        const auto ids = raw_view_ids();
        if (std::find(ids.begin(), ids.end(), id) == ids.end()) return send_error(res, 404, "unknown view " + id);
        imaging::FlavorResult out;
        try {
            out = imaging::flavorize_with_mask(store_.load(id), profile);
        } catch (const Error& e) {
            return send_field_errors(res, {{"view_id", std::string(to_string(e.code())) + ": " + e.message()}});
        }
        send_json(res, 200,
                  {{"view_id", id},
                   {"profile", imaging::to_json(profile)},
                   {"rows", out.view.pixels.rows()},
                   {"cols", out.view.pixels.cols()},
                   {"png", base64(imaging::encode_png16(out.view.pixels))},
                   {"histogram", masked_histogram(out.view.pixels, out.mask.mask)},
                   {"histogram_range", {0, 4095}}});
    });

    s.Get("/api/profiles", [this](const httplib::Request&, httplib::Response& res) {
        json arr = json::array();
        if (fs::is_directory(profile_dir_))
            for (const auto& p : imaging::load_profiles(profile_dir_)) arr.push_back(imaging::to_json(p));
        send_json(res, 200, arr);
    });

    s.Post("/api/profiles", [this](const httplib::Request& req, httplib::Response& res) {
        json body;
        try {
            body = json::parse(req.body);
        } catch (const json::exception& e) {
            return send_error(res, 400, std::string("malformed JSON: ") + e.what());
        }
        imaging::FlavorProfile profile;
        if (auto errors = parse_profile(body, profile, true); !errors.empty()) return send_field_errors(res, errors);
        {
            std::lock_guard lock(save_mutex_);
            imaging::save_profile(profile_dir_, profile);
        }
        send_json(res, 201, imaging::to_json(profile));
    });

    if (!static_dir_.empty() && fs::is_directory(static_dir_)) {
        s.set_mount_point("/", static_dir_.string());
    } else {
        s.Get("/", [](const httplib::Request&, httplib::Response& res) {
            res.set_content("texrisk tuner API: /api/views, /api/preview, /api/profiles\n", "text/plain");
        });
    }
}

}  // namespace texrisk::pipeline
