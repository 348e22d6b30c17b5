#include <openssl/evp.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <numeric>
#include <thread>

#include <unistd.h>

#include "doctest.h"
#include "httplib.h"
#include "texrisk/common/error.hpp"
#include "texrisk/imaging/distance.hpp"
#include "texrisk/imaging/flavor.hpp"
#include "texrisk/imaging/io.hpp"
#include "texrisk/pipeline/tuner.hpp"
#include "texrisk/synth/phantom.hpp"

using namespace texrisk;
using namespace texrisk::pipeline;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::vector<unsigned char> unbase64(const std::string& text) {
    std::vector<unsigned char> out(3 * text.size() / 4 + 3);
    const int n = EVP_DecodeBlock(out.data(), reinterpret_cast<const unsigned char*>(text.data()),
                                  static_cast<int>(text.size()));
    REQUIRE(n >= 0);
    std::size_t pad = 0;
    for (auto it = text.rbegin(); it != text.rend() && *it == '='; ++it) ++pad;
    out.resize(static_cast<std::size_t>(n) - pad);
    return out;
}

struct Fixture {
    fs::path root;
    fs::path views;
    fs::path profiles;
    std::vector<imaging::ViewImage> raw;
    std::unique_ptr<TunerService> service;
    std::thread thread;
    int port = -1;

    Fixture() {
        root = fs::temp_directory_path() / ("texrisk_tuner_" + std::to_string(::getpid()));
        fs::remove_all(root);
        views = root / "views";
        profiles = root / "profiles";
        fs::create_directories(root / "static");
        std::ofstream(root / "static" / "index.html") << "<html>tuner</html>\n";
        imaging::ViewStore store(views);
        synth::PhantomConfig c;
        c.seed = 8;
        const auto w = synth::generate_woman(c, 0);
        for (int s = 0; s < 2; ++s) {
            store.save("v" + std::to_string(s), w.views[s]);
            raw.push_back(w.views[s]);
        }
        store.save("processed0", imaging::flavorize(w.views[0], imaging::default_profiles()[0]));
        service = std::make_unique<TunerService>(views, profiles, root / "static");
        port = service->bind("127.0.0.1", 0);
        REQUIRE(port > 0);
        thread = std::thread([this] { service->serve(); });
    }
    ~Fixture() {
        service->stop();
        thread.join();
        fs::remove_all(root);
    }
    httplib::Client client() const {
        httplib::Client c("127.0.0.1", port);
        c.set_read_timeout(60, 0);
        return c;
    }
};

json profile_body(double alpha, double gamma, double delta) {
    return {{"profile_id", "flavorX"}, {"alpha", alpha}, {"beta", 0.9},        {"gamma", gamma},
            {"delta", delta},          {"lowpass_sigma_px", 6.5},             {"edge_band_mm", 12.25},
            {"interior_threshold_mm", 20.0}, {"tone_map_mode", "MonotoneLogSquareRatio"}};
}

}  // namespace

TEST_CASE("tuner HTTP API") {
    Fixture fx;
    auto cli = fx.client();

    SUBCASE("lists raw views only and serves their pixels") {
        auto res = cli.Get("/api/views");
        REQUIRE(res);
        CHECK(res->status == 200);
        CHECK(json::parse(res->body) == json({"v0", "v1"}));
        res = cli.Get("/api/views/v1/raw");
        REQUIRE(res);
        CHECK(res->status == 200);
        CHECK(res->get_header_value("Content-Type") == "image/png");
        CHECK(imaging::decode_png16({res->body.begin(), res->body.end()}) == fx.raw[1].pixels);
        CHECK(cli.Get("/api/views/nope/raw")->status == 404);
        CHECK(cli.Get("/api/views/processed0/raw")->status == 404);
    }

    SUBCASE("identity enhancement preview equals tone map plus edge correction") {
        auto body = profile_body(4.5, 1.0, 0.0);
        body["view_id"] = "v0";
        auto res = cli.Post("/api/preview", body.dump(), "application/json");
        REQUIRE(res);
        REQUIRE(res->status == 200);
        const auto j = json::parse(res->body);
        const auto pixels = imaging::decode_png16(unbase64(j["png"].get<std::string>()));

        const auto profile = imaging::profile_from_json(profile_body(4.5, 1.0, 0.0));
        const auto mask = imaging::compute_breast_mask(fx.raw[0]);
        auto zeroed = fx.raw[0];
        for (int r = 0; r < zeroed.pixels.rows(); ++r)
            for (int c = 0; c < zeroed.pixels.cols(); ++c)
                if (!mask.mask(r, c)) zeroed.pixels(r, c) = 0;
        const auto dmap = imaging::compute_distance_map(mask);
        const auto expected =
            imaging::correct_peripheral_tissue(imaging::apply_tone_map(zeroed, mask, dmap, profile), mask, dmap, profile);
        CHECK(pixels == expected.pixels);

        const auto hist = j["histogram"].get<std::vector<long>>();
        CHECK(hist.size() == 64);
        CHECK(std::accumulate(hist.begin(), hist.end(), 0L) == mask.breast_area_px);
        CHECK(hist == masked_histogram(expected.pixels, mask.mask));
    }

    SUBCASE("preview is bit-identical to batch flavorize") {
        auto body = profile_body(5.0, 1.4, 2.5);
        body["view_id"] = "v1";
        auto res = cli.Post("/api/preview", body.dump(), "application/json");
        REQUIRE(res);
        REQUIRE(res->status == 200);
        const auto pixels = imaging::decode_png16(unbase64(json::parse(res->body)["png"].get<std::string>()));
        auto profile = imaging::profile_from_json(profile_body(5.0, 1.4, 2.5));
        profile.profile_id = "preview";
        CHECK(pixels == imaging::flavorize(fx.raw[1], profile).pixels);
    }

    SUBCASE("invalid fields give 422 naming each field") {
        auto body = profile_body(99.0, 1.0, 0.0);
        body["view_id"] = "v0";
        auto res = cli.Post("/api/preview", body.dump(), "application/json");
        REQUIRE(res);
        CHECK(res->status == 422);
        auto errors = json::parse(res->body)["errors"];
        REQUIRE(errors.size() == 1);
        CHECK(errors[0]["field"] == "alpha");

        body = profile_body(4.5, -1.0, 0.0);
        body["beta"] = "high";
        body["view_id"] = "v0";
        errors = json::parse(cli.Post("/api/preview", body.dump(), "application/json")->body)["errors"];
        std::set<std::string> fields;
        for (const auto& e : errors) fields.insert(e["field"].get<std::string>());
        CHECK(fields.count("beta") == 1);

        body = profile_body(4.5, 1.0, 0.0);
        body["view_id"] = "missing";
        CHECK(cli.Post("/api/preview", body.dump(), "application/json")->status == 404);
        CHECK(cli.Post("/api/preview", "{nope", "application/json")->status == 400);
        CHECK(cli.Post("/api/preview", profile_body(4.5, 1, 0).dump(), "application/json")->status == 422);
    }

    SUBCASE("saved profiles round-trip field-exactly") {
        auto body = profile_body(4.123456789012345, 1.1, 0.7);
        body["tone_map_mode"] = "SquaredLogRatio";
        auto res = cli.Post("/api/profiles", body.dump(), "application/json");
        REQUIRE(res);
        CHECK(res->status == 201);
        res = cli.Get("/api/profiles");
        REQUIRE(res);
        const auto listed = json::parse(res->body);
        REQUIRE(listed.size() == 1);
        CHECK(imaging::profile_from_json(listed[0]) == imaging::profile_from_json(body));

        auto bad = profile_body(4.5, 1.0, 0.0);
        bad["profile_id"] = "../escape";
        res = cli.Post("/api/profiles", bad.dump(), "application/json");
        CHECK(res->status == 422);
        CHECK(json::parse(res->body)["errors"][0]["field"] == "profile_id");
        CHECK(json::parse(cli.Get("/api/profiles")->body).size() == 1);
    }

    SUBCASE("static assets at the root") {
        auto res = cli.Get("/index.html");
        REQUIRE(res);
        CHECK(res->status == 200);
        CHECK(res->body.find("tuner") != std::string::npos);
    }
}

TEST_CASE("tuner refuses a store without raw views") {
    const auto dir = fs::temp_directory_path() / ("texrisk_tuner_empty_" + std::to_string(::getpid()));
    fs::create_directories(dir);
    CHECK_THROWS_AS(TunerService(dir, dir / "p"), Error);
    CHECK_THROWS_AS(TunerService(dir / "missing", dir / "p"), Error);
    fs::remove_all(dir);
}
