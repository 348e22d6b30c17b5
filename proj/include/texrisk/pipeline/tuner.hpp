#pragma once

#include <filesystem>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "json.hpp"
#include "texrisk/imaging/flavor.hpp"
#include "texrisk/imaging/io.hpp"

namespace httplib {
class Server;
}

namespace texrisk::pipeline {

inline constexpr int kHistogramBins = 64;

// 64 equal bins over [0, 4095] of the pixels under the mask.
std::vector<long> masked_histogram(const imaging::PixelGrid& pixels, const MaskGrid& mask,
                                   int bins = kHistogramBins);

// Local HTTP service behind the flavor tuner:
//   GET  /api/views               raw view ids
//   GET  /api/views/{id}/raw      16-bit PNG
//   POST /api/preview             {view_id, profile fields} -> {png (base64), histogram, ...}
//   GET  /api/profiles            saved profiles
//   POST /api/profiles            save one profile
//   GET  /                        static assets, when a directory is given
class TunerService {
public:
    TunerService(std::filesystem::path view_root, std::filesystem::path profile_dir,
                 std::filesystem::path static_dir = {});
    ~TunerService();
    TunerService(const TunerService&) = delete;
    TunerService& operator=(const TunerService&) = delete;

    // Port 0 picks a free port. Returns the bound port, or -1.
    int bind(const std::string& host = "127.0.0.1", int port = 0);
    void serve();  // blocks until stop()
    void stop();

    std::vector<std::string> raw_view_ids() const;

private:
    imaging::ViewStore store_;
    std::filesystem::path profile_dir_;
    std::filesystem::path static_dir_;
    std::unique_ptr<httplib::Server> server_;
    std::mutex save_mutex_;

    void install_routes();
};

}  // namespace texrisk::pipeline
