#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

namespace texrisk::pipeline {

std::string sha256_hex(const std::string& bytes);
std::string sha256_file(const std::filesystem::path& path);

void write_text(const std::filesystem::path& path, const std::string& text);
void write_json(const std::filesystem::path& path, const nlohmann::json& j);
nlohmann::json read_json(const std::filesystem::path& path);

// Inputs (with their hashes), seeds, the resolved config and a hash per
// artifact. Only `created_utc` differs between identical re-runs.
nlohmann::json run_manifest(const std::string& command, const nlohmann::json& config,
                            const std::vector<std::filesystem::path>& inputs,
                            const std::vector<std::filesystem::path>& artifacts);
void write_run_manifest(const std::filesystem::path& path, const nlohmann::json& manifest);

}  // namespace texrisk::pipeline
