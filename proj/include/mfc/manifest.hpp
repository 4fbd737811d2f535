#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

namespace mfc {

inline constexpr const char* kToolVersion = "0.1.0";

/// Skeleton with the fixed top-level fields every run records.
nlohmann::json manifest_skeleton(const std::string& command);

/// FNV-1a over the canonical dump with the volatile fields ("timings",
/// "timestamps", "reproducibility_hash") removed; identical inputs give
/// identical hashes across reruns.
std::uint64_t manifest_hash(const nlohmann::json& doc);

/// Stamps the reproducibility hash and writes the document.
void write_manifest(nlohmann::json doc, const std::string& path);

nlohmann::json read_json_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);
std::string read_text_file(const std::string& path);

}  // namespace mfc
