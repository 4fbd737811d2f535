#include "mfc/manifest.hpp"

#include <chrono>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace mfc {

using nlohmann::json;

json manifest_skeleton(const std::string& command) {
  json doc;
  doc["tool"] = "mfc";
  doc["version"] = kToolVersion;
  doc["command"] = command;
  doc["config"] = json::object();
  doc["derived"] = json::object();
  doc["results"] = json::object();
  doc["artifacts"] = json::object();
  doc["timings"] = json::object();
  doc["timestamps"] = json::object();
  return doc;
}

std::uint64_t manifest_hash(const json& doc) {
  json stripped = doc;
  stripped.erase("timings");
  stripped.erase("timestamps");
  stripped.erase("reproducibility_hash");
  const std::string bytes = stripped.dump();
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

void write_manifest(json doc, const std::string& path) {
  std::ostringstream hex;
  hex << std::hex << manifest_hash(doc);
  doc["reproducibility_hash"] = hex.str();
  const auto now = std::chrono::system_clock::now().time_since_epoch();
  doc["timestamps"]["written_unix_ms"] =
      std::chrono::duration_cast<std::chrono::milliseconds>(now).count();
  write_text_file(path, doc.dump(2) + "\n");
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  json j;
  in >> j;
  return j;
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

}  // namespace mfc
