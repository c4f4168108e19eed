#include "qcinf/manifest.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "qcinf/errors.hpp"

namespace qcinf {

uint64_t fnv1a64(const void* data, size_t len) {
  const auto* bytes = static_cast<const unsigned char*>(data);
  uint64_t h = 0xcbf29ce484222325ULL;
  for (size_t i = 0; i < len; ++i) {
    h ^= bytes[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

uint64_t fnv1a64_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("fnv1a64_file: cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  const std::string s = buf.str();
  return fnv1a64(s.data(), s.size());
}

std::string hex64(uint64_t value) {
  char buf[19];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

void write_manifest(const RunManifest& manifest, const std::string& path) {
  nlohmann::json j;
  j["schema"] = 1;
  j["tool_version"] = manifest.tool_version;
  j["command"] = manifest.command_line;
  j["seed"] = manifest.seed;
  j["threads"] = manifest.threads;
  j["inputs"] = manifest.input_hashes;
  j["outputs"] = manifest.outputs;
  if (manifest.include_timing) j["wall_ms"] = manifest.wall_ms;
  std::ofstream out(path);
  if (!out) throw ConfigError("write_manifest: cannot open " + path);
  out << j.dump(2) << "\n";
}

}  // namespace qcinf
