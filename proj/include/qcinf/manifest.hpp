#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace qcinf {

/// Provenance record emitted next to every CLI output. Content is a
/// pure function of command, inputs, seed and worker count; wall time
/// is only included when timings are explicitly requested so repeated
/// runs stay byte-identical.
struct RunManifest {
  std::string tool_version;
  std::string command_line;
  uint64_t seed = 0;
  int threads = 1;
  std::map<std::string, std::string> input_hashes;  // path -> 64-bit FNV-1a, hex
  std::vector<std::string> outputs;
  bool include_timing = false;
  double wall_ms = 0.0;
};

uint64_t fnv1a64(const void* data, size_t len);
uint64_t fnv1a64_file(const std::string& path);
std::string hex64(uint64_t value);

void write_manifest(const RunManifest& manifest, const std::string& path);

}  // namespace qcinf
