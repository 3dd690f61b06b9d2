#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mirrorfield/json_io.hpp"

namespace mirrorfield::cli {

// SHA-1 of "blob <size>\0<content>", as git computes object ids.
std::string git_blob_sha1(const std::filesystem::path& path);
std::string sha1_hex(const std::string& data);

// Written to <out>/manifest.json before a command does any work. Two runs
// with equal identity() produce byte-identical outputs; the runtime block
// (timestamp, thread count) is not part of the identity.
struct RunManifest {
  std::string command;
  Json config;
  std::uint64_t seed = 0;
  // Input file (as given) -> blob hash.
  std::vector<std::pair<std::string, std::string>> inputs;
  std::string created_utc;
  int threads = 1;

  void add_input(const std::filesystem::path& path);
  std::string input_digest() const;
  Json identity() const;
  Json to_json() const;
};

RunManifest make_manifest(const std::string& command, const Json& config, std::uint64_t seed);
void write_manifest(const std::filesystem::path& out_dir, const RunManifest& m);

}  // namespace mirrorfield::cli
