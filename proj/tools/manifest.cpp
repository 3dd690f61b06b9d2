#include "manifest.hpp"

#include <openssl/evp.h>
#include <omp.h>

#include <chrono>
#include <ctime>
#include <fstream>
#include <iterator>

#include "mirrorfield/error.hpp"

namespace mirrorfield::cli {

std::string sha1_hex(const std::string& data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha1(), nullptr) != 1) {
    throw Error(ErrorKind::Io, "SHA-1 failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

std::string git_blob_sha1(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot read input " + path.string());
  const std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return sha1_hex("blob " + std::to_string(content.size()) + '\0' + content);
}

void RunManifest::add_input(const std::filesystem::path& path) {
  inputs.emplace_back(path.generic_string(), git_blob_sha1(path));
}

std::string RunManifest::input_digest() const {
  std::string all;
  for (const auto& [name, hash] : inputs) all += hash + ' ' + name + '\n';
  return sha1_hex(all);
}

Json RunManifest::identity() const {
  Json in = Json::object();
  for (const auto& [name, hash] : inputs) in[name] = hash;
  return {{"command", command},
          {"config", config},
          {"seed", seed},
          {"inputs", in},
          {"input_digest", input_digest()}};
}

Json RunManifest::to_json() const {
  Json j = identity();
  j["runtime"] = {{"created_utc", created_utc}, {"threads", threads}};
  return j;
}

RunManifest make_manifest(const std::string& command, const Json& config, std::uint64_t seed) {
  RunManifest m;
  m.command = command;
  m.config = config;
  m.seed = seed;
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  m.created_utc = buf;
  m.threads = omp_get_max_threads();
  return m;
}

void write_manifest(const std::filesystem::path& out_dir, const RunManifest& m) {
  std::filesystem::create_directories(out_dir);
  write_json(out_dir / "manifest.json", m.to_json());
}

}  // namespace mirrorfield::cli
