#include "unoranic/cli/manifest.hpp"

#include <openssl/evp.h>

#include <array>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <memory>

#include "unoranic/errors.hpp"

#ifndef UNORANIC_VERSION
#define UNORANIC_VERSION "unknown"
#endif

namespace unoranic::cli {

std::string version_string() { return UNORANIC_VERSION; }

std::string sha256_hex(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr);
  std::array<char, 1 << 16> buf;
  while (in) {
    in.read(buf.data(), buf.size());
    if (in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), digest, &len);
  std::string hex;
  char byte[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(byte, sizeof byte, "%02x", digest[i]);
    hex += byte;
  }
  return hex;
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

RunManifest::RunManifest(std::string command, std::vector<std::string> argv)
    : command_(std::move(command)), argv_(std::move(argv)), started_(utc_timestamp()) {}

void RunManifest::add_artifact(const std::filesystem::path& root, const std::filesystem::path& file) {
  const auto rel = std::filesystem::relative(file, root).generic_string();
  for (auto& a : artifacts_)
    if (a.path == rel) {
      a.sha256 = sha256_hex(file);
      a.bytes = std::filesystem::file_size(file);
      return;
    }
  artifacts_.push_back({rel, sha256_hex(file), std::filesystem::file_size(file)});
}

config::Json RunManifest::to_json() const {
  config::Json arts = config::Json::array();
  for (const auto& a : artifacts_) arts.push_back({{"path", a.path}, {"sha256", a.sha256}, {"bytes", a.bytes}});
  return config::Json{{"tool", "unoranic"},
                      {"version", version_string()},
                      {"command", command_},
                      {"argv", argv_},
                      {"status", status_},
                      {"started", started_},
                      {"finished", finished_},
                      {"seeds", seeds_},
                      {"config", config_},
                      {"artifacts", arts}};
}

void RunManifest::write(const std::filesystem::path& root, const std::string& name) {
  finished_ = utc_timestamp();
  config::write_json_file(root / name, to_json());
}

}  // namespace unoranic::cli
