#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "unoranic/config.hpp"

namespace unoranic::cli {

std::string version_string();
std::string sha256_hex(const std::filesystem::path& path);
std::string utc_timestamp();

struct Artifact {
  std::string path;  // relative to the run directory
  std::string sha256;
  std::uintmax_t bytes = 0;
};

// Provenance record written as manifest.json next to a run's outputs.
class RunManifest {
 public:
  RunManifest(std::string command, std::vector<std::string> argv);

  void set_config(config::Json config) { config_ = std::move(config); }
  void add_seed(const std::string& name, std::uint64_t seed) { seeds_[name] = seed; }
  void add_artifact(const std::filesystem::path& root, const std::filesystem::path& file);
  void set_status(std::string status) { status_ = std::move(status); }
  const std::vector<Artifact>& artifacts() const { return artifacts_; }

  config::Json to_json() const;
  // Stamps the end time and writes <root>/<name>.
  void write(const std::filesystem::path& root, const std::string& name = "manifest.json");

 private:
  std::string command_;
  std::vector<std::string> argv_;
  config::Json config_;
  config::Json seeds_ = config::Json::object();
  std::vector<Artifact> artifacts_;
  std::string status_ = "ok";
  std::string started_, finished_;
};

}  // namespace unoranic::cli
