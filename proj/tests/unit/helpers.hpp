#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "unoranic/dataio.hpp"

namespace unoranic::fixtures {

inline std::filesystem::path data_dir() { return UNORANIC_TEST_DATA_DIR; }

// Fresh, empty directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("unoranic-" + tag + "-" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline data::ImageSample constant_image(int side, float value, int channels = 1) {
  data::ImageSample s;
  s.shape = {channels, side, side};
  s.pixels.assign(s.shape.numel(), value);
  s.label = 0;
  return s;
}

inline data::ImageSample random_image(int side, std::uint32_t seed, int channels = 1) {
  std::mt19937 gen(seed);
  std::uniform_real_distribution<float> u(0.0F, 1.0F);
  data::ImageSample s;
  s.shape = {channels, side, side};
  s.pixels.resize(s.shape.numel());
  for (auto& p : s.pixels) p = u(gen);
  s.label = 0;
  return s;
}

// Small synthetic splits for fast tests.
inline data::DatasetSplits small_synthetic(std::size_t train, std::size_t val, std::size_t test,
                                           std::uint64_t seed = 7, int side = 28) {
  data::SyntheticSpec spec;
  spec.train_count = train;
  spec.val_count = val;
  spec.test_count = test;
  spec.image_side = side;
  spec.seed = seed;
  return data::generate_synthetic(spec);
}

}  // namespace unoranic::fixtures
