#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace unoranic::data {

enum class Split { train, val, test };
enum class Task { multiclass, binary, ordinal };

std::string_view to_string(Split split) noexcept;
std::string_view to_string(Task task) noexcept;
Split parse_split(std::string_view name);
Task parse_task(std::string_view name);

struct ImageShape {
  int channels = 1;
  int height = 28;
  int width = 28;

  std::size_t numel() const noexcept {
    return static_cast<std::size_t>(channels) * static_cast<std::size_t>(height) *
           static_cast<std::size_t>(width);
  }
  friend bool operator==(const ImageShape&, const ImageShape&) = default;
};

// One image in channel-major (C, H, W) layout with pixels in [0, 1].
struct ImageSample {
  ImageShape shape;
  std::vector<float> pixels;
  std::optional<std::int64_t> label;

  float& at(int c, int y, int x) {
    return pixels[(static_cast<std::size_t>(c) * shape.height + y) * shape.width + x];
  }
  float at(int c, int y, int x) const {
    return pixels[(static_cast<std::size_t>(c) * shape.height + y) * shape.width + x];
  }
};

struct Dataset {
  std::string name;
  Split split = Split::train;
  std::vector<ImageSample> samples;
  int class_count = 1;
  Task task = Task::multiclass;

  std::size_t size() const noexcept { return samples.size(); }
  bool empty() const noexcept { return samples.empty(); }
  // Shape shared by every sample. Throws on an empty dataset.
  ImageShape shape() const;
  // Checks the pixel-range, shared-shape and label-range invariants.
  void validate() const;
};

struct DatasetSplits {
  Dataset train;
  Dataset val;
  Dataset test;

  const Dataset& get(Split split) const;
};

// MedMNIST-style ZIP-of-NPY container: `{split}_images` (uint8, [n,H,W] or
// [n,H,W,3]) and `{split}_labels` (integer, [n] or [n,1]).
Dataset load_container(const std::filesystem::path& path, Split split);
DatasetSplits load_container_splits(const std::filesystem::path& path);

// Writes all three splits, quantizing pixels to uint8 with round(p * 255).
void write_container(const std::filesystem::path& path, const DatasetSplits& splits);

enum class ShapeKind { disk, cross, ring };
std::string_view to_string(ShapeKind kind) noexcept;

// Parameters of the synthetic substitute dataset. Class label = shape kind,
// assigned round-robin over the sample index.
struct SyntheticSpec {
  std::string name = "synthetic";
  std::size_t train_count = 1000;
  std::size_t val_count = 200;
  std::size_t test_count = 300;
  int image_side = 28;
  int channels = 1;
  int class_count = 3;
  float foreground_min = 0.70F;
  float foreground_max = 0.90F;
  float background_min = 0.10F;
  float background_max = 0.25F;
  std::uint64_t seed = 7;

  void validate() const;
};

// Geometry of one synthetic sample in pixel units; a pure function of the
// structural seed, the shape kind and the image side.
struct SyntheticGeometry {
  ShapeKind kind = ShapeKind::disk;
  double center_y = 0, center_x = 0;
  double extent = 0;     // disk radius, ring outer radius, cross arm half-length
  double thickness = 0;  // ring width, cross arm half-width
  double angle = 0;      // cross rotation in radians
  double blob_y = 0, blob_x = 0, blob_radius = 0;

  friend bool operator==(const SyntheticGeometry&, const SyntheticGeometry&) = default;
};

SyntheticGeometry sample_geometry(std::uint64_t structural_seed, ShapeKind kind, int side);
// Fraction of pixel (y, x) covered by the main shape, from 4x4 supersampling.
double shape_coverage(const SyntheticGeometry& geometry, int y, int x);
ImageSample render_synthetic(const SyntheticGeometry& geometry, std::uint64_t appearance_seed,
                             const SyntheticSpec& spec);

DatasetSplits generate_synthetic(const SyntheticSpec& spec);

using IndexBatch = std::vector<std::size_t>;

// Partitions [0, n) into consecutive batches; the final short batch is kept.
// With a seed the order is a deterministic permutation, otherwise identity.
std::vector<IndexBatch> batches(const Dataset& dataset, std::size_t batch_size,
                                std::optional<std::uint64_t> shuffle_seed = std::nullopt);

std::vector<std::size_t> permutation(std::size_t n, std::uint64_t seed);

}  // namespace unoranic::data
