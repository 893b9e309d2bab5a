#include "unoranic/dataio.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <numbers>
#include <set>
#include <utility>

#include "unoranic/errors.hpp"
#include "unoranic/npy.hpp"
#include "unoranic/seed.hpp"
#include "unoranic/zip_archive.hpp"

namespace unoranic::data {
namespace {

struct KnownDataset {
  std::string_view stem;
  int class_count;
  Task task;
};

// MedMNIST v2 2-D datasets with single-label tasks.
constexpr std::array<KnownDataset, 11> kKnown{{
    {"bloodmnist", 8, Task::multiclass},
    {"breastmnist", 2, Task::binary},
    {"dermamnist", 7, Task::multiclass},
    {"pneumoniamnist", 2, Task::binary},
    {"retinamnist", 5, Task::ordinal},
    {"pathmnist", 9, Task::multiclass},
    {"octmnist", 4, Task::multiclass},
    {"tissuemnist", 8, Task::multiclass},
    {"organamnist", 11, Task::multiclass},
    {"organcmnist", 11, Task::multiclass},
    {"organsmnist", 11, Task::multiclass},
}};

constexpr std::array<Split, 3> kSplits{Split::train, Split::val, Split::test};

std::string key(Split split, std::string_view what) {
  return std::string(to_string(split)) + "_" + std::string(what);
}

npy::Array read_required(const zip::Reader& archive, const std::string& name,
                         const std::filesystem::path& path) {
  const std::string entry = name + ".npy";
  if (!archive.contains(entry))
    throw FormatError("container " + path.string() + " lacks required key '" + name + "'");
  return npy::parse(archive.read(entry));
}

std::vector<std::int64_t> labels_from(const npy::Array& arr, const std::string& name) {
  const bool flat = arr.shape.size() == 1 || (arr.shape.size() == 2 && arr.shape[1] == 1);
  if (!flat)
    throw FormatError("'" + name + "' must have shape [n] or [n, 1] (multi-label is unsupported)");
  if (arr.dtype == npy::DType::f32 || arr.dtype == npy::DType::f64)
    throw FormatError("'" + name + "' must hold integer labels");
  return arr.to_vector<std::int64_t>();
}

Dataset decode_split(const zip::Reader& archive, Split split, const std::filesystem::path& path,
                     int class_count, Task task) {
  const auto images = read_required(archive, key(split, "images"), path);
  const auto labels_arr = read_required(archive, key(split, "labels"), path);
  if (images.dtype != npy::DType::u8)
    throw FormatError("'" + key(split, "images") + "' must be uint8");

  ImageShape shape;
  if (images.shape.size() == 3) {
    shape = {1, static_cast<int>(images.shape[1]), static_cast<int>(images.shape[2])};
  } else if (images.shape.size() == 4 && (images.shape[3] == 3 || images.shape[3] == 1)) {
    shape = {static_cast<int>(images.shape[3]), static_cast<int>(images.shape[1]),
             static_cast<int>(images.shape[2])};
  } else {
    throw FormatError("'" + key(split, "images") + "' must have shape [n,H,W] or [n,H,W,3]");
  }
  const auto labels = labels_from(labels_arr, key(split, "labels"));
  const auto n = static_cast<std::size_t>(images.shape[0]);
  if (labels.size() != n)
    throw IntegrityError("container " + path.string() + ": " + std::to_string(n) + " " +
                         key(split, "images") + " but " + std::to_string(labels.size()) +
                         " labels");

  Dataset ds;
  ds.name = path.stem().string();
  ds.split = split;
  ds.class_count = class_count;
  ds.task = task;
  ds.samples.resize(n);
  const auto* raw = reinterpret_cast<const std::uint8_t*>(images.data.data());
  const std::size_t plane = static_cast<std::size_t>(shape.height) * shape.width;
  for (std::size_t i = 0; i < n; ++i) {
    auto& s = ds.samples[i];
    s.shape = shape;
    s.pixels.resize(shape.numel());
    const std::uint8_t* src = raw + i * shape.numel();
    // HWC on disk -> CHW in memory.
    for (std::size_t p = 0; p < plane; ++p)
      for (int c = 0; c < shape.channels; ++c)
        s.pixels[c * plane + p] = static_cast<float>(src[p * shape.channels + c]) / 255.0F;
    s.label = labels[i];
  }
  ds.validate();
  return ds;
}

std::pair<int, Task> infer_classes(const zip::Reader& archive, const std::filesystem::path& path) {
  std::string stem = path.stem().string();
  std::transform(stem.begin(), stem.end(), stem.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  for (const auto& k : kKnown)
    if (stem == k.stem || stem.starts_with(std::string(k.stem) + "_"))
      return {k.class_count, k.task};

  std::int64_t max_label = 0;
  for (Split s : kSplits) {
    const std::string entry = key(s, "labels") + ".npy";
    if (!archive.contains(entry)) continue;
    for (auto l : labels_from(npy::parse(archive.read(entry)), key(s, "labels")))
      max_label = std::max(max_label, l);
  }
  const int count = static_cast<int>(max_label + 1);
  return {count, count == 2 ? Task::binary : Task::multiclass};
}

}  // namespace

std::string_view to_string(Split split) noexcept {
  switch (split) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "?";
}

std::string_view to_string(Task task) noexcept {
  switch (task) {
    case Task::multiclass: return "multiclass";
    case Task::binary: return "binary";
    case Task::ordinal: return "ordinal";
  }
  return "?";
}

std::string_view to_string(ShapeKind kind) noexcept {
  switch (kind) {
    case ShapeKind::disk: return "disk";
    case ShapeKind::cross: return "cross";
    case ShapeKind::ring: return "ring";
  }
  return "?";
}

Split parse_split(std::string_view name) {
  for (Split s : kSplits)
    if (to_string(s) == name) return s;
  throw ConfigError("unknown split '" + std::string(name) + "'");
}

Task parse_task(std::string_view name) {
  for (Task t : {Task::multiclass, Task::binary, Task::ordinal})
    if (to_string(t) == name) return t;
  throw ConfigError("unknown task '" + std::string(name) + "'");
}

ImageShape Dataset::shape() const {
  if (samples.empty()) throw Error("dataset '" + name + "' is empty");
  return samples.front().shape;
}

void Dataset::validate() const {
  if (class_count < 1) throw IntegrityError("dataset '" + name + "': class_count must be positive");
  if (samples.empty()) return;
  const ImageShape ref = samples.front().shape;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    if (!(s.shape == ref) || s.pixels.size() != ref.numel())
      throw IntegrityError("dataset '" + name + "': sample " + std::to_string(i) +
                           " has a different shape");
    for (float p : s.pixels)
      if (!(p >= 0.0F && p <= 1.0F))
        throw IntegrityError("dataset '" + name + "': sample " + std::to_string(i) +
                             " has a pixel outside [0, 1]");
    if (s.label && (*s.label < 0 || *s.label >= class_count))
      throw IntegrityError("dataset '" + name + "': sample " + std::to_string(i) + " label " +
                           std::to_string(*s.label) + " outside [0, " +
                           std::to_string(class_count) + ")");
  }
}

const Dataset& DatasetSplits::get(Split split) const {
  switch (split) {
    case Split::train: return train;
    case Split::val: return val;
    case Split::test: return test;
  }
  return test;
}

Dataset load_container(const std::filesystem::path& path, Split split) {
  const zip::Reader archive(path);
  const auto [count, task] = infer_classes(archive, path);
  return decode_split(archive, split, path, count, task);
}

DatasetSplits load_container_splits(const std::filesystem::path& path) {
  const zip::Reader archive(path);
  const auto [count, task] = infer_classes(archive, path);
  return {decode_split(archive, Split::train, path, count, task),
          decode_split(archive, Split::val, path, count, task),
          decode_split(archive, Split::test, path, count, task)};
}

void write_container(const std::filesystem::path& path, const DatasetSplits& splits) {
  zip::Writer writer;
  for (Split split : kSplits) {
    const Dataset& ds = splits.get(split);
    const ImageShape shape = ds.empty() ? ImageShape{} : ds.shape();
    const std::size_t plane = static_cast<std::size_t>(shape.height) * shape.width;
    std::vector<std::uint8_t> raw(ds.size() * shape.numel());
    std::vector<std::uint8_t> labels(ds.size());
    for (std::size_t i = 0; i < ds.size(); ++i) {
      const auto& s = ds.samples[i];
      std::uint8_t* dst = raw.data() + i * shape.numel();
      for (std::size_t p = 0; p < plane; ++p)
        for (int c = 0; c < shape.channels; ++c) {
          const float v = std::clamp(s.pixels[c * plane + p], 0.0F, 1.0F);
          dst[p * shape.channels + c] = static_cast<std::uint8_t>(std::lround(v * 255.0F));
        }
      labels[i] = static_cast<std::uint8_t>(s.label.value_or(0));
    }
    std::vector<std::int64_t> img_shape{static_cast<std::int64_t>(ds.size()), shape.height,
                                        shape.width};
    if (shape.channels != 1) img_shape.push_back(shape.channels);
    writer.add(key(split, "images") + ".npy",
               npy::serialize(npy::make_array<std::uint8_t>(img_shape, raw)), true);
    writer.add(key(split, "labels") + ".npy",
               npy::serialize(npy::make_array<std::uint8_t>(
                   {static_cast<std::int64_t>(ds.size()), 1}, labels)),
               true);
  }
  writer.write_to(path);
}

void SyntheticSpec::validate() const {
  if (image_side < 8) throw ConfigError("synthetic image_side must be >= 8");
  if (channels != 1 && channels != 3) throw ConfigError("synthetic channels must be 1 or 3");
  if (class_count < 1 || class_count > 3)
    throw ConfigError("synthetic class_count must be in [1, 3] (disk, cross, ring)");
  for (std::size_t n : {train_count, val_count, test_count})
    if (n < static_cast<std::size_t>(class_count))
      throw ConfigError("synthetic sample count per split must be >= class_count");
  if (!(0.0F <= background_min && background_min <= background_max &&
        background_max <= foreground_min && foreground_min <= foreground_max &&
        foreground_max <= 1.0F))
    throw ConfigError("synthetic intensity ranges must satisfy 0 <= bg <= fg <= 1");
}

SyntheticGeometry sample_geometry(std::uint64_t structural_seed, ShapeKind kind, int side) {
  CounterRng rng(structural_seed);
  const double n = side;
  auto range = [&](double lo, double hi) { return lo + (hi - lo) * rng.uniform(); };
  SyntheticGeometry g;
  g.kind = kind;
  g.center_y = n / 2 + range(-0.12, 0.12) * n;
  g.center_x = n / 2 + range(-0.12, 0.12) * n;
  switch (kind) {
    case ShapeKind::disk:
      g.extent = range(0.18, 0.32) * n;
      break;
    case ShapeKind::cross:
      g.extent = range(0.22, 0.35) * n;
      g.thickness = range(0.05, 0.09) * n;
      g.angle = range(0.0, std::numbers::pi / 2);
      break;
    case ShapeKind::ring:
      g.extent = range(0.22, 0.35) * n;
      g.thickness = range(0.07, 0.11) * n;
      break;
  }
  g.blob_y = range(0.15, 0.85) * n;
  g.blob_x = range(0.15, 0.85) * n;
  g.blob_radius = range(0.05, 0.09) * n;
  return g;
}

namespace {

constexpr int kSupersample = 4;

bool inside_shape(const SyntheticGeometry& g, double y, double x) {
  const double dy = y - g.center_y;
  const double dx = x - g.center_x;
  switch (g.kind) {
    case ShapeKind::disk:
      return dy * dy + dx * dx <= g.extent * g.extent;
    case ShapeKind::ring: {
      const double d = std::sqrt(dy * dy + dx * dx);
      return d <= g.extent && d >= g.extent - g.thickness;
    }
    case ShapeKind::cross: {
      const double u = dx * std::cos(g.angle) + dy * std::sin(g.angle);
      const double v = -dx * std::sin(g.angle) + dy * std::cos(g.angle);
      return (std::abs(u) <= g.extent && std::abs(v) <= g.thickness) ||
             (std::abs(v) <= g.extent && std::abs(u) <= g.thickness);
    }
  }
  return false;
}

template <typename Inside>
double coverage(int y, int x, Inside inside) {
  int hits = 0;
  for (int sy = 0; sy < kSupersample; ++sy)
    for (int sx = 0; sx < kSupersample; ++sx)
      hits += inside(y + (sy + 0.5) / kSupersample, x + (sx + 0.5) / kSupersample) ? 1 : 0;
  return static_cast<double>(hits) / (kSupersample * kSupersample);
}

}  // namespace

double shape_coverage(const SyntheticGeometry& geometry, int y, int x) {
  return coverage(y, x, [&](double py, double px) { return inside_shape(geometry, py, px); });
}

ImageSample render_synthetic(const SyntheticGeometry& geometry, std::uint64_t appearance_seed,
                             const SyntheticSpec& spec) {
  CounterRng rng(appearance_seed);
  const double bg = spec.background_min + (spec.background_max - spec.background_min) * rng.uniform();
  const double fg = spec.foreground_min + (spec.foreground_max - spec.foreground_min) * rng.uniform();
  std::array<double, 3> tint{1.0, 1.0, 1.0};
  if (spec.channels == 3)
    for (auto& t : tint) t = 0.85 + 0.15 * rng.uniform();

  ImageSample s;
  s.shape = {spec.channels, spec.image_side, spec.image_side};
  s.pixels.resize(s.shape.numel());
  const double blob_level = 0.5 * fg;
  for (int y = 0; y < spec.image_side; ++y)
    for (int x = 0; x < spec.image_side; ++x) {
      const double cov = shape_coverage(geometry, y, x);
      const double cov_blob = coverage(y, x, [&](double py, double px) {
        const double dy = py - geometry.blob_y;
        const double dx = px - geometry.blob_x;
        return dy * dy + dx * dx <= geometry.blob_radius * geometry.blob_radius;
      });
      double v = bg + (fg - bg) * cov + (blob_level - bg) * cov_blob * (1.0 - cov);
      v = std::clamp(v, 0.0, 1.0);
      for (int c = 0; c < spec.channels; ++c)
        s.at(c, y, x) = static_cast<float>(std::clamp(v * tint[c], 0.0, 1.0));
    }
  return s;
}

DatasetSplits generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  constexpr std::array<ShapeKind, 3> kinds{ShapeKind::disk, ShapeKind::cross, ShapeKind::ring};
  auto make = [&](Split split, std::size_t count) {
    Dataset ds;
    ds.name = spec.name;
    ds.split = split;
    ds.class_count = spec.class_count;
    ds.task = spec.class_count == 2 ? Task::binary : Task::multiclass;
    ds.samples.reserve(count);
    const auto split_id = static_cast<std::uint64_t>(split);
    for (std::size_t i = 0; i < count; ++i) {
      const auto label = static_cast<std::int64_t>(i % static_cast<std::size_t>(spec.class_count));
      const auto structural = derive_seed(spec.seed, {split_id, i, 0});
      const auto appearance = derive_seed(spec.seed, {split_id, i, 1});
      const auto geometry = sample_geometry(structural, kinds[static_cast<std::size_t>(label)],
                                            spec.image_side);
      auto sample = render_synthetic(geometry, appearance, spec);
      sample.label = label;
      ds.samples.push_back(std::move(sample));
    }
    return ds;
  };
  return {make(Split::train, spec.train_count), make(Split::val, spec.val_count),
          make(Split::test, spec.test_count)};
}

std::vector<std::size_t> permutation(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  CounterRng rng(seed);
  for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);
  return perm;
}

std::vector<IndexBatch> batches(const Dataset& dataset, std::size_t batch_size,
                                std::optional<std::uint64_t> shuffle_seed) {
  if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
  if (dataset.empty()) throw Error("cannot batch empty dataset '" + dataset.name + "'");
  std::vector<std::size_t> order;
  if (shuffle_seed) {
    order = permutation(dataset.size(), *shuffle_seed);
  } else {
    order.resize(dataset.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  }
  std::vector<IndexBatch> out;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const std::size_t end = std::min(order.size(), start + batch_size);
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                     order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return out;
}

}  // namespace unoranic::data
