#include "unoranic/augment.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "unoranic/errors.hpp"
#include "unoranic/seed.hpp"

namespace unoranic::augment {
namespace {

using data::ImageSample;

struct KindInfo {
  CorruptionKind kind;
  std::string_view name;
  std::array<double, 5> table;
};

constexpr std::array<KindInfo, 11> kCatalog{{
    {CorruptionKind::identity, "identity", {0, 0, 0, 0, 0}},
    {CorruptionKind::gaussian_noise, "gaussian_noise", {0.04, 0.08, 0.12, 0.18, 0.26}},
    {CorruptionKind::shot_noise, "shot_noise", {60, 25, 12, 5, 3}},
    {CorruptionKind::impulse_noise, "impulse_noise", {0.03, 0.06, 0.09, 0.17, 0.27}},
    {CorruptionKind::gaussian_blur, "gaussian_blur", {0.4, 0.6, 0.9, 1.3, 1.8}},
    {CorruptionKind::defocus_blur, "defocus_blur", {1.0, 1.5, 2.0, 2.5, 3.0}},
    {CorruptionKind::brightness, "brightness", {0.1, 0.2, 0.3, 0.4, 0.5}},
    {CorruptionKind::contrast, "contrast", {0.4, 0.3, 0.2, 0.1, 0.05}},
    {CorruptionKind::gamma, "gamma", {1.4, 1.8, 2.2, 2.7, 3.3}},
    {CorruptionKind::solarize, "solarize", {0.7, 0.65, 0.6, 0.55, 0.5}},
    {CorruptionKind::pixelate, "pixelate", {0.6, 0.5, 0.4, 0.3, 0.25}},
}};

constexpr std::array<CorruptionKind, 11> kAll{
    CorruptionKind::identity,      CorruptionKind::gaussian_noise, CorruptionKind::shot_noise,
    CorruptionKind::impulse_noise, CorruptionKind::gaussian_blur,  CorruptionKind::defocus_blur,
    CorruptionKind::brightness,    CorruptionKind::contrast,       CorruptionKind::gamma,
    CorruptionKind::solarize,      CorruptionKind::pixelate};

constexpr std::array<CorruptionKind, 8> kTraining{
    CorruptionKind::gaussian_noise, CorruptionKind::shot_noise, CorruptionKind::impulse_noise,
    CorruptionKind::gaussian_blur,  CorruptionKind::brightness, CorruptionKind::contrast,
    CorruptionKind::gamma,          CorruptionKind::solarize};

constexpr std::array<CorruptionKind, 10> kEvaluation{
    CorruptionKind::gaussian_noise, CorruptionKind::shot_noise,  CorruptionKind::impulse_noise,
    CorruptionKind::gaussian_blur,  CorruptionKind::defocus_blur, CorruptionKind::brightness,
    CorruptionKind::contrast,       CorruptionKind::gamma,       CorruptionKind::solarize,
    CorruptionKind::pixelate};

constexpr std::array<CorruptionKind, 3> kNoise{
    CorruptionKind::gaussian_noise, CorruptionKind::shot_noise, CorruptionKind::impulse_noise};

const KindInfo& info(CorruptionKind kind) {
  for (const auto& k : kCatalog)
    if (k.kind == kind) return k;
  throw ConfigError("unknown corruption kind " + std::to_string(static_cast<int>(kind)));
}

// numpy-style 'reflect' (edge sample not repeated), valid for any offset.
int reflect(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

void clip(ImageSample& img) {
  for (float& p : img.pixels) p = std::clamp(p, 0.0F, 1.0F);
}

template <typename Fn>
void pointwise(ImageSample& img, Fn fn) {
  for (float& p : img.pixels) p = static_cast<float>(fn(static_cast<double>(p)));
}

template <typename Fn>
void per_pixel_random(ImageSample& img, std::uint64_t seed, Fn fn) {
  for (std::size_t i = 0; i < img.pixels.size(); ++i) {
    CounterRng rng(derive_seed(seed, {i}));
    img.pixels[i] = static_cast<float>(fn(static_cast<double>(img.pixels[i]), rng));
  }
}

void convolve_separable(ImageSample& img, const std::vector<double>& kernel) {
  const int r = static_cast<int>(kernel.size() / 2);
  const int h = img.shape.height;
  const int w = img.shape.width;
  std::vector<double> tmp(static_cast<std::size_t>(h) * w);
  for (int c = 0; c < img.shape.channels; ++c) {
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        double acc = 0;
        for (int k = -r; k <= r; ++k) acc += kernel[k + r] * img.at(c, reflect(y + k, h), x);
        tmp[static_cast<std::size_t>(y) * w + x] = acc;
      }
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        double acc = 0;
        for (int k = -r; k <= r; ++k)
          acc += kernel[k + r] * tmp[static_cast<std::size_t>(y) * w + reflect(x + k, w)];
        img.at(c, y, x) = static_cast<float>(acc);
      }
  }
}

void gaussian_blur(ImageSample& img, double sigma) {
  const int r = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> kernel(2 * r + 1);
  for (int k = -r; k <= r; ++k) kernel[k + r] = std::exp(-(k * k) / (2.0 * sigma * sigma));
  const double sum = std::accumulate(kernel.begin(), kernel.end(), 0.0);
  for (double& v : kernel) v /= sum;
  convolve_separable(img, kernel);
}

void defocus_blur(ImageSample& img, double radius) {
  const int r = static_cast<int>(std::ceil(radius));
  const int side = 2 * r + 1;
  constexpr int kSub = 8;
  std::vector<double> kernel(static_cast<std::size_t>(side) * side);
  for (int ky = -r; ky <= r; ++ky)
    for (int kx = -r; kx <= r; ++kx) {
      int hits = 0;
      for (int sy = 0; sy < kSub; ++sy)
        for (int sx = 0; sx < kSub; ++sx) {
          const double py = ky - 0.5 + (sy + 0.5) / kSub;
          const double px = kx - 0.5 + (sx + 0.5) / kSub;
          hits += (py * py + px * px <= radius * radius) ? 1 : 0;
        }
      kernel[static_cast<std::size_t>(ky + r) * side + (kx + r)] =
          static_cast<double>(hits) / (kSub * kSub);
    }
  const double sum = std::accumulate(kernel.begin(), kernel.end(), 0.0);
  for (double& v : kernel) v /= sum;

  const ImageSample src = img;
  const int h = img.shape.height;
  const int w = img.shape.width;
  for (int c = 0; c < img.shape.channels; ++c)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        double acc = 0;
        for (int ky = -r; ky <= r; ++ky)
          for (int kx = -r; kx <= r; ++kx)
            acc += kernel[static_cast<std::size_t>(ky + r) * side + (kx + r)] *
                   src.at(c, reflect(y + ky, h), reflect(x + kx, w));
        img.at(c, y, x) = static_cast<float>(acc);
      }
}

// Area-average down to round(side * factor) cells, then nearest-neighbour up.
void pixelate(ImageSample& img, double factor) {
  const int h = img.shape.height;
  const int w = img.shape.width;
  const int dh = std::max(1, static_cast<int>(std::lround(h * factor)));
  const int dw = std::max(1, static_cast<int>(std::lround(w * factor)));
  std::vector<double> sum(static_cast<std::size_t>(dh) * dw);
  std::vector<int> count(sum.size());
  for (int c = 0; c < img.shape.channels; ++c) {
    std::fill(sum.begin(), sum.end(), 0.0);
    std::fill(count.begin(), count.end(), 0);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const std::size_t cell = static_cast<std::size_t>(y * dh / h) * dw + (x * dw / w);
        sum[cell] += img.at(c, y, x);
        ++count[cell];
      }
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const std::size_t cell = static_cast<std::size_t>(y * dh / h) * dw + (x * dw / w);
        img.at(c, y, x) = static_cast<float>(sum[cell] / count[cell]);
      }
  }
}

void contrast(ImageSample& img, double scale) {
  const std::size_t plane = static_cast<std::size_t>(img.shape.height) * img.shape.width;
  for (int c = 0; c < img.shape.channels; ++c) {
    auto begin = img.pixels.begin() + static_cast<std::ptrdiff_t>(c * plane);
    const double mean =
        std::accumulate(begin, begin + static_cast<std::ptrdiff_t>(plane), 0.0) / plane;
    std::for_each(begin, begin + static_cast<std::ptrdiff_t>(plane), [&](float& p) {
      p = static_cast<float>((p - mean) * scale + mean);
    });
  }
}

}  // namespace

std::string_view to_string(CorruptionKind kind) noexcept {
  for (const auto& k : kCatalog)
    if (k.kind == kind) return k.name;
  return "unknown";
}

CorruptionKind parse_kind(std::string_view name) {
  for (const auto& k : kCatalog)
    if (k.name == name) return k.kind;
  throw ConfigError("unknown corruption kind '" + std::string(name) + "'");
}

std::span<const CorruptionKind> all_kinds() noexcept { return kAll; }
std::span<const CorruptionKind> training_kinds() noexcept { return kTraining; }
std::span<const CorruptionKind> evaluation_kinds() noexcept { return kEvaluation; }
std::span<const CorruptionKind> noise_kinds() noexcept { return kNoise; }

bool is_probabilistic(CorruptionKind kind) noexcept {
  return std::find(kNoise.begin(), kNoise.end(), kind) != kNoise.end();
}

bool is_blur(CorruptionKind kind) noexcept {
  return kind == CorruptionKind::gaussian_blur || kind == CorruptionKind::defocus_blur;
}

double severity_parameter(CorruptionKind kind, int severity) {
  if (severity < kMinSeverity || severity > kMaxSeverity)
    throw ConfigError("severity must be in [1, 5], got " + std::to_string(severity));
  return info(kind).table[static_cast<std::size_t>(severity - 1)];
}

ImageSample apply_corruption(const ImageSample& image, const CorruptionSpec& spec) {
  const double param = severity_parameter(spec.kind, spec.severity);
  ImageSample out = image;
  switch (spec.kind) {
    case CorruptionKind::identity:
      return out;
    case CorruptionKind::gaussian_noise:
      per_pixel_random(out, spec.seed,
                       [&](double p, CounterRng& rng) { return p + param * rng.normal(); });
      break;
    case CorruptionKind::shot_noise:
      per_pixel_random(out, spec.seed, [&](double p, CounterRng& rng) {
        return static_cast<double>(rng.poisson(std::max(p, 0.0) * param)) / param;
      });
      break;
    case CorruptionKind::impulse_noise:
      per_pixel_random(out, spec.seed, [&](double p, CounterRng& rng) {
        const double u = rng.uniform();
        if (u < param / 2) return 0.0;
        if (u < param) return 1.0;
        return p;
      });
      break;
    case CorruptionKind::gaussian_blur:
      gaussian_blur(out, param);
      break;
    case CorruptionKind::defocus_blur:
      defocus_blur(out, param);
      break;
    case CorruptionKind::brightness:
      pointwise(out, [&](double p) { return p + param; });
      break;
    case CorruptionKind::contrast:
      contrast(out, param);
      break;
    case CorruptionKind::gamma:
      pointwise(out, [&](double p) { return std::pow(std::max(p, 0.0), param); });
      break;
    case CorruptionKind::solarize:
      pointwise(out, [&](double p) { return p >= param ? 1.0 - p : p; });
      break;
    case CorruptionKind::pixelate:
      pixelate(out, param);
      break;
  }
  clip(out);
  return out;
}

void AugmentationPolicy::validate() const {
  if (kinds.empty()) throw ConfigError("augmentation policy needs at least one kind");
  if (!(identity_probability >= 0.0 && identity_probability <= 1.0))
    throw ConfigError("identity_probability must be in [0, 1]");
  double total = 0;
  for (double w : severity_weights) {
    if (!(w >= 0.0)) throw ConfigError("severity weights must be non-negative");
    total += w;
  }
  if (total <= 0.0) throw ConfigError("severity weights must not all be zero");
}

AugmentationPolicy AugmentationPolicy::training_default() {
  AugmentationPolicy p;
  p.kinds.assign(kTraining.begin(), kTraining.end());
  p.identity_probability = 0.1;
  return p;
}

AugmentationPolicy AugmentationPolicy::only(CorruptionKind kind) {
  AugmentationPolicy p;
  p.kinds = {kind};
  return p;
}

CorruptionSpec sample_spec(const AugmentationPolicy& policy, std::uint64_t rng_seed) {
  policy.validate();
  CounterRng rng(rng_seed);
  CorruptionSpec spec;
  const bool keep_clean = rng.uniform() < policy.identity_probability;
  spec.kind = policy.kinds[rng.below(policy.kinds.size())];
  const double total =
      std::accumulate(policy.severity_weights.begin(), policy.severity_weights.end(), 0.0);
  double u = rng.uniform() * total;
  spec.severity = kMaxSeverity;
  for (int s = 0; s < 5; ++s) {
    if (u < policy.severity_weights[static_cast<std::size_t>(s)]) {
      spec.severity = s + 1;
      break;
    }
    u -= policy.severity_weights[static_cast<std::size_t>(s)];
  }
  spec.seed = rng.next_u64();
  if (keep_clean) spec.kind = CorruptionKind::identity;
  return spec;
}

VariantSet make_variant_set(const ImageSample& clean, const AugmentationPolicy& policy,
                            std::uint64_t base_seed, int count) {
  if (count < 2) throw ConfigError("a variant set needs at least 2 variants");
  VariantSet set;
  set.clean = clean;
  set.variants.reserve(static_cast<std::size_t>(count));
  set.specs.reserve(static_cast<std::size_t>(count));
  for (int slot = 0; slot < count; ++slot) {
    const auto spec = sample_spec(policy, derive_seed(base_seed, {static_cast<std::uint64_t>(slot)}));
    set.variants.push_back(apply_corruption(clean, spec));
    set.specs.push_back(spec);
  }
  return set;
}

}  // namespace unoranic::augment
