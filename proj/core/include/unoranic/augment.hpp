#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "unoranic/dataio.hpp"

namespace unoranic::augment {

// Photometric corruption catalog. Names are the stable CLI spellings.
enum class CorruptionKind {
  identity,
  gaussian_noise,
  shot_noise,
  impulse_noise,
  gaussian_blur,
  defocus_blur,
  brightness,
  contrast,
  gamma,
  solarize,
  pixelate,
};

std::string_view to_string(CorruptionKind kind) noexcept;
CorruptionKind parse_kind(std::string_view name);

std::span<const CorruptionKind> all_kinds() noexcept;
// Default training catalog: pixel-aligned photometric kinds only (no
// pixelate/defocus, nothing that moves pixel coordinates).
std::span<const CorruptionKind> training_kinds() noexcept;
// Evaluation catalog: training kinds plus defocus_blur and pixelate.
std::span<const CorruptionKind> evaluation_kinds() noexcept;
std::span<const CorruptionKind> noise_kinds() noexcept;

bool is_probabilistic(CorruptionKind kind) noexcept;
bool is_blur(CorruptionKind kind) noexcept;

inline constexpr int kMinSeverity = 1;
inline constexpr int kMaxSeverity = 5;

struct CorruptionSpec {
  CorruptionKind kind = CorruptionKind::identity;
  int severity = 1;
  std::uint64_t seed = 0;

  friend bool operator==(const CorruptionSpec&, const CorruptionSpec&) = default;
};

// Severity -> strength table, fixed per kind:
//   gaussian_noise  sigma          0.04 0.08 0.12 0.18 0.26
//   shot_noise      photons/unit   60   25   12   5    3
//   impulse_noise   flip fraction  0.03 0.06 0.09 0.17 0.27
//   gaussian_blur   sigma (px)     0.4  0.6  0.9  1.3  1.8
//   defocus_blur    radius (px)    1.0  1.5  2.0  2.5  3.0
//   brightness      additive       0.1  0.2  0.3  0.4  0.5
//   contrast        scale          0.4  0.3  0.2  0.1  0.05
//   gamma           exponent       1.4  1.8  2.2  2.7  3.3
//   solarize        threshold      0.7  0.65 0.6  0.55 0.5
//   pixelate        side factor    0.6  0.5  0.4  0.3  0.25
// identity returns 0.
double severity_parameter(CorruptionKind kind, int severity);

// Pure function of (image, spec): same shape, label kept, clipped to [0, 1].
// Throws ConfigError for a severity outside [1, 5] or an unknown kind.
data::ImageSample apply_corruption(const data::ImageSample& image, const CorruptionSpec& spec);

struct AugmentationPolicy {
  std::vector<CorruptionKind> kinds;
  // Relative weights of severities 1..5.
  std::array<double, 5> severity_weights{1, 1, 1, 1, 1};
  double identity_probability = 0.0;

  void validate() const;
  static AugmentationPolicy training_default();
  static AugmentationPolicy only(CorruptionKind kind);
};

CorruptionSpec sample_spec(const AugmentationPolicy& policy, std::uint64_t rng_seed);

// A clean image together with independently corrupted variants {S, v1, ...}.
struct VariantSet {
  data::ImageSample clean;
  std::vector<data::ImageSample> variants;
  std::vector<CorruptionSpec> specs;

  const data::ImageSample& synthetic() const { return variants.front(); }
  // Z = C(|V|, 2).
  std::size_t pair_count() const noexcept { return variants.size() * (variants.size() - 1) / 2; }
};

// Slot k draws its spec from derive_seed(base_seed, {k}).
VariantSet make_variant_set(const data::ImageSample& clean, const AugmentationPolicy& policy,
                            std::uint64_t base_seed, int count = 3);

}  // namespace unoranic::augment
