#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <string>
#include <vector>

#include "unoranic/augment.hpp"
#include "unoranic/dataio.hpp"
#include "unoranic/metrics.hpp"
#include "unoranic/model.hpp"
#include "unoranic/probe.hpp"

namespace unoranic::eval {

inline constexpr std::size_t kEvalBatch = 256;

// Frozen embeddings in eval mode, [n, d] float32. The bundle's mode is restored.
torch::Tensor embed(model::ModelBundle& bundle, EmbeddingSource source,
                    std::span<const data::ImageSample> images);
// Images in, anatomy-branch reconstruction D_A(E_A(x)) out.
std::vector<data::ImageSample> revise(model::ModelBundle& bundle, std::span<const data::ImageSample> images);
// Full reconstruction: D(E_A(x) (+) E_C(x)) for unORANIC, D_A(E_A(x)) for the AE.
std::vector<data::ImageSample> reconstruct(model::ModelBundle& bundle,
                                           std::span<const data::ImageSample> images);

struct PsnrReport {
  std::string dataset;
  model::ModelKind model_kind = model::ModelKind::unoranic;
  double mean_psnr = 0;
  std::size_t infinite_count = 0;
  std::vector<double> per_sample;
};
PsnrReport reconstruction_experiment(model::ModelBundle& bundle, const data::Dataset& test);

struct RevisionEntry {
  augment::CorruptionKind kind = augment::CorruptionKind::identity;
  int severity = 0;
  double psnr_corrupted = 0;
  double psnr_revised = 0;
};
struct RevisionReport {
  std::string dataset;
  double psnr_clean_reference = 0;
  std::vector<RevisionEntry> entries;
};
// Every image gets corruption (kind, severity) with seed
// derive_seed(seed, {kind, severity, index}).
RevisionReport revision_experiment(model::ModelBundle& bundle, const data::Dataset& test,
                                   const std::vector<augment::CorruptionKind>& kinds, int severity,
                                   std::uint64_t seed);

struct CorruptionDetectionSet {
  std::vector<data::ImageSample> images;
  std::vector<std::int64_t> labels;  // 1 iff corrupted
  std::vector<augment::CorruptionSpec> specs;
};
// Each image stays clean with probability 1/2, otherwise receives a kind
// drawn uniformly from the catalog (identity removed) at a uniform severity.
CorruptionDetectionSet corruption_detection_dataset(const data::Dataset& dataset,
                                                    const std::vector<augment::CorruptionKind>& catalog,
                                                    std::uint64_t seed);

struct ProbeExperimentConfig {
  ProbeConfig probe;
  std::vector<augment::CorruptionKind> catalog{augment::evaluation_kinds().begin(),
                                                   augment::evaluation_kinds().end()};
  std::uint64_t seed = 0;
};
// Disease classification and corruption detection on every embedding the
// bundle has (anatomy; plus characteristic and concat for unORANIC).
std::vector<ProbeResult> probe_experiment(model::ModelBundle& bundle, const data::Dataset& train,
                                          const data::Dataset& test,
                                          const ProbeExperimentConfig& config = {});

struct RobustnessModel {
  std::string name;
  model::ModelBundle* bundle = nullptr;
  EmbeddingSource source = EmbeddingSource::anatomy;
  const LinearProbe* probe = nullptr;
};
struct RobustnessCell {
  std::string model;
  augment::CorruptionKind kind = augment::CorruptionKind::identity;
  int severity = 0;  // 0 is the clean column
  double auc = 0;
};
struct RobustnessReport {
  std::string dataset;
  std::vector<RobustnessCell> cells;

  double auc(const std::string& model, augment::CorruptionKind kind, int severity) const;
  // Mean over `kinds` at one severity.
  double mean_auc(const std::string& model, const std::vector<augment::CorruptionKind>& kinds,
                  int severity) const;
};
// Corrupted test sets are built once per (kind, severity) and shared by all models.
RobustnessReport robustness_sweep(const std::vector<RobustnessModel>& models, const data::Dataset& test,
                                  const std::vector<augment::CorruptionKind>& kinds, std::uint64_t seed);

// Anatomy-embedding spread: mean distance between variants of the same
// image over mean distance between different images (variant S each).
struct OrthogonalizationStats {
  double intra = 0;
  double inter = 0;
  double ratio() const { return intra / inter; }
};
OrthogonalizationStats orthogonalization(model::ModelBundle& bundle, const data::Dataset& dataset,
                                         const augment::AugmentationPolicy& policy, std::uint64_t seed,
                                         int variant_count = 3);

}  // namespace unoranic::eval
