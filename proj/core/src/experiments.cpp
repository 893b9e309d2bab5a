#include "unoranic/experiments.hpp"

#include <algorithm>
#include <cmath>

#include "unoranic/errors.hpp"
#include "unoranic/seed.hpp"
#include "unoranic/tensors.hpp"

namespace unoranic::eval {
namespace {

constexpr std::uint64_t kDetectionTag = 0x444554ULL;
constexpr std::uint64_t kProbeTrainTag = 0x5452ULL;
constexpr std::uint64_t kProbeTestTag = 0x5445ULL;

// Runs `f` over consecutive chunks in eval mode without autograd and
// concatenates the results along dim 0.
template <class F>
torch::Tensor batched(model::ModelBundle& bundle, std::span<const data::ImageSample> images, F&& f) {
  if (images.empty()) throw ShapeError("no images to evaluate");
  const auto previous = bundle.mode();
  bundle.set_mode(model::Mode::eval);
  torch::NoGradGuard no_grad;
  std::vector<torch::Tensor> parts;
  for (std::size_t start = 0; start < images.size(); start += kEvalBatch) {
    const auto chunk = images.subspan(start, std::min(kEvalBatch, images.size() - start));
    parts.push_back(f(to_tensor(chunk).to(bundle.dtype())).to(torch::kFloat32));
  }
  bundle.set_mode(previous);
  return torch::cat(parts, 0);
}

void check_shape(const model::ModelBundle& bundle, const data::Dataset& ds) {
  const auto& a = bundle.arch;
  if (!(ds.shape() == data::ImageShape{a.input_channels, a.input_side, a.input_side}))
    throw ArtifactMismatchError("dataset '" + ds.name + "' images do not match the model input shape");
}

std::vector<std::int64_t> labels_of(const data::Dataset& ds) {
  std::vector<std::int64_t> out;
  out.reserve(ds.size());
  for (const auto& s : ds.samples) {
    if (!s.label) throw ConfigError("dataset '" + ds.name + "' has unlabeled samples");
    out.push_back(*s.label);
  }
  return out;
}

std::vector<double> psnr_list(std::span<const data::ImageSample> ref, std::span<const data::ImageSample> cand) {
  std::vector<double> out(ref.size());
  for (std::size_t i = 0; i < ref.size(); ++i) out[i] = psnr(ref[i], cand[i]);
  return out;
}

double mean_psnr(std::span<const data::ImageSample> ref, std::span<const data::ImageSample> cand) {
  const auto v = psnr_list(ref, cand);
  return summarize_psnr(v).mean;
}

std::vector<data::ImageSample> corrupt_all(const data::Dataset& ds, augment::CorruptionKind kind,
                                           int severity, std::uint64_t seed) {
  std::vector<data::ImageSample> out;
  out.reserve(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    augment::CorruptionSpec spec{kind, severity,
                                 derive_seed(seed, {static_cast<std::uint64_t>(kind),
                                                    static_cast<std::uint64_t>(severity), i})};
    out.push_back(augment::apply_corruption(ds.samples[i], spec));
    out.back().label = ds.samples[i].label;
  }
  return out;
}

}  // namespace

torch::Tensor embed(model::ModelBundle& bundle, EmbeddingSource source,
                    std::span<const data::ImageSample> images) {
  if (source != EmbeddingSource::anatomy && !bundle.has_characteristic_branch())
    throw ConfigError("model has no characteristic branch");
  return batched(bundle, images, [&](const torch::Tensor& x) {
    switch (source) {
      case EmbeddingSource::anatomy: return model::encode_anatomy(bundle, x);
      case EmbeddingSource::characteristic: return model::encode_characteristic(bundle, x);
      case EmbeddingSource::concat:
        break;
    }
    return torch::cat({model::encode_anatomy(bundle, x), model::encode_characteristic(bundle, x)}, 1);
  });
}

std::vector<data::ImageSample> revise(model::ModelBundle& bundle, std::span<const data::ImageSample> images) {
  return to_samples(batched(bundle, images, [&](const torch::Tensor& x) {
    return model::decode_anatomy(bundle, model::encode_anatomy(bundle, x));
  }));
}

std::vector<data::ImageSample> reconstruct(model::ModelBundle& bundle,
                                           std::span<const data::ImageSample> images) {
  if (!bundle.has_characteristic_branch()) return revise(bundle, images);
  return to_samples(batched(bundle, images, [&](const torch::Tensor& x) {
    return model::decode_joint(bundle, model::encode_anatomy(bundle, x),
                               model::encode_characteristic(bundle, x));
  }));
}

PsnrReport reconstruction_experiment(model::ModelBundle& bundle, const data::Dataset& test) {
  check_shape(bundle, test);
  PsnrReport r;
  r.dataset = test.name;
  r.model_kind = bundle.kind;
  const auto recon = reconstruct(bundle, test.samples);
  r.per_sample = psnr_list(test.samples, recon);
  const auto s = summarize_psnr(r.per_sample);
  r.mean_psnr = s.mean;
  r.infinite_count = s.infinite_count;
  return r;
}

RevisionReport revision_experiment(model::ModelBundle& bundle, const data::Dataset& test,
                                   const std::vector<augment::CorruptionKind>& kinds, int severity,
                                   std::uint64_t seed) {
  check_shape(bundle, test);
  if (severity < 1 || severity > 5) throw ConfigError("revision severity must be in 1..5");
  RevisionReport r;
  r.dataset = test.name;
  r.psnr_clean_reference = mean_psnr(test.samples, revise(bundle, test.samples));
  for (auto kind : kinds) {
    if (std::count(kinds.begin(), kinds.end(), kind) > 1)
      throw ConfigError("revision: corruption '" + std::string(augment::to_string(kind)) + "' listed twice");
    const auto corrupted = corrupt_all(test, kind, severity, seed);
    RevisionEntry e;
    e.kind = kind;
    e.severity = kind == augment::CorruptionKind::identity ? 0 : severity;
    e.psnr_corrupted = mean_psnr(test.samples, corrupted);
    e.psnr_revised = mean_psnr(test.samples, revise(bundle, corrupted));
    r.entries.push_back(e);
  }
  return r;
}

CorruptionDetectionSet corruption_detection_dataset(const data::Dataset& dataset,
                                                    const std::vector<augment::CorruptionKind>& catalog,
                                                    std::uint64_t seed) {
  std::vector<augment::CorruptionKind> kinds;
  for (auto k : catalog)
    if (k != augment::CorruptionKind::identity) kinds.push_back(k);
  if (kinds.empty()) throw ConfigError("corruption detection needs a non-empty catalog");
  CorruptionDetectionSet out;
  out.images.reserve(dataset.size());
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    CounterRng rng(derive_seed(seed, {kDetectionTag, i}));
    augment::CorruptionSpec spec;
    if (rng.uniform() >= 0.5) {
      spec.kind = kinds[rng.below(kinds.size())];
      spec.severity = 1 + static_cast<int>(rng.below(5));
      spec.seed = rng.next_u64();
    }
    const bool corrupted = spec.kind != augment::CorruptionKind::identity;
    out.images.push_back(corrupted ? augment::apply_corruption(dataset.samples[i], spec) : dataset.samples[i]);
    out.images.back().label = corrupted ? 1 : 0;
    out.labels.push_back(corrupted ? 1 : 0);
    out.specs.push_back(spec);
  }
  return out;
}

std::vector<ProbeResult> probe_experiment(model::ModelBundle& bundle, const data::Dataset& train,
                                          const data::Dataset& test, const ProbeExperimentConfig& config) {
  check_shape(bundle, train);
  check_shape(bundle, test);
  std::vector<EmbeddingSource> sources{EmbeddingSource::anatomy};
  if (bundle.has_characteristic_branch()) {
    sources.push_back(EmbeddingSource::characteristic);
    sources.push_back(EmbeddingSource::concat);
  }
  const auto train_labels = labels_of(train);
  const auto test_labels = labels_of(test);
  const int classes = std::max(2, train.class_count);
  const auto det_train = corruption_detection_dataset(train, config.catalog, derive_seed(config.seed, {kProbeTrainTag}));
  const auto det_test = corruption_detection_dataset(test, config.catalog, derive_seed(config.seed, {kProbeTestTag}));

  std::vector<ProbeResult> results;
  for (auto source : sources) {
    auto r = train_linear_probe(embed(bundle, source, train.samples), train_labels,
                                embed(bundle, source, test.samples), test_labels, classes, config.probe);
    r.task = ProbeTask::classification;
    r.source = source;
    results.push_back(r);
  }
  for (auto source : sources) {
    auto r = train_linear_probe(embed(bundle, source, det_train.images), det_train.labels,
                                embed(bundle, source, det_test.images), det_test.labels, 2, config.probe);
    r.task = ProbeTask::corruption_detection;
    r.source = source;
    results.push_back(r);
  }
  return results;
}

double RobustnessReport::auc(const std::string& model, augment::CorruptionKind kind, int severity) const {
  for (const auto& c : cells)
    if (c.model == model && c.severity == severity && (severity == 0 || c.kind == kind)) return c.auc;
  throw ConfigError("robustness report has no cell for " + model);
}

double RobustnessReport::mean_auc(const std::string& model, const std::vector<augment::CorruptionKind>& kinds,
                                  int severity) const {
  if (kinds.empty()) throw ConfigError("mean_auc needs at least one kind");
  double sum = 0;
  for (auto k : kinds) sum += auc(model, k, severity);
  return sum / static_cast<double>(kinds.size());
}

RobustnessReport robustness_sweep(const std::vector<RobustnessModel>& models, const data::Dataset& test,
                                  const std::vector<augment::CorruptionKind>& kinds, std::uint64_t seed) {
  if (models.empty()) throw ConfigError("robustness sweep needs at least one model");
  for (const auto& m : models) {
    if (!m.bundle || !m.probe) throw ConfigError("robustness model '" + m.name + "' lacks a bundle or probe");
    check_shape(*m.bundle, test);
  }
  const auto labels = labels_of(test);
  RobustnessReport r;
  r.dataset = test.name;
  auto score = [&](const RobustnessModel& m, std::span<const data::ImageSample> images) {
    return m.probe->evaluate(embed(*m.bundle, m.source, images), labels).auc;
  };
  for (const auto& m : models)
    r.cells.push_back({m.name, augment::CorruptionKind::identity, 0, score(m, test.samples)});
  for (auto kind : kinds) {
    for (int severity = 1; severity <= 5; ++severity) {
      const auto corrupted = corrupt_all(test, kind, severity, seed);
      for (const auto& m : models) r.cells.push_back({m.name, kind, severity, score(m, corrupted)});
    }
  }
  return r;
}

OrthogonalizationStats orthogonalization(model::ModelBundle& bundle, const data::Dataset& dataset,
                                         const augment::AugmentationPolicy& policy, std::uint64_t seed,
                                         int variant_count) {
  check_shape(bundle, dataset);
  if (dataset.size() < 2) throw ConfigError("orthogonalization needs at least two images");
  std::vector<std::vector<data::ImageSample>> slots(static_cast<std::size_t>(variant_count));
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    auto set = augment::make_variant_set(dataset.samples[i], policy, derive_seed(seed, {i}), variant_count);
    for (int k = 0; k < variant_count; ++k) slots[k].push_back(std::move(set.variants[k]));
  }
  std::vector<torch::Tensor> emb;
  for (const auto& s : slots) emb.push_back(embed(bundle, EmbeddingSource::anatomy, s).to(torch::kFloat64));

  OrthogonalizationStats st;
  double intra = 0;
  int pairs = 0;
  for (int a = 0; a < variant_count; ++a)
    for (int b = a + 1; b < variant_count; ++b, ++pairs)
      intra += torch::linalg_vector_norm(emb[a] - emb[b], 2, {1}).mean().item<double>();
  st.intra = intra / pairs;
  const auto n = static_cast<double>(dataset.size());
  // Sum over ordered pairs i != j; the diagonal of cdist is zero.
  st.inter = torch::cdist(emb[0], emb[0]).sum().item<double>() / (n * (n - 1));
  return st;
}

}  // namespace unoranic::eval
