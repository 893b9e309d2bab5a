#include "unoranic/probe.hpp"

#include <ATen/CPUGeneratorImpl.h>

#include <cmath>

#include "unoranic/dataio.hpp"
#include "unoranic/errors.hpp"
#include "unoranic/metrics.hpp"
#include "unoranic/seed.hpp"

namespace unoranic::eval {

std::string_view to_string(ProbeTask task) noexcept {
  return task == ProbeTask::classification ? "classification" : "corruption_detection";
}

std::string_view to_string(EmbeddingSource source) noexcept {
  switch (source) {
    case EmbeddingSource::anatomy: return "anatomy";
    case EmbeddingSource::characteristic: return "characteristic";
    case EmbeddingSource::concat: return "concat";
  }
  return "?";
}

EmbeddingSource parse_embedding_source(std::string_view name) {
  if (name == "anatomy") return EmbeddingSource::anatomy;
  if (name == "characteristic") return EmbeddingSource::characteristic;
  if (name == "concat") return EmbeddingSource::concat;
  throw ConfigError("unknown embedding source '" + std::string(name) + "'");
}

void ProbeConfig::validate() const {
  if (epochs < 1) throw ConfigError("probe epochs must be >= 1");
  if (!(lr > 0)) throw ConfigError("probe lr must be positive");
  if (batch_size < 1) throw ConfigError("probe batch_size must be >= 1");
}

LinearProbe LinearProbe::fit(const torch::Tensor& embeddings, const std::vector<std::int64_t>& labels,
                             int class_count, const ProbeConfig& config) {
  config.validate();
  if (embeddings.dim() != 2) throw ShapeError("probe embeddings must be [n, d]");
  const auto n = embeddings.size(0);
  if (n != static_cast<std::int64_t>(labels.size())) throw ShapeError("probe: embeddings and labels differ in length");
  if (class_count < 2) throw ConfigError("probe needs class_count >= 2");
  std::vector<bool> seen(class_count, false);
  for (auto l : labels) {
    if (l < 0 || l >= class_count) throw ConfigError("probe label out of range");
    seen[l] = true;
  }
  if (std::count(seen.begin(), seen.end(), true) < 2)
    throw UndefinedMetricError("probe: training labels contain a single class");

  torch::NoGradGuard outer;
  LinearProbe p;
  p.class_count_ = class_count;
  const auto x = embeddings.detach().to(torch::kFloat32).contiguous();
  const auto d = x.size(1);
  if (config.standardize) {
    p.mean_ = x.mean(0);
    p.scale_ = 1.0 / (x.std(0, /*unbiased=*/false) + 1e-6);
  } else {
    p.mean_ = torch::zeros({d});
    p.scale_ = torch::ones({d});
  }
  const auto features = (x - p.mean_) * p.scale_;
  const auto targets = torch::tensor(labels, torch::kInt64);

  // Zero start: the problem is convex and the short fixed budget would
  // otherwise be dominated by the random initial weights.
  auto weight = torch::zeros({class_count, d}).requires_grad_(true);
  auto bias = torch::zeros({class_count}).requires_grad_(true);
  torch::optim::Adam opt({weight, bias}, torch::optim::AdamOptions(config.lr));

  std::vector<std::size_t> idx;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const auto order = data::permutation(static_cast<std::size_t>(n), derive_seed(config.seed, {static_cast<std::uint64_t>(epoch)}));
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const auto end = std::min(order.size(), start + config.batch_size);
      std::vector<std::int64_t> rows(order.begin() + start, order.begin() + end);
      const auto sel = torch::tensor(rows, torch::kInt64);
      torch::AutoGradMode grad(true);
      const auto logits = torch::nn::functional::linear(features.index_select(0, sel), weight, bias);
      const auto loss = torch::nn::functional::cross_entropy(logits, targets.index_select(0, sel));
      opt.zero_grad();
      loss.backward();
      opt.step();
    }
  }
  p.weight_ = weight.detach();
  p.bias_ = bias.detach();
  return p;
}

torch::Tensor LinearProbe::probabilities(const torch::Tensor& embeddings) const {
  if (embeddings.dim() != 2 || embeddings.size(1) != weight_.size(1))
    throw ShapeError("probe: embedding width does not match the trained probe");
  torch::NoGradGuard no_grad;
  const auto x = (embeddings.detach().to(torch::kFloat32) - mean_) * scale_;
  return torch::softmax(torch::nn::functional::linear(x, weight_, bias_).to(torch::kFloat64), 1);
}

std::vector<std::int64_t> LinearProbe::predict(const torch::Tensor& embeddings) const {
  const auto am = probabilities(embeddings).argmax(1).contiguous();
  return {am.data_ptr<std::int64_t>(), am.data_ptr<std::int64_t>() + am.numel()};
}

ProbeResult LinearProbe::evaluate(const torch::Tensor& embeddings, const std::vector<std::int64_t>& labels) const {
  const auto probs = probabilities(embeddings).contiguous();
  if (probs.size(0) != static_cast<std::int64_t>(labels.size()))
    throw ShapeError("probe: embeddings and labels differ in length");
  const auto* p = probs.data_ptr<double>();
  ProbeResult r;
  r.class_count = class_count_;
  if (class_count_ == 2) {
    std::vector<double> positive(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) positive[i] = p[2 * i + 1];
    r.auc = roc_auc(positive, labels);
  } else {
    r.auc = roc_auc_ovr(std::span<const double>(p, probs.numel()), labels, class_count_);
  }
  r.acc = accuracy(predict(embeddings), labels);
  return r;
}

ProbeResult train_linear_probe(const torch::Tensor& train_embeddings,
                               const std::vector<std::int64_t>& train_labels,
                               const torch::Tensor& test_embeddings,
                               const std::vector<std::int64_t>& test_labels, int class_count,
                               const ProbeConfig& config) {
  return LinearProbe::fit(train_embeddings, train_labels, class_count, config)
      .evaluate(test_embeddings, test_labels);
}

}  // namespace unoranic::eval
