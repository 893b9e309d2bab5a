#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <string_view>
#include <vector>

namespace unoranic::eval {

enum class ProbeTask { classification, corruption_detection };
enum class EmbeddingSource { anatomy, characteristic, concat };
std::string_view to_string(ProbeTask task) noexcept;
std::string_view to_string(EmbeddingSource source) noexcept;
EmbeddingSource parse_embedding_source(std::string_view name);

struct ProbeConfig {
  int epochs = 100;
  double lr = 1e-3;
  std::size_t batch_size = 256;
  std::uint64_t seed = 0;
  // z-score features with training-set statistics before the affine map
  bool standardize = true;

  void validate() const;
};

struct ProbeResult {
  ProbeTask task = ProbeTask::classification;
  EmbeddingSource source = EmbeddingSource::anatomy;
  double auc = 0;
  double acc = 0;
  int class_count = 0;
};

// Single affine layer d -> class_count trained with softmax cross-entropy.
class LinearProbe {
 public:
  // embeddings: [n, d] float tensor; labels in [0, class_count).
  static LinearProbe fit(const torch::Tensor& embeddings, const std::vector<std::int64_t>& labels,
                         int class_count, const ProbeConfig& config = {});

  // Softmax probabilities, [n, class_count] float64.
  torch::Tensor probabilities(const torch::Tensor& embeddings) const;
  std::vector<std::int64_t> predict(const torch::Tensor& embeddings) const;
  // AUC (binary: positive-class probability; otherwise OvR macro) and ACC.
  ProbeResult evaluate(const torch::Tensor& embeddings, const std::vector<std::int64_t>& labels) const;

  int class_count() const noexcept { return class_count_; }
  int input_dim() const noexcept { return static_cast<int>(weight_.size(1)); }

 private:
  torch::Tensor weight_, bias_, mean_, scale_;
  int class_count_ = 0;
};

// Fits on the training embeddings and scores the test embeddings.
ProbeResult train_linear_probe(const torch::Tensor& train_embeddings,
                               const std::vector<std::int64_t>& train_labels,
                               const torch::Tensor& test_embeddings,
                               const std::vector<std::int64_t>& test_labels, int class_count,
                               const ProbeConfig& config = {});

}  // namespace unoranic::eval
