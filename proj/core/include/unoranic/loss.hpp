#pragma once

#include <torch/torch.h>

#include <span>
#include <string_view>

namespace unoranic::loss {

// How a per-sample image difference is reduced:
//   l2norm: (1 / (N * M)) * ||target - recon||_2 over all pixels and channels
//   mse:    mean of squared differences over all pixels and channels
enum class ReconNorm { l2norm, mse };
std::string_view to_string(ReconNorm norm) noexcept;
ReconNorm parse_recon_norm(std::string_view name);

struct LossWeights {
  double reconstruction = 1.0;
  double consistency = 1.0;

  void validate() const;
};

struct LossBreakdown {
  double consistency = 0;          // L_C
  double recon_synthetic = 0;      // L_R_S
  double recon_anatomy = 0;        // L_R_I
  double total = 0;                // weighted sum
};

// Mean over the C(V, 2) unordered pairs of per-sample Euclidean distances
// between embeddings, averaged over the batch. Differentiable.
torch::Tensor consistency_loss(std::span<const torch::Tensor> embeddings);

// Batch mean of the per-sample reconstruction error. Differentiable.
torch::Tensor reconstruction_loss(const torch::Tensor& target, const torch::Tensor& recon,
                                  ReconNorm norm = ReconNorm::l2norm);

// weights.reconstruction * (l_ri + l_rs) + weights.consistency * l_c
torch::Tensor weighted_total(const torch::Tensor& l_c, const torch::Tensor& l_rs,
                             const torch::Tensor& l_ri, const LossWeights& weights);

// Scalar form of the weighted sum. Throws ConfigError on a negative weight.
LossBreakdown total_loss(double l_c, double l_rs, double l_ri, const LossWeights& weights);

}  // namespace unoranic::loss
