#include "unoranic/loss.hpp"

#include <cmath>
#include <string>

#include "unoranic/errors.hpp"

namespace unoranic::loss {

std::string_view to_string(ReconNorm norm) noexcept {
  return norm == ReconNorm::l2norm ? "l2norm" : "mse";
}

ReconNorm parse_recon_norm(std::string_view name) {
  if (name == "l2norm") return ReconNorm::l2norm;
  if (name == "mse") return ReconNorm::mse;
  throw ConfigError("unknown recon_norm '" + std::string(name) + "'");
}

void LossWeights::validate() const {
  if (!(reconstruction >= 0.0) || !(consistency >= 0.0) || !std::isfinite(reconstruction) ||
      !std::isfinite(consistency))
    throw ConfigError("loss weights must be finite and non-negative");
}

torch::Tensor consistency_loss(std::span<const torch::Tensor> embeddings) {
  if (embeddings.size() < 2) throw ConfigError("consistency_loss needs at least 2 embeddings");
  for (const auto& e : embeddings)
    if (e.dim() != 2 || !e.sizes().equals(embeddings[0].sizes()))
      throw ShapeError("consistency_loss: embeddings must share a [batch, latent] shape");

  torch::Tensor sum;
  std::int64_t pairs = 0;
  for (std::size_t i = 0; i < embeddings.size(); ++i)
    for (std::size_t j = i + 1; j < embeddings.size(); ++j) {
      auto d = torch::linalg_vector_norm(embeddings[i] - embeddings[j], 2, {1});
      sum = sum.defined() ? sum + d : d;
      ++pairs;
    }
  return (sum / static_cast<double>(pairs)).mean();
}

torch::Tensor reconstruction_loss(const torch::Tensor& target, const torch::Tensor& recon,
                                  ReconNorm norm) {
  if (!target.sizes().equals(recon.sizes()))
    throw ShapeError("reconstruction_loss: shape mismatch " + c10::str(target.sizes()) + " vs " +
                     c10::str(recon.sizes()));
  if (target.dim() != 4) throw ShapeError("reconstruction_loss expects [batch, C, N, M]");
  const auto diff = (target - recon).flatten(1);
  if (norm == ReconNorm::mse) return diff.pow(2).mean(1).mean();
  const double pixels = static_cast<double>(target.size(2) * target.size(3));
  return (torch::linalg_vector_norm(diff, 2, {1}) / pixels).mean();
}

torch::Tensor weighted_total(const torch::Tensor& l_c, const torch::Tensor& l_rs,
                             const torch::Tensor& l_ri, const LossWeights& weights) {
  weights.validate();
  return weights.reconstruction * (l_ri + l_rs) + weights.consistency * l_c;
}

LossBreakdown total_loss(double l_c, double l_rs, double l_ri, const LossWeights& weights) {
  weights.validate();
  LossBreakdown b;
  b.consistency = l_c;
  b.recon_synthetic = l_rs;
  b.recon_anatomy = l_ri;
  b.total = weights.reconstruction * (l_ri + l_rs) + weights.consistency * l_c;
  return b;
}

}  // namespace unoranic::loss
