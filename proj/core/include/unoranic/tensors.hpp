#pragma once

#include <torch/torch.h>

#include <span>
#include <vector>

#include "unoranic/dataio.hpp"

namespace unoranic {

// Stacks samples into a float32 [batch, C, H, W] tensor.
torch::Tensor to_tensor(std::span<const data::ImageSample> samples);
torch::Tensor to_tensor(std::span<const data::ImageSample* const> samples);

// Splits a [batch, C, H, W] tensor back into samples (labels unset).
std::vector<data::ImageSample> to_samples(const torch::Tensor& images);

}  // namespace unoranic
