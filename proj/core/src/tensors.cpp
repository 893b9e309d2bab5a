#include "unoranic/tensors.hpp"

#include <algorithm>

#include "unoranic/errors.hpp"

namespace unoranic {
namespace {

template <typename Get>
torch::Tensor stack(std::size_t n, Get get) {
  if (n == 0) throw ShapeError("cannot stack an empty batch");
  const auto shape = get(0).shape;
  auto out = torch::empty({static_cast<std::int64_t>(n), shape.channels, shape.height, shape.width},
                          torch::kFloat32);
  float* dst = out.template data_ptr<float>();
  for (std::size_t i = 0; i < n; ++i) {
    const auto& s = get(i);
    if (!(s.shape == shape) || s.pixels.size() != shape.numel())
      throw ShapeError("cannot stack samples of different shapes");
    std::copy(s.pixels.begin(), s.pixels.end(), dst + i * shape.numel());
  }
  return out;
}

}  // namespace

torch::Tensor to_tensor(std::span<const data::ImageSample> samples) {
  return stack(samples.size(), [&](std::size_t i) -> const data::ImageSample& { return samples[i]; });
}

torch::Tensor to_tensor(std::span<const data::ImageSample* const> samples) {
  return stack(samples.size(), [&](std::size_t i) -> const data::ImageSample& { return *samples[i]; });
}

std::vector<data::ImageSample> to_samples(const torch::Tensor& images) {
  if (images.dim() != 4) throw ShapeError("to_samples expects [batch, C, H, W]");
  const auto t = images.detach().to(torch::kFloat32).contiguous();
  const data::ImageShape shape{static_cast<int>(t.size(1)), static_cast<int>(t.size(2)),
                               static_cast<int>(t.size(3))};
  std::vector<data::ImageSample> out(static_cast<std::size_t>(t.size(0)));
  const float* src = t.data_ptr<float>();
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i].shape = shape;
    out[i].pixels.assign(src + i * shape.numel(), src + (i + 1) * shape.numel());
  }
  return out;
}

}  // namespace unoranic
