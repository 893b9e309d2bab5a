#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace unoranic::model {

// Encoder: stem conv (C -> base/2), then `block_count` x [residual block,
// stride-2 downsampling block] doubling channels and ceil-halving the side,
// then flatten -> dense -> latent_dim. Decoders mirror it with transposed
// convolutions and end in a 3x3 conv + sigmoid.
struct ArchConfig {
  int input_channels = 1;
  int input_side = 28;
  int block_count = 4;
  int base_channels = 32;
  int latent_dim = 256;
  double leaky_slope = 0.01;

  void validate() const;
  // Side after each block, starting with input_side: 28, 14, 7, 4, 2.
  std::vector<int> spatial_sizes() const;
  int stem_channels() const { return base_channels / 2; }
  // Channels entering block i (residual width); block i outputs twice that.
  int block_channels(int block) const { return stem_channels() << block; }
  int bottleneck_channels() const { return stem_channels() << block_count; }
  int flatten_dim() const;

  friend bool operator==(const ArchConfig&, const ArchConfig&) = default;
};

enum class ModelKind { unoranic, vanilla_ae };
std::string_view to_string(ModelKind kind) noexcept;
ModelKind parse_model_kind(std::string_view name);

enum class Mode { train, eval };

class ResidualBlockImpl : public torch::nn::Module {
 public:
  ResidualBlockImpl(int channels, double slope);
  torch::Tensor forward(const torch::Tensor& x);

 private:
  torch::nn::Conv2d conv1_{nullptr}, conv2_{nullptr};
  torch::nn::BatchNorm2d bn1_{nullptr}, bn2_{nullptr};
  double slope_;
};
TORCH_MODULE(ResidualBlock);

class DownsampleBlockImpl : public torch::nn::Module {
 public:
  DownsampleBlockImpl(int in_channels, double slope);
  torch::Tensor forward(const torch::Tensor& x);

 private:
  torch::nn::Conv2d conv_{nullptr};
  torch::nn::BatchNorm2d bn_{nullptr};
  double slope_;
};
TORCH_MODULE(DownsampleBlock);

class UpsampleBlockImpl : public torch::nn::Module {
 public:
  // output_padding selects between the two output sides 2n-1 and 2n.
  UpsampleBlockImpl(int in_channels, int output_padding, double slope);
  torch::Tensor forward(const torch::Tensor& x);

 private:
  torch::nn::ConvTranspose2d conv_{nullptr};
  torch::nn::BatchNorm2d bn_{nullptr};
  double slope_;
};
TORCH_MODULE(UpsampleBlock);

class EncoderImpl : public torch::nn::Module {
 public:
  explicit EncoderImpl(const ArchConfig& arch);
  // [batch, C, N, N] -> [batch, latent_dim]
  torch::Tensor forward(const torch::Tensor& images);

 private:
  ArchConfig arch_;
  torch::nn::Conv2d stem_conv_{nullptr};
  torch::nn::BatchNorm2d stem_bn_{nullptr};
  std::vector<ResidualBlock> residual_;
  std::vector<DownsampleBlock> down_;
  torch::nn::Linear project_{nullptr};
};
TORCH_MODULE(Encoder);

class DecoderImpl : public torch::nn::Module {
 public:
  DecoderImpl(const ArchConfig& arch, int input_width);
  // [batch, input_width] -> [batch, C, N, N] in (0, 1)
  torch::Tensor forward(const torch::Tensor& embedding);
  int input_width() const { return input_width_; }

 private:
  ArchConfig arch_;
  int input_width_;
  torch::nn::Linear expand_{nullptr};
  std::vector<UpsampleBlock> up_;
  std::vector<ResidualBlock> residual_;
  torch::nn::Conv2d head_{nullptr};
};
TORCH_MODULE(Decoder);

// The four networks. A vanilla AE bundle has only the anatomy branch
// (characteristic_encoder and joint_decoder are null).
struct ModelBundle {
  ArchConfig arch;
  ModelKind kind = ModelKind::unoranic;
  Encoder anatomy_encoder{nullptr};
  Encoder characteristic_encoder{nullptr};
  Decoder anatomy_decoder{nullptr};
  Decoder joint_decoder{nullptr};

  bool has_characteristic_branch() const { return !characteristic_encoder.is_empty(); }
  void set_mode(Mode mode);
  Mode mode() const;
  void to(torch::Dtype dtype);
  torch::Dtype dtype() const;

  // (network name, module) for every present network, in a fixed order:
  // anatomy_encoder, characteristic_encoder, anatomy_decoder, joint_decoder.
  std::vector<std::pair<std::string, std::shared_ptr<torch::nn::Module>>> networks() const;
  std::vector<torch::Tensor> parameters() const;
  std::int64_t parameter_count() const;
};

ModelBundle init_model(const ArchConfig& arch, std::uint64_t seed,
                       ModelKind kind = ModelKind::unoranic);
// Deep copy of parameters and buffers.
ModelBundle clone(const ModelBundle& bundle);
// Copies parameters and buffers of `src` into `dst` (same architecture).
void copy_state(const ModelBundle& src, ModelBundle& dst);

torch::Tensor encode_anatomy(ModelBundle& bundle, const torch::Tensor& images);
torch::Tensor encode_characteristic(ModelBundle& bundle, const torch::Tensor& images);
torch::Tensor decode_anatomy(ModelBundle& bundle, const torch::Tensor& embedding);
// D(anatomy (+) characteristic); concatenation order is anatomy first.
torch::Tensor decode_joint(ModelBundle& bundle, const torch::Tensor& anatomy_embedding,
                           const torch::Tensor& characteristic_embedding);

std::int64_t parameter_count(torch::nn::Module& module);

}  // namespace unoranic::model
