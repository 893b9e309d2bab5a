#include "unoranic/model.hpp"

#include <ATen/CPUGeneratorImpl.h>

#include <cmath>

#include "unoranic/errors.hpp"
#include "unoranic/seed.hpp"

namespace unoranic::model {
namespace {

namespace nn = torch::nn;
namespace F = torch::nn::functional;

torch::Tensor leaky(const torch::Tensor& x, double slope) {
  return F::leaky_relu(x, F::LeakyReLUFuncOptions().negative_slope(slope));
}

nn::Conv2d conv3x3(int in, int out, int stride, bool bias) {
  return nn::Conv2d(nn::Conv2dOptions(in, out, 3).stride(stride).padding(1).bias(bias));
}

// Kaiming-normal (fan-in, leaky-ReLU gain) weights, zero biases, BN (1, 0).
void initialize(nn::Module& net, std::uint64_t seed, double slope) {
  auto gen = at::detail::createCPUGenerator(seed);
  const double gain = std::sqrt(2.0 / (1.0 + slope * slope));
  torch::NoGradGuard no_grad;
  for (auto& m : net.modules(/*include_self=*/false)) {
    const bool is_affine = m->as<nn::Conv2d>() || m->as<nn::ConvTranspose2d>() || m->as<nn::Linear>();
    if (is_affine) {
      for (auto& item : m->named_parameters(/*recurse=*/false)) {
        auto& p = item.value();
        if (item.key() == "weight") {
          const double fan_in = static_cast<double>(p[0].numel());
          p.normal_(0.0, gain / std::sqrt(fan_in), gen);
        } else {
          p.zero_();
        }
      }
    } else if (auto* bn = m->as<nn::BatchNorm2d>()) {
      bn->weight.fill_(1.0);
      bn->bias.zero_();
      bn->running_mean.zero_();
      bn->running_var.fill_(1.0);
    }
  }
}

void check_images(const ModelBundle& bundle, const torch::Tensor& images) {
  const auto& a = bundle.arch;
  if (images.dim() != 4 || images.size(1) != a.input_channels || images.size(2) != a.input_side ||
      images.size(3) != a.input_side)
    throw ShapeError("expected images [batch, " + std::to_string(a.input_channels) + ", " +
                     std::to_string(a.input_side) + ", " + std::to_string(a.input_side) +
                     "], got " + c10::str(images.sizes()));
}

void check_embedding(const torch::Tensor& emb, int width, const char* what) {
  if (emb.dim() != 2 || emb.size(1) != width)
    throw ShapeError(std::string(what) + ": expected embedding [batch, " + std::to_string(width) +
                     "], got " + c10::str(emb.sizes()));
}

}  // namespace

void ArchConfig::validate() const {
  if (input_channels != 1 && input_channels != 3)
    throw ConfigError("input_channels must be 1 or 3");
  if (block_count < 1) throw ConfigError("block_count must be >= 1");
  if (latent_dim < 1) throw ConfigError("latent_dim must be >= 1");
  if (base_channels < 2 || base_channels % 2 != 0)
    throw ConfigError("base_channels must be an even number >= 2");
  if (input_side < 1) throw ConfigError("input_side must be >= 1");
  if (!(leaky_slope >= 0.0)) throw ConfigError("leaky_slope must be non-negative");
  if (spatial_sizes().back() < 1) throw ConfigError("input_side too small for block_count");
}

std::vector<int> ArchConfig::spatial_sizes() const {
  std::vector<int> sizes{input_side};
  for (int b = 0; b < block_count; ++b) sizes.push_back((sizes.back() + 1) / 2);
  return sizes;
}

int ArchConfig::flatten_dim() const {
  const int side = spatial_sizes().back();
  return bottleneck_channels() * side * side;
}

std::string_view to_string(ModelKind kind) noexcept {
  return kind == ModelKind::unoranic ? "unoranic" : "vanilla_ae";
}

ModelKind parse_model_kind(std::string_view name) {
  if (name == "unoranic") return ModelKind::unoranic;
  if (name == "vanilla_ae") return ModelKind::vanilla_ae;
  throw ConfigError("unknown model kind '" + std::string(name) + "'");
}

ResidualBlockImpl::ResidualBlockImpl(int channels, double slope) : slope_(slope) {
  conv1_ = register_module("conv1", conv3x3(channels, channels, 1, false));
  bn1_ = register_module("bn1", nn::BatchNorm2d(channels));
  conv2_ = register_module("conv2", conv3x3(channels, channels, 1, false));
  bn2_ = register_module("bn2", nn::BatchNorm2d(channels));
}

torch::Tensor ResidualBlockImpl::forward(const torch::Tensor& x) {
  auto h = leaky(bn1_(conv1_(x)), slope_);
  h = leaky(bn2_(conv2_(h)), slope_);
  return x + h;
}

DownsampleBlockImpl::DownsampleBlockImpl(int in_channels, double slope) : slope_(slope) {
  // k=3, s=2, p=1 gives ceil(n / 2).
  conv_ = register_module("conv", conv3x3(in_channels, 2 * in_channels, 2, false));
  bn_ = register_module("bn", nn::BatchNorm2d(2 * in_channels));
}

torch::Tensor DownsampleBlockImpl::forward(const torch::Tensor& x) {
  return leaky(bn_(conv_(x)), slope_);
}

UpsampleBlockImpl::UpsampleBlockImpl(int in_channels, int output_padding, double slope)
    : slope_(slope) {
  conv_ = register_module(
      "conv", nn::ConvTranspose2d(nn::ConvTranspose2dOptions(in_channels, in_channels / 2, 3)
                                      .stride(2)
                                      .padding(1)
                                      .output_padding(output_padding)
                                      .bias(false)));
  bn_ = register_module("bn", nn::BatchNorm2d(in_channels / 2));
}

torch::Tensor UpsampleBlockImpl::forward(const torch::Tensor& x) {
  return leaky(bn_(conv_(x)), slope_);
}

EncoderImpl::EncoderImpl(const ArchConfig& arch) : arch_(arch) {
  arch_.validate();
  stem_conv_ = register_module("stem_conv", conv3x3(arch.input_channels, arch.stem_channels(), 1, false));
  stem_bn_ = register_module("stem_bn", nn::BatchNorm2d(arch.stem_channels()));
  for (int b = 0; b < arch.block_count; ++b) {
    const int c = arch.block_channels(b);
    residual_.push_back(register_module("residual" + std::to_string(b), ResidualBlock(c, arch.leaky_slope)));
    down_.push_back(register_module("down" + std::to_string(b), DownsampleBlock(c, arch.leaky_slope)));
  }
  project_ = register_module("project", nn::Linear(arch.flatten_dim(), arch.latent_dim));
}

torch::Tensor EncoderImpl::forward(const torch::Tensor& images) {
  auto h = leaky(stem_bn_(stem_conv_(images)), arch_.leaky_slope);
  for (std::size_t b = 0; b < residual_.size(); ++b) h = down_[b](residual_[b](h));
  return project_(h.flatten(1));
}

DecoderImpl::DecoderImpl(const ArchConfig& arch, int input_width)
    : arch_(arch), input_width_(input_width) {
  arch_.validate();
  expand_ = register_module("expand", nn::Linear(input_width, arch.flatten_dim()));
  const auto sizes = arch.spatial_sizes();
  for (int b = arch.block_count - 1; b >= 0; --b) {
    const int in_side = sizes[static_cast<std::size_t>(b) + 1];
    const int out_side = sizes[static_cast<std::size_t>(b)];
    const int output_padding = out_side - (2 * in_side - 1);
    const int idx = arch.block_count - 1 - b;
    up_.push_back(register_module("up" + std::to_string(idx),
                                  UpsampleBlock(2 * arch.block_channels(b), output_padding, arch.leaky_slope)));
    residual_.push_back(register_module("residual" + std::to_string(idx),
                                        ResidualBlock(arch.block_channels(b), arch.leaky_slope)));
  }
  head_ = register_module("head", conv3x3(arch.stem_channels(), arch.input_channels, 1, true));
}

torch::Tensor DecoderImpl::forward(const torch::Tensor& embedding) {
  const int side = arch_.spatial_sizes().back();
  auto h = leaky(expand_(embedding), arch_.leaky_slope)
               .view({embedding.size(0), arch_.bottleneck_channels(), side, side});
  for (std::size_t b = 0; b < up_.size(); ++b) h = residual_[b](up_[b](h));
  return torch::sigmoid(head_(h));
}

void ModelBundle::set_mode(Mode mode) {
  for (auto& [_, net] : networks()) net->train(mode == Mode::train);
}

Mode ModelBundle::mode() const {
  return anatomy_encoder->is_training() ? Mode::train : Mode::eval;
}

void ModelBundle::to(torch::Dtype dtype) {
  // Module::to(dtype) would also cast the integer batch counters.
  torch::NoGradGuard no_grad;
  for (auto& [_, net] : networks()) {
    for (auto& p : net->parameters()) p.set_data(p.to(dtype));
    for (auto& b : net->buffers())
      if (b.is_floating_point()) b.set_data(b.to(dtype));
  }
}

torch::Dtype ModelBundle::dtype() const {
  return anatomy_encoder->parameters().front().scalar_type();
}

std::vector<std::pair<std::string, std::shared_ptr<torch::nn::Module>>> ModelBundle::networks() const {
  std::vector<std::pair<std::string, std::shared_ptr<torch::nn::Module>>> out;
  if (!anatomy_encoder.is_empty()) out.emplace_back("anatomy_encoder", anatomy_encoder.ptr());
  if (!characteristic_encoder.is_empty())
    out.emplace_back("characteristic_encoder", characteristic_encoder.ptr());
  if (!anatomy_decoder.is_empty()) out.emplace_back("anatomy_decoder", anatomy_decoder.ptr());
  if (!joint_decoder.is_empty()) out.emplace_back("joint_decoder", joint_decoder.ptr());
  return out;
}

std::vector<torch::Tensor> ModelBundle::parameters() const {
  std::vector<torch::Tensor> out;
  for (const auto& [_, net] : networks())
    for (auto& p : net->parameters()) out.push_back(p);
  return out;
}

std::int64_t ModelBundle::parameter_count() const {
  std::int64_t n = 0;
  for (const auto& p : parameters()) n += p.numel();
  return n;
}

std::int64_t parameter_count(torch::nn::Module& module) {
  std::int64_t n = 0;
  for (const auto& p : module.parameters()) n += p.numel();
  return n;
}

ModelBundle init_model(const ArchConfig& arch, std::uint64_t seed, ModelKind kind) {
  arch.validate();
  ModelBundle b;
  b.arch = arch;
  b.kind = kind;
  b.anatomy_encoder = Encoder(arch);
  b.anatomy_decoder = Decoder(arch, arch.latent_dim);
  if (kind == ModelKind::unoranic) {
    b.characteristic_encoder = Encoder(arch);
    b.joint_decoder = Decoder(arch, 2 * arch.latent_dim);
  }
  // Sub-seeds are keyed by network role so the AE and unORANIC anatomy
  // branches start from the same weights for a given seed.
  initialize(*b.anatomy_encoder, derive_seed(seed, {0}), arch.leaky_slope);
  if (kind == ModelKind::unoranic)
    initialize(*b.characteristic_encoder, derive_seed(seed, {1}), arch.leaky_slope);
  initialize(*b.anatomy_decoder, derive_seed(seed, {2}), arch.leaky_slope);
  if (kind == ModelKind::unoranic)
    initialize(*b.joint_decoder, derive_seed(seed, {3}), arch.leaky_slope);
  b.set_mode(Mode::train);
  return b;
}

void copy_state(const ModelBundle& src, ModelBundle& dst) {
  if (!(src.arch == dst.arch) || src.kind != dst.kind)
    throw ArtifactMismatchError("copy_state: bundles differ in architecture or kind");
  torch::NoGradGuard no_grad;
  auto src_nets = src.networks();
  auto dst_nets = dst.networks();
  for (std::size_t i = 0; i < src_nets.size(); ++i) {
    auto sp = src_nets[i].second->named_parameters();
    for (auto& item : dst_nets[i].second->named_parameters()) item.value().copy_(sp[item.key()]);
    auto sb = src_nets[i].second->named_buffers();
    for (auto& item : dst_nets[i].second->named_buffers()) item.value().copy_(sb[item.key()]);
  }
}

ModelBundle clone(const ModelBundle& bundle) {
  ModelBundle out = init_model(bundle.arch, 0, bundle.kind);
  out.to(bundle.dtype());
  copy_state(bundle, out);
  out.set_mode(bundle.mode());
  return out;
}

torch::Tensor encode_anatomy(ModelBundle& bundle, const torch::Tensor& images) {
  check_images(bundle, images);
  return bundle.anatomy_encoder(images);
}

torch::Tensor encode_characteristic(ModelBundle& bundle, const torch::Tensor& images) {
  if (!bundle.has_characteristic_branch())
    throw ConfigError("vanilla AE bundle has no characteristic encoder");
  check_images(bundle, images);
  return bundle.characteristic_encoder(images);
}

torch::Tensor decode_anatomy(ModelBundle& bundle, const torch::Tensor& embedding) {
  check_embedding(embedding, bundle.arch.latent_dim, "decode_anatomy");
  return bundle.anatomy_decoder(embedding);
}

torch::Tensor decode_joint(ModelBundle& bundle, const torch::Tensor& anatomy_embedding,
                           const torch::Tensor& characteristic_embedding) {
  if (!bundle.has_characteristic_branch())
    throw ConfigError("vanilla AE bundle has no joint decoder");
  check_embedding(anatomy_embedding, bundle.arch.latent_dim, "decode_joint");
  check_embedding(characteristic_embedding, bundle.arch.latent_dim, "decode_joint");
  if (anatomy_embedding.size(0) != characteristic_embedding.size(0))
    throw ShapeError("decode_joint: batch sizes differ (" +
                     std::to_string(anatomy_embedding.size(0)) + " vs " +
                     std::to_string(characteristic_embedding.size(0)) + ")");
  return bundle.joint_decoder(torch::cat({anatomy_embedding, characteristic_embedding}, 1));
}

}  // namespace unoranic::model
