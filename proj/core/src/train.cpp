#include "unoranic/train.hpp"

#include <chrono>
#include <cmath>

#include "unoranic/errors.hpp"
#include "unoranic/seed.hpp"
#include "unoranic/tensors.hpp"

namespace unoranic::train {
namespace {

// Seed-path tags keep the training, validation and shuffle streams apart.
constexpr std::uint64_t kShuffleTag = 0x5348554646ULL;
constexpr std::uint64_t kTrainVariantTag = 0x5452414eULL;
constexpr std::uint64_t kValidationTag = 0x56414cULL;

bool finite(const loss::LossBreakdown& b) {
  return std::isfinite(b.consistency) && std::isfinite(b.recon_synthetic) &&
         std::isfinite(b.recon_anatomy) && std::isfinite(b.total);
}

void accumulate(loss::LossBreakdown& sum, const loss::LossBreakdown& b, double weight) {
  sum.consistency += weight * b.consistency;
  sum.recon_synthetic += weight * b.recon_synthetic;
  sum.recon_anatomy += weight * b.recon_anatomy;
  sum.total += weight * b.total;
}

loss::LossBreakdown scaled(const loss::LossBreakdown& b, double factor) {
  return {b.consistency * factor, b.recon_synthetic * factor, b.recon_anatomy * factor,
          b.total * factor};
}

std::string describe(const loss::LossBreakdown& b) {
  return "L_C=" + std::to_string(b.consistency) + " L_RS=" + std::to_string(b.recon_synthetic) +
         " L_RI=" + std::to_string(b.recon_anatomy) + " total=" + std::to_string(b.total);
}

double scalar(const torch::Tensor& t) { return t.detach().to(torch::kFloat64).item<double>(); }

}  // namespace

double cyclic_lr(std::int64_t step, double lr_base, double lr_max, std::int64_t cycle_steps) {
  if (cycle_steps < 2) throw ConfigError("lr_cycle_steps must be >= 2");
  if (step < 0) step = 0;
  const double phase = static_cast<double>(step % cycle_steps) / static_cast<double>(cycle_steps);
  const double ramp = phase < 0.5 ? 2.0 * phase : 2.0 - 2.0 * phase;
  return lr_base + (lr_max - lr_base) * ramp;
}

std::string_view to_string(LriInput input) noexcept {
  return input == LriInput::synthetic ? "synthetic" : "clean";
}

LriInput parse_lri_input(std::string_view name) {
  if (name == "synthetic") return LriInput::synthetic;
  if (name == "clean") return LriInput::clean;
  throw ConfigError("unknown lri_input '" + std::string(name) + "'");
}

void TrainConfig::validate() const {
  arch.validate();
  weights.validate();
  policy.validate();
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
  if (patience < 1) throw ConfigError("patience must be >= 1");
  if (max_steps < 0) throw ConfigError("max_steps must be >= 0");
  if (!(lr_base > 0.0) || !(lr_base <= lr_max))
    throw ConfigError("learning rates must satisfy 0 < lr_base <= lr_max");
  if (lr_cycle_steps < 2) throw ConfigError("lr_cycle_steps must be >= 2");
  if (variant_count < 2) throw ConfigError("variant_count must be >= 2");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0) ||
      !(adam_epsilon > 0.0))
    throw ConfigError("invalid Adam hyperparameters");
}

AdamOptimizer::AdamOptimizer(std::vector<std::pair<std::string, torch::Tensor>> params,
                             double beta1, double beta2, double epsilon)
    : beta1_(beta1), beta2_(beta2), epsilon_(epsilon) {
  slots_.reserve(params.size());
  for (auto& [name, p] : params)
    slots_.push_back({name, p, torch::zeros_like(p), torch::zeros_like(p)});
}

void AdamOptimizer::zero_grad() {
  for (auto& s : slots_)
    if (s.param.grad().defined()) s.param.mutable_grad() = torch::Tensor();
}

void AdamOptimizer::step(double lr) {
  torch::NoGradGuard no_grad;
  ++step_count_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(step_count_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(step_count_));
  for (auto& s : slots_) {
    const auto& g = s.param.grad();
    if (!g.defined()) continue;
    s.exp_avg.mul_(beta1_).add_(g, 1.0 - beta1_);
    s.exp_avg_sq.mul_(beta2_).addcmul_(g, g, 1.0 - beta2_);
    const auto denom = (s.exp_avg_sq / bc2).sqrt_().add_(epsilon_);
    s.param.addcdiv_(s.exp_avg, denom, -lr / bc1);
  }
}

std::vector<std::pair<std::string, torch::Tensor>> named_parameters(const model::ModelBundle& bundle) {
  std::vector<std::pair<std::string, torch::Tensor>> out;
  for (const auto& [net_name, net] : bundle.networks())
    for (const auto& item : net->named_parameters()) out.emplace_back(net_name + "/" + item.key(), item.value());
  return out;
}

AdamOptimizer make_optimizer(const model::ModelBundle& bundle, const TrainConfig& config) {
  return AdamOptimizer(named_parameters(bundle), config.adam_beta1, config.adam_beta2,
                       config.adam_epsilon);
}

CleanBatch gather(const data::Dataset& dataset, const data::IndexBatch& indices,
                  std::uint64_t epoch_seed) {
  CleanBatch batch;
  batch.images.reserve(indices.size());
  batch.variant_seeds.reserve(indices.size());
  for (std::size_t idx : indices) {
    batch.images.push_back(dataset.samples.at(idx));
    batch.variant_seeds.push_back(derive_seed(epoch_seed, {idx}));
  }
  return batch;
}

VariantTensors build_variants(const CleanBatch& batch, const TrainConfig& config) {
  if (batch.images.empty()) throw ShapeError("empty training batch");
  if (batch.images.size() != batch.variant_seeds.size())
    throw ShapeError("CleanBatch: images and seeds differ in length");
  VariantTensors out;
  out.clean = to_tensor(std::span<const data::ImageSample>(batch.images));
  if (config.model_kind == model::ModelKind::vanilla_ae) return out;

  const auto count = static_cast<std::size_t>(config.variant_count);
  std::vector<std::vector<data::ImageSample>> slots(count);
  for (auto& s : slots) s.reserve(batch.images.size());
  for (std::size_t i = 0; i < batch.images.size(); ++i) {
    auto set = augment::make_variant_set(batch.images[i], config.policy, batch.variant_seeds[i],
                                         config.variant_count);
    for (std::size_t k = 0; k < count; ++k) slots[k].push_back(std::move(set.variants[k]));
  }
  for (auto& s : slots) out.variants.push_back(to_tensor(std::span<const data::ImageSample>(s)));
  return out;
}

loss::LossBreakdown LossTerms::breakdown(const loss::LossWeights& weights) const {
  return loss::total_loss(scalar(consistency), scalar(recon_synthetic), scalar(recon_anatomy),
                          weights);
}

LossTerms forward_losses(model::ModelBundle& bundle, const VariantTensors& inputs,
                         const TrainConfig& config) {
  const auto dtype = bundle.dtype();
  const auto clean = inputs.clean.to(dtype);
  LossTerms t;
  if (config.model_kind == model::ModelKind::vanilla_ae || !bundle.has_characteristic_branch()) {
    const auto recon = model::decode_anatomy(bundle, model::encode_anatomy(bundle, clean));
    t.recon_anatomy = loss::reconstruction_loss(clean, recon, config.recon_norm);
    t.consistency = torch::zeros({}, t.recon_anatomy.options());
    t.recon_synthetic = torch::zeros({}, t.recon_anatomy.options());
    t.total = config.weights.reconstruction * t.recon_anatomy;
    return t;
  }
  if (inputs.variants.size() < 2) throw ConfigError("unORANIC step needs at least 2 variants");

  const auto synthetic = inputs.variants[0].to(dtype);
  std::vector<torch::Tensor> anatomy;
  anatomy.reserve(inputs.variants.size());
  anatomy.push_back(model::encode_anatomy(bundle, synthetic));
  for (std::size_t k = 1; k < inputs.variants.size(); ++k)
    anatomy.push_back(model::encode_anatomy(bundle, inputs.variants[k].to(dtype)));
  const auto characteristic = model::encode_characteristic(bundle, synthetic);

  t.consistency = loss::consistency_loss(anatomy);
  const auto recon_s = model::decode_joint(bundle, anatomy[0], characteristic);
  t.recon_synthetic = loss::reconstruction_loss(synthetic, recon_s, config.recon_norm);
  const auto anatomy_source = config.lri_input == LriInput::synthetic
                                  ? anatomy[0]
                                  : model::encode_anatomy(bundle, clean);
  t.recon_anatomy = loss::reconstruction_loss(clean, model::decode_anatomy(bundle, anatomy_source),
                                              config.recon_norm);
  if (config.consistency_in_graph) {
    t.total = loss::weighted_total(t.consistency, t.recon_synthetic, t.recon_anatomy, config.weights);
  } else {
    t.total = config.weights.reconstruction * (t.recon_anatomy + t.recon_synthetic);
    t.consistency = t.consistency.detach();
  }
  return t;
}

loss::LossBreakdown train_step(model::ModelBundle& bundle, const CleanBatch& batch,
                               const TrainConfig& config, AdamOptimizer& optimizer, double lr) {
  const auto inputs = build_variants(batch, config);
  auto terms = forward_losses(bundle, inputs, config);
  const auto breakdown = terms.breakdown(config.weights);
  if (!finite(breakdown)) throw DivergenceError("non-finite training loss: " + describe(breakdown));
  optimizer.zero_grad();
  terms.total.backward();
  optimizer.step(lr);
  return breakdown;
}

loss::LossBreakdown evaluate_losses(model::ModelBundle& bundle, const data::Dataset& dataset,
                                    const TrainConfig& config) {
  const auto previous = bundle.mode();
  bundle.set_mode(model::Mode::eval);
  torch::NoGradGuard no_grad;
  loss::LossBreakdown sum;
  const auto epoch_seed = derive_seed(config.seed, {kValidationTag});
  for (const auto& indices : data::batches(dataset, config.batch_size)) {
    const auto inputs = build_variants(gather(dataset, indices, epoch_seed), config);
    const auto b = forward_losses(bundle, inputs, config).breakdown(config.weights);
    accumulate(sum, b, static_cast<double>(indices.size()));
  }
  bundle.set_mode(previous);
  return scaled(sum, 1.0 / static_cast<double>(dataset.size()));
}

TrainState start_training(const TrainConfig& config) {
  config.validate();
  auto bundle = model::init_model(config.arch, derive_seed(config.seed, {0x4d4f44454cULL}),
                                  config.model_kind);
  auto optimizer = make_optimizer(bundle, config);
  return TrainState{config, std::move(bundle), std::move(optimizer), {}, std::nullopt, {}, 0};
}

FitResult resume(TrainState state, const data::Dataset& train, const data::Dataset& val,
                 const FitHooks& hooks) {
  state.config.validate();
  FitResult result{model::ModelBundle{}, {}, std::move(state)};
  auto& st = result.state;
  const auto& config = st.config;
  if (train.empty()) throw ConfigError("training dataset is empty");
  if (val.empty()) throw ConfigError("validation dataset is empty");
  if (!(train.shape() == data::ImageShape{config.arch.input_channels, config.arch.input_side,
                                          config.arch.input_side}))
    throw ArtifactMismatchError("dataset image shape does not match the architecture");

  const auto started = std::chrono::steady_clock::now();
  auto elapsed = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  };
  auto& progress = st.progress;
  st.bundle.set_mode(model::Mode::train);

  while (!progress.finished && progress.epoch < config.max_epochs) {
    const auto shuffle = derive_seed(config.seed, {kShuffleTag, static_cast<std::uint64_t>(progress.epoch)});
    const auto variant_seed =
        derive_seed(config.seed, {kTrainVariantTag, static_cast<std::uint64_t>(progress.epoch)});
    const auto plan = data::batches(train, config.batch_size, shuffle);
    double lr = 0;
    for (; progress.batch_in_epoch < plan.size(); ++progress.batch_in_epoch) {
      if (config.max_steps > 0 && progress.global_step >= config.max_steps) break;
      lr = cyclic_lr(progress.global_step, config.lr_base, config.lr_max, config.lr_cycle_steps);
      const auto& indices = plan[progress.batch_in_epoch];
      const auto b = train_step(st.bundle, gather(train, indices, variant_seed), config,
                                st.optimizer, lr);
      accumulate(st.epoch_sum, b, static_cast<double>(indices.size()));
      st.epoch_samples += indices.size();
      ++progress.global_step;
    }
    if (progress.batch_in_epoch < plan.size()) break;  // step budget exhausted mid-epoch

    TrainLogRecord record;
    record.epoch = progress.epoch;
    record.step = progress.global_step;
    record.lr = lr;
    record.train = scaled(st.epoch_sum, 1.0 / static_cast<double>(std::max<std::size_t>(1, st.epoch_samples)));
    record.val = evaluate_losses(st.bundle, val, config);
    if (!finite(*record.val))
      throw DivergenceError("non-finite validation loss at epoch " + std::to_string(progress.epoch) +
                            ": " + describe(*record.val));
    if (record.val->total < progress.best_val_total) {
      progress.best_val_total = record.val->total;
      progress.best_epoch = progress.epoch;
      progress.epochs_since_improvement = 0;
      if (st.best)
        model::copy_state(st.bundle, *st.best);
      else
        st.best = model::clone(st.bundle);
    } else {
      ++progress.epochs_since_improvement;
    }
    ++progress.epoch;
    progress.batch_in_epoch = 0;
    st.epoch_sum = {};
    st.epoch_samples = 0;
    if (progress.epochs_since_improvement >= config.patience || progress.epoch >= config.max_epochs)
      progress.finished = true;
    record.wall_seconds = elapsed();
    result.log.push_back(record);
    if (hooks.on_record) hooks.on_record(record);
    if (hooks.on_epoch_end) hooks.on_epoch_end(st);
  }

  result.best = model::clone(st.best ? *st.best : st.bundle);
  result.best.set_mode(model::Mode::eval);
  return result;
}

FitResult fit(const TrainConfig& config, const data::Dataset& train, const data::Dataset& val,
              const FitHooks& hooks) {
  return resume(start_training(config), train, val, hooks);
}

FitResult fit_vanilla_ae(TrainConfig config, const data::Dataset& train, const data::Dataset& val,
                         const FitHooks& hooks) {
  config.model_kind = model::ModelKind::vanilla_ae;
  return fit(config, train, val, hooks);
}

}  // namespace unoranic::train
