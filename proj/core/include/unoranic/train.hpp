#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "unoranic/augment.hpp"
#include "unoranic/dataio.hpp"
#include "unoranic/loss.hpp"
#include "unoranic/model.hpp"

namespace unoranic::train {

// Triangular cyclic schedule: lr_base at the start of every cycle, linear
// rise to lr_max at cycle_steps / 2, linear fall back to lr_base.
double cyclic_lr(std::int64_t step, double lr_base, double lr_max, std::int64_t cycle_steps);

// Which input feeds the anatomy reconstruction D_A(E_A(.)) compared against I:
// the synthetic corrupted image S (default) or the clean image I itself.
enum class LriInput { synthetic, clean };
std::string_view to_string(LriInput input) noexcept;
LriInput parse_lri_input(std::string_view name);

struct TrainConfig {
  model::ModelKind model_kind = model::ModelKind::unoranic;
  model::ArchConfig arch;
  std::size_t batch_size = 64;
  int max_epochs = 150;
  int patience = 10;
  // Stop after this many optimizer steps in total; 0 means unbounded.
  std::int64_t max_steps = 0;
  double lr_base = 1e-4;
  double lr_max = 1e-3;
  std::int64_t lr_cycle_steps = 2000;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  loss::LossWeights weights{1.0, 1.0};
  int variant_count = 3;
  augment::AugmentationPolicy policy = augment::AugmentationPolicy::training_default();
  loss::ReconNorm recon_norm = loss::ReconNorm::l2norm;
  LriInput lri_input = LriInput::synthetic;
  // When false the consistency term is left out of the autograd graph
  // entirely (still reported). Used to check gradient routing.
  bool consistency_in_graph = true;
  std::uint64_t seed = 0;

  void validate() const;
};

// Adam over a fixed, named list of parameters.
class AdamOptimizer {
 public:
  struct Slot {
    std::string name;
    torch::Tensor param;
    torch::Tensor exp_avg;
    torch::Tensor exp_avg_sq;
  };

  AdamOptimizer(std::vector<std::pair<std::string, torch::Tensor>> params, double beta1,
                double beta2, double epsilon);

  void zero_grad();
  // Parameters whose gradient is undefined are skipped.
  void step(double lr);

  std::int64_t step_count() const noexcept { return step_count_; }
  void set_step_count(std::int64_t n) noexcept { step_count_ = n; }
  std::vector<Slot>& slots() noexcept { return slots_; }
  const std::vector<Slot>& slots() const noexcept { return slots_; }

 private:
  std::vector<Slot> slots_;
  double beta1_, beta2_, epsilon_;
  std::int64_t step_count_ = 0;
};

// "<network>/<parameter path>" for every trainable parameter of the bundle.
std::vector<std::pair<std::string, torch::Tensor>> named_parameters(const model::ModelBundle& bundle);
AdamOptimizer make_optimizer(const model::ModelBundle& bundle, const TrainConfig& config);

// Clean images plus the per-sample seeds their variant sets derive from.
struct CleanBatch {
  std::vector<data::ImageSample> images;
  std::vector<std::uint64_t> variant_seeds;
};

CleanBatch gather(const data::Dataset& dataset, const data::IndexBatch& indices,
                  std::uint64_t epoch_seed);

// Stacked clean batch and variant batches; variants[0] is S.
struct VariantTensors {
  torch::Tensor clean;
  std::vector<torch::Tensor> variants;
};

VariantTensors build_variants(const CleanBatch& batch, const TrainConfig& config);

struct LossTerms {
  torch::Tensor consistency;
  torch::Tensor recon_synthetic;
  torch::Tensor recon_anatomy;
  torch::Tensor total;

  loss::LossBreakdown breakdown(const loss::LossWeights& weights) const;
};

// Forward passes and loss assembly. For unORANIC:
//   L_C  over {E_A(S), E_A(v1), ...}, each variant a separate forward pass
//   L_RS = recon(S, D(E_A(S) (+) E_C(S)))
//   L_RI = recon(I, D_A(E_A(S)))   (or D_A(E_A(I)) with LriInput::clean)
// D_A is reached only by L_RI and E_C/D only by L_RS, so one backward pass
// of the weighted total routes each term to exactly the networks it
// involves. The vanilla AE uses L_RI = recon(I, D_A(E_A(I))) alone.
LossTerms forward_losses(model::ModelBundle& bundle, const VariantTensors& inputs,
                         const TrainConfig& config);

// One Adam update. Throws DivergenceError on a non-finite loss.
loss::LossBreakdown train_step(model::ModelBundle& bundle, const CleanBatch& batch,
                               const TrainConfig& config, AdamOptimizer& optimizer, double lr);

struct TrainLogRecord {
  int epoch = 0;
  std::int64_t step = 0;
  double lr = 0;
  loss::LossBreakdown train;
  std::optional<loss::LossBreakdown> val;
  double wall_seconds = 0;
};

struct TrainProgress {
  int epoch = 0;
  std::size_t batch_in_epoch = 0;
  std::int64_t global_step = 0;
  double best_val_total = std::numeric_limits<double>::infinity();
  int best_epoch = -1;
  int epochs_since_improvement = 0;
  bool finished = false;
};

// Everything needed to continue training bit-exactly.
struct TrainState {
  TrainConfig config;
  model::ModelBundle bundle;
  AdamOptimizer optimizer;
  TrainProgress progress;
  std::optional<model::ModelBundle> best;
  // Running sums of the current epoch's training losses.
  loss::LossBreakdown epoch_sum;
  std::size_t epoch_samples = 0;
};

TrainState start_training(const TrainConfig& config);

struct FitHooks {
  std::function<void(const TrainState&)> on_epoch_end;
  std::function<void(const TrainLogRecord&)> on_record;
};

struct FitResult {
  model::ModelBundle best;
  std::vector<TrainLogRecord> log;
  TrainState state;
};

// Mean validation losses in eval mode with a fixed corruption seed stream.
loss::LossBreakdown evaluate_losses(model::ModelBundle& bundle, const data::Dataset& dataset,
                                    const TrainConfig& config);

FitResult fit(const TrainConfig& config, const data::Dataset& train, const data::Dataset& val,
              const FitHooks& hooks = {});
// Continues from a saved or partially run state until max_epochs, early
// stopping or max_steps.
FitResult resume(TrainState state, const data::Dataset& train, const data::Dataset& val,
                 const FitHooks& hooks = {});
// fit() with model_kind forced to vanilla_ae.
FitResult fit_vanilla_ae(TrainConfig config, const data::Dataset& train, const data::Dataset& val,
                         const FitHooks& hooks = {});

inline constexpr std::string_view kCheckpointFormat = "unoranic-checkpoint";
inline constexpr int kCheckpointVersion = 1;

// ZIP archive: checkpoint.json (format tag, version, config, progress,
// seeds) and one NPY array per parameter, buffer and Adam moment.
void save_checkpoint(const std::filesystem::path& path, const TrainState& state);
TrainState load_checkpoint(const std::filesystem::path& path);
// Model-only archive (no optimizer state): used for the best weights.
void save_model(const std::filesystem::path& path, const model::ModelBundle& bundle,
                const TrainConfig& config);
model::ModelBundle load_model(const std::filesystem::path& path);

}  // namespace unoranic::train
