#include <gtest/gtest.h>
#include <torch/torch.h>

#include <fstream>
#include <map>

#include "helpers.hpp"
#include "unoranic/errors.hpp"
#include "unoranic/seed.hpp"
#include "unoranic/train.hpp"

using namespace unoranic;
using namespace unoranic::train;
using unoranic::fixtures::TempDir;

namespace {

TrainConfig small_config(std::uint64_t seed = 3) {
  TrainConfig c;
  c.arch.input_side = 12;
  c.arch.block_count = 2;
  c.arch.base_channels = 4;
  c.arch.latent_dim = 8;
  c.batch_size = 4;
  c.max_epochs = 2;
  c.patience = 5;
  c.lr_cycle_steps = 6;
  c.weights = {1.0, 0.01};
  c.seed = seed;
  return c;
}

const data::DatasetSplits& small_data() {
  static const auto splits = fixtures::small_synthetic(14, 6, 4, 11, 12);
  return splits;
}

CleanBatch first_batch(std::size_t n = 4) {
  data::IndexBatch idx;
  for (std::size_t i = 0; i < n; ++i) idx.push_back(i);
  return gather(small_data().train, idx, 99);
}

void expect_bundles_equal(const model::ModelBundle& a, const model::ModelBundle& b) {
  const auto na = a.networks(), nb = b.networks();
  ASSERT_EQ(na.size(), nb.size());
  for (std::size_t i = 0; i < na.size(); ++i) {
    const auto pa = na[i].second->named_parameters(), pb = nb[i].second->named_parameters();
    for (const auto& item : pa) EXPECT_TRUE(torch::equal(item.value(), pb[item.key()])) << na[i].first << "/" << item.key();
    const auto ba = na[i].second->named_buffers(), bb = nb[i].second->named_buffers();
    for (const auto& item : ba) EXPECT_TRUE(torch::equal(item.value(), bb[item.key()])) << na[i].first << "/" << item.key();
  }
}

// Which networks receive a non-zero gradient from one backward pass.
std::map<std::string, bool> reached(const model::ModelBundle& b) {
  std::map<std::string, bool> out;
  for (const auto& [name, net] : b.networks()) {
    bool any = false;
    for (const auto& p : net->parameters())
      if (p.grad().defined() && p.grad().abs().sum().item<double>() > 0) any = true;
    out[name] = any;
  }
  return out;
}

void clear_grads(const model::ModelBundle& b) {
  for (auto p : b.parameters()) p.mutable_grad() = torch::Tensor();
}

}  // namespace

TEST(Schedule, CyclicLrHandCases) {
  EXPECT_DOUBLE_EQ(cyclic_lr(0, 1e-4, 1e-3, 2000), 1e-4);
  EXPECT_NEAR(cyclic_lr(500, 1e-4, 1e-3, 2000), 5.5e-4, 1e-15);
  EXPECT_NEAR(cyclic_lr(1000, 1e-4, 1e-3, 2000), 1e-3, 1e-15);
  EXPECT_NEAR(cyclic_lr(1500, 1e-4, 1e-3, 2000), 5.5e-4, 1e-15);
  EXPECT_DOUBLE_EQ(cyclic_lr(2000, 1e-4, 1e-3, 2000), 1e-4);
  EXPECT_NEAR(cyclic_lr(2500, 1e-4, 1e-3, 2000), 5.5e-4, 1e-15);
  EXPECT_THROW(cyclic_lr(0, 1e-4, 1e-3, 1), ConfigError);
}

TEST(Config, Validation) {
  TrainConfig c;
  EXPECT_NO_THROW(c.validate());
  EXPECT_EQ(c.weights.reconstruction, 1.0);
  EXPECT_EQ(c.weights.consistency, 1.0);
  c.patience = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.batch_size = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.lr_base = 1e-2;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.variant_count = 1;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.policy.kinds.clear();
  EXPECT_THROW(c.validate(), ConfigError);
  EXPECT_EQ(parse_lri_input(to_string(LriInput::clean)), LriInput::clean);
  EXPECT_THROW(parse_lri_input("noisy"), ConfigError);
}

TEST(Adam, MatchesTorchAdam) {
  torch::manual_seed(0);
  auto target = torch::randn({5, 3});
  auto a = torch::randn({5, 3}).set_requires_grad(true);
  auto b = a.detach().clone().set_requires_grad(true);
  AdamOptimizer mine({{"w", a}}, 0.9, 0.999, 1e-8);
  torch::optim::Adam ref({b}, torch::optim::AdamOptions(1e-2).betas({0.9, 0.999}).eps(1e-8));
  for (int i = 0; i < 25; ++i) {
    const double lr = cyclic_lr(i, 1e-3, 1e-2, 8);
    static_cast<torch::optim::AdamOptions&>(ref.param_groups()[0].options()).lr(lr);
    mine.zero_grad();
    (a - target).pow(3).abs().sum().backward();
    mine.step(lr);
    ref.zero_grad();
    (b - target).pow(3).abs().sum().backward();
    ref.step();
  }
  EXPECT_EQ(mine.step_count(), 25);
  EXPECT_TRUE(torch::allclose(a, b, 1e-5, 1e-6));
}

TEST(Adam, SkipsParametersWithoutGradient) {
  auto a = torch::ones({2}).set_requires_grad(true);
  auto b = torch::ones({2}).set_requires_grad(true);
  AdamOptimizer opt({{"a", a}, {"b", b}}, 0.9, 0.999, 1e-8);
  (a * 2).sum().backward();
  opt.step(0.1);
  EXPECT_FALSE(torch::equal(a, torch::ones({2})));
  EXPECT_TRUE(torch::equal(b, torch::ones({2})));
  EXPECT_TRUE(torch::equal(opt.slots()[1].exp_avg, torch::zeros({2})));
}

TEST(Routing, EachTermReachesOnlyItsNetworks) {
  auto cfg = small_config();
  auto state = start_training(cfg);
  auto& b = state.bundle;
  const auto inputs = build_variants(first_batch(), cfg);

  auto t = forward_losses(b, inputs, cfg);
  t.recon_anatomy.backward();
  auto r = reached(b);
  EXPECT_TRUE(r["anatomy_encoder"]);
  EXPECT_TRUE(r["anatomy_decoder"]);
  EXPECT_FALSE(r["characteristic_encoder"]);
  EXPECT_FALSE(r["joint_decoder"]);
  clear_grads(b);

  t = forward_losses(b, inputs, cfg);
  t.recon_synthetic.backward();
  r = reached(b);
  EXPECT_TRUE(r["anatomy_encoder"]);
  EXPECT_TRUE(r["characteristic_encoder"]);
  EXPECT_TRUE(r["joint_decoder"]);
  EXPECT_FALSE(r["anatomy_decoder"]);
  clear_grads(b);

  t = forward_losses(b, inputs, cfg);
  t.consistency.backward();
  r = reached(b);
  EXPECT_TRUE(r["anatomy_encoder"]);
  EXPECT_FALSE(r["characteristic_encoder"]);
  EXPECT_FALSE(r["joint_decoder"]);
  EXPECT_FALSE(r["anatomy_decoder"]);
  clear_grads(b);
}

TEST(Routing, TotalGradientOnDecodersEqualsTheirOwnTerm) {
  auto cfg = small_config();
  cfg.weights = {0.7, 0.3};
  auto state = start_training(cfg);
  auto& b = state.bundle;
  const auto inputs = build_variants(first_batch(), cfg);

  forward_losses(b, inputs, cfg).recon_anatomy.backward();
  std::vector<torch::Tensor> da;
  for (auto& p : b.anatomy_decoder->parameters()) da.push_back(p.grad().clone());
  clear_grads(b);
  forward_losses(b, inputs, cfg).recon_synthetic.backward();
  std::vector<torch::Tensor> dj;
  for (auto& p : b.joint_decoder->parameters()) dj.push_back(p.grad().clone());
  clear_grads(b);

  forward_losses(b, inputs, cfg).total.backward();
  auto pa = b.anatomy_decoder->parameters();
  for (std::size_t i = 0; i < pa.size(); ++i) EXPECT_TRUE(torch::allclose(pa[i].grad(), 0.7 * da[i], 1e-4, 1e-7));
  auto pj = b.joint_decoder->parameters();
  for (std::size_t i = 0; i < pj.size(); ++i) EXPECT_TRUE(torch::allclose(pj[i].grad(), 0.7 * dj[i], 1e-4, 1e-7));
}

TEST(Routing, DetachedConsistencyLeavesEncoderGradientUnchanged) {
  auto cfg = small_config();
  auto off = cfg;
  off.consistency_in_graph = false;
  off.weights.consistency = 0.0;
  cfg.weights.consistency = 0.0;
  auto state = start_training(cfg);
  auto& b = state.bundle;
  const auto inputs = build_variants(first_batch(), cfg);
  forward_losses(b, inputs, cfg).total.backward();
  std::vector<torch::Tensor> with;
  for (auto& p : b.anatomy_encoder->parameters()) with.push_back(p.grad().clone());
  clear_grads(b);
  auto t = forward_losses(b, inputs, off);
  EXPECT_FALSE(t.consistency.requires_grad());
  EXPECT_GT(t.consistency.item<double>(), 0.0);
  t.total.backward();
  auto pe = b.anatomy_encoder->parameters();
  for (std::size_t i = 0; i < pe.size(); ++i) EXPECT_TRUE(torch::allclose(pe[i].grad(), with[i], 1e-5, 1e-8));
}

TEST(Step, IdentityPolicyGivesZeroConsistency) {
  auto cfg = small_config();
  cfg.policy.identity_probability = 1.0;
  auto state = start_training(cfg);
  // Eval mode: batch norm is per-sample, so identical inputs give identical embeddings.
  state.bundle.set_mode(model::Mode::eval);
  torch::NoGradGuard ng;
  const auto inputs = build_variants(first_batch(), cfg);
  EXPECT_TRUE(torch::equal(inputs.variants[0], inputs.clean));
  const auto b = forward_losses(state.bundle, inputs, cfg).breakdown(cfg.weights);
  EXPECT_EQ(b.consistency, 0.0);
}

TEST(Step, VariantsAreIndependentAndSeeded) {
  auto cfg = small_config();
  const auto x = build_variants(first_batch(), cfg);
  const auto y = build_variants(first_batch(), cfg);
  ASSERT_EQ(x.variants.size(), 3u);
  for (std::size_t k = 0; k < 3; ++k) EXPECT_TRUE(torch::equal(x.variants[k], y.variants[k]));
  EXPECT_FALSE(torch::equal(x.variants[0], x.variants[1]));
  cfg.variant_count = 5;
  EXPECT_EQ(build_variants(first_batch(), cfg).variants.size(), 5u);
}

TEST(Step, UpdatesEveryLearnableParameter) {
  auto cfg = small_config();
  auto state = start_training(cfg);
  auto before = model::clone(state.bundle);
  train_step(state.bundle, first_batch(), cfg, state.optimizer, 1e-3);
  const auto now = named_parameters(state.bundle), old = named_parameters(before);
  for (std::size_t i = 0; i < now.size(); ++i)
    EXPECT_FALSE(torch::equal(now[i].second, old[i].second)) << now[i].first;
}

TEST(Step, VanillaAeHasOnlyReconstruction) {
  auto cfg = small_config();
  cfg.model_kind = model::ModelKind::vanilla_ae;
  auto state = start_training(cfg);
  EXPECT_FALSE(state.bundle.has_characteristic_branch());
  const auto b = train_step(state.bundle, first_batch(), cfg, state.optimizer, 1e-3);
  EXPECT_EQ(b.consistency, 0.0);
  EXPECT_EQ(b.recon_synthetic, 0.0);
  EXPECT_GT(b.recon_anatomy, 0.0);
  EXPECT_DOUBLE_EQ(b.total, b.recon_anatomy);
}

TEST(Step, NonFiniteLossDiverges) {
  auto cfg = small_config();
  cfg.model_kind = model::ModelKind::vanilla_ae;
  auto state = start_training(cfg);
  auto batch = first_batch();
  batch.images[0].pixels[0] = std::numeric_limits<float>::quiet_NaN();
  EXPECT_THROW(train_step(state.bundle, batch, cfg, state.optimizer, 1e-3), DivergenceError);
}

TEST(Fit, DeterministicForAFixedSeed) {
  const auto& d = small_data();
  const auto a = fit(small_config(5), d.train, d.val);
  const auto b = fit(small_config(5), d.train, d.val);
  expect_bundles_equal(a.state.bundle, b.state.bundle);
  ASSERT_EQ(a.log.size(), b.log.size());
  for (std::size_t i = 0; i < a.log.size(); ++i) EXPECT_EQ(a.log[i].val->total, b.log[i].val->total);
  const auto c = fit(small_config(6), d.train, d.val);
  EXPECT_NE(a.log.back().val->total, c.log.back().val->total);
}

TEST(Fit, LogAndBestEpochAreConsistent) {
  const auto& d = small_data();
  auto cfg = small_config();
  cfg.max_epochs = 4;
  cfg.patience = 1;
  std::vector<TrainLogRecord> seen;
  FitHooks hooks;
  hooks.on_record = [&](const TrainLogRecord& r) { seen.push_back(r); };
  const auto r = fit(cfg, d.train, d.val, hooks);
  ASSERT_EQ(seen.size(), r.log.size());
  ASSERT_FALSE(r.log.empty());
  EXPECT_LE(r.log.size(), 4u);
  int argmin = 0;
  for (std::size_t i = 0; i < r.log.size(); ++i) {
    EXPECT_EQ(r.log[i].epoch, static_cast<int>(i));
    EXPECT_EQ(r.log[i].step, static_cast<std::int64_t>((i + 1) * 4));  // ceil(14 / 4)
    if (r.log[i].val->total < r.log[static_cast<std::size_t>(argmin)].val->total) argmin = static_cast<int>(i);
  }
  EXPECT_EQ(r.state.progress.best_epoch, argmin);
  EXPECT_TRUE(r.state.progress.finished);
  if (r.log.size() < 4u) EXPECT_EQ(r.state.progress.epochs_since_improvement, 1);
  EXPECT_EQ(r.best.mode(), model::Mode::eval);
}

TEST(Fit, MaxStepsStopsMidEpoch) {
  const auto& d = small_data();
  auto cfg = small_config();
  cfg.max_steps = 3;
  const auto r = fit(cfg, d.train, d.val);
  EXPECT_TRUE(r.log.empty());
  EXPECT_EQ(r.state.progress.global_step, 3);
  EXPECT_EQ(r.state.progress.batch_in_epoch, 3u);
  EXPECT_FALSE(r.state.progress.finished);
}

TEST(Fit, RejectsMismatchedData) {
  const auto other = fixtures::small_synthetic(4, 3, 3, 1, 10);
  EXPECT_THROW(fit(small_config(), other.train, other.val), ArtifactMismatchError);
  data::Dataset empty;
  EXPECT_THROW(fit(small_config(), empty, small_data().val), ConfigError);
}

TEST(Checkpoint, RoundTripIsExact) {
  const auto& d = small_data();
  auto cfg = small_config();
  cfg.max_steps = 5;
  auto r = fit(cfg, d.train, d.val);
  TempDir dir("ckpt");
  save_checkpoint(dir / "c.zip", r.state);
  const auto back = load_checkpoint(dir / "c.zip");
  expect_bundles_equal(r.state.bundle, back.bundle);
  EXPECT_EQ(back.optimizer.step_count(), r.state.optimizer.step_count());
  ASSERT_EQ(back.optimizer.slots().size(), r.state.optimizer.slots().size());
  for (std::size_t i = 0; i < back.optimizer.slots().size(); ++i) {
    EXPECT_EQ(back.optimizer.slots()[i].name, r.state.optimizer.slots()[i].name);
    EXPECT_TRUE(torch::equal(back.optimizer.slots()[i].exp_avg, r.state.optimizer.slots()[i].exp_avg));
    EXPECT_TRUE(torch::equal(back.optimizer.slots()[i].exp_avg_sq, r.state.optimizer.slots()[i].exp_avg_sq));
  }
  EXPECT_EQ(back.progress.global_step, 5);
  EXPECT_EQ(back.progress.batch_in_epoch, 1u);
  EXPECT_EQ(back.epoch_samples, r.state.epoch_samples);
  EXPECT_EQ(back.epoch_sum.total, r.state.epoch_sum.total);
  EXPECT_EQ(back.config.weights.consistency, 0.01);
  EXPECT_EQ(back.config.arch, cfg.arch);
  EXPECT_EQ(back.config.seed, cfg.seed);
  EXPECT_TRUE(back.best.has_value());
  expect_bundles_equal(*r.state.best, *back.best);
}

TEST(Checkpoint, ResumeMatchesUninterruptedRun) {
  const auto& d = small_data();
  auto cfg = small_config();
  cfg.max_epochs = 3;
  const auto full = fit(cfg, d.train, d.val);

  TempDir dir("resume");
  auto cut = cfg;
  cut.max_steps = 6;  // mid-way through epoch 1
  auto part = fit(cut, d.train, d.val);
  save_checkpoint(dir / "c.zip", part.state);
  auto state = load_checkpoint(dir / "c.zip");
  state.config.max_steps = 0;
  const auto rest = resume(std::move(state), d.train, d.val);

  expect_bundles_equal(full.state.bundle, rest.state.bundle);
  expect_bundles_equal(full.best, rest.best);
  ASSERT_EQ(rest.log.size(), 2u);
  EXPECT_EQ(rest.log.back().val->total, full.log.back().val->total);
  EXPECT_EQ(rest.log.back().train.total, full.log.back().train.total);
}

TEST(Checkpoint, EpochBoundaryResume) {
  const auto& d = small_data();
  auto cfg = small_config();
  const auto full = fit(cfg, d.train, d.val);
  TempDir dir("epoch");
  FitHooks hooks;
  bool saved = false;
  hooks.on_epoch_end = [&](const TrainState& st) {
    if (!saved) save_checkpoint(dir / "e.zip", st);
    saved = true;
  };
  fit(cfg, d.train, d.val, hooks);
  const auto rest = resume(load_checkpoint(dir / "e.zip"), d.train, d.val);
  expect_bundles_equal(full.state.bundle, rest.state.bundle);
}

TEST(Checkpoint, ModelArchiveAndBestSelection) {
  const auto& d = small_data();
  const auto r = fit(small_config(), d.train, d.val);
  TempDir dir("model");
  save_model(dir / "m.zip", r.best, r.state.config);
  expect_bundles_equal(r.best, load_model(dir / "m.zip"));
  save_checkpoint(dir / "c.zip", r.state);
  expect_bundles_equal(*r.state.best, load_model(dir / "c.zip"));
  EXPECT_EQ(load_model(dir / "m.zip").mode(), model::Mode::eval);
  EXPECT_THROW(load_checkpoint(dir / "m.zip"), ArtifactMismatchError);
}

TEST(Checkpoint, CorruptAndForeignFilesFail) {
  const auto& d = small_data();
  auto cfg = small_config();
  cfg.max_steps = 1;
  const auto r = fit(cfg, d.train, d.val);
  TempDir dir("bad");
  save_checkpoint(dir / "c.zip", r.state);
  std::string bytes;
  {
    std::ifstream in(dir / "c.zip", std::ios::binary);
    bytes.assign(std::istreambuf_iterator<char>(in), {});
  }
  auto flipped = bytes;
  flipped[flipped.size() / 2] ^= 0x5A;
  std::ofstream(dir / "flip.zip", std::ios::binary) << flipped;
  EXPECT_THROW(load_checkpoint(dir / "flip.zip"), Error);
  std::ofstream(dir / "trunc.zip", std::ios::binary) << bytes.substr(0, bytes.size() / 3);
  EXPECT_THROW(load_checkpoint(dir / "trunc.zip"), FormatError);
  std::ofstream(dir / "text.zip") << "not a checkpoint";
  EXPECT_THROW(load_checkpoint(dir / "text.zip"), FormatError);
  EXPECT_THROW(load_checkpoint(dir / "missing.zip"), Error);
}
