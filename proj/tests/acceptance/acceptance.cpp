// Acceptance driver: one PASS / FAIL / SKIP line per criterion.
#include <CLI11.hpp>
#include <torch/torch.h>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <random>
#include <set>
#include <sstream>

#include "unoranic/config.hpp"
#include "unoranic/dataio.hpp"
#include "unoranic/errors.hpp"
#include "unoranic/experiments.hpp"
#include "unoranic/loss.hpp"
#include "unoranic/metrics.hpp"
#include "unoranic/reports.hpp"
#include "unoranic/seed.hpp"
#include "unoranic/train.hpp"

using namespace unoranic;
namespace fs = std::filesystem;
using augment::CorruptionKind;
using config::Json;

namespace {

enum class Verdict { pass, fail, skip };

struct Outcome {
  Verdict verdict;
  std::string detail;
};

std::string num(double v, int precision = 4) {
  std::ostringstream o;
  o << std::setprecision(precision) << v;
  return o.str();
}

Outcome check(bool ok, std::string detail) { return {ok ? Verdict::pass : Verdict::fail, std::move(detail)}; }

double elapsed_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::vector<data::ImageSample> random_images(std::size_t n, int side, std::uint64_t seed) {
  std::vector<data::ImageSample> out;
  CounterRng rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    data::ImageSample s;
    s.shape = {1, side, side};
    s.pixels.resize(s.shape.numel());
    for (auto& p : s.pixels) p = static_cast<float>(0.1 + 0.8 * rng.uniform());
    s.label = 0;
    out.push_back(std::move(s));
  }
  return out;
}

train::CleanBatch batch_of(std::vector<data::ImageSample> images, std::uint64_t seed) {
  train::CleanBatch b;
  for (std::size_t i = 0; i < images.size(); ++i) b.variant_seeds.push_back(derive_seed(seed, {i}));
  b.images = std::move(images);
  return b;
}

// ---------------------------------------------------------------- 1

Outcome loss_oracles() {
  std::mt19937_64 gen(1);
  std::normal_distribution<double> normal;
  double worst = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const int batch = 1 + trial % 7, dim = 1 + (trial * 5) % 33;
    std::vector<std::vector<double>> raw(3, std::vector<double>(static_cast<std::size_t>(batch * dim)));
    std::vector<torch::Tensor> emb;
    for (auto& r : raw) {
      for (auto& v : r) v = normal(gen) * (1 + trial);
      emb.push_back(torch::from_blob(r.data(), {batch, dim}, torch::kFloat64).clone());
    }
    // Independent oracle: explicit loops over samples, pairs and coordinates.
    double oracle = 0;
    for (int b = 0; b < batch; ++b) {
      double per = 0;
      int pairs = 0;
      for (int i = 0; i < 3; ++i)
        for (int j = i + 1; j < 3; ++j, ++pairs) {
          double sq = 0;
          for (int d = 0; d < dim; ++d) {
            const double diff = raw[i][static_cast<std::size_t>(b * dim + d)] - raw[j][static_cast<std::size_t>(b * dim + d)];
            sq += diff * diff;
          }
          per += std::sqrt(sq);
        }
      oracle += per / pairs;
    }
    oracle /= batch;
    const double got = loss::consistency_loss(emb).item<double>();
    worst = std::max(worst, std::abs(got - oracle) / std::abs(oracle));
  }
  auto target = torch::zeros({1, 1, 28, 28}, torch::kFloat64);
  auto recon = target.clone();
  recon[0][0][13][9] = 0.5;
  const double single = loss::reconstruction_loss(target, recon).item<double>();
  const double single_err = std::abs(single - 0.5 / 784.0);
  // Two off pixels: sqrt(0.3^2 + 0.4^2) = 0.5 as well.
  recon[0][0][13][9] = 0.3;
  recon[0][0][2][2] = -0.4;
  const double pair_err = std::abs(loss::reconstruction_loss(target, recon).item<double>() - 0.5 / 784.0);
  return check(worst < 1e-6 && single_err < 1e-9 && pair_err < 1e-9,
               "L_C max rel err " + num(worst, 3) + " over 50 random V=3 sets; single-pixel L_R err " +
                   num(single_err, 3) + ", two-pixel err " + num(pair_err, 3));
}

// ---------------------------------------------------------------- 2

Outcome gradient_check() {
  train::TrainConfig cfg;
  cfg.arch.input_side = 4;
  cfg.arch.block_count = 2;
  cfg.arch.base_channels = 4;
  cfg.arch.latent_dim = 8;
  cfg.weights = {0.8, 0.3};
  auto bundle = model::init_model(cfg.arch, 17);
  bundle.to(torch::kFloat64);
  const auto inputs = train::build_variants(batch_of(random_images(4, 4, 3), 5), cfg);

  using Term = std::function<torch::Tensor(const train::LossTerms&)>;
  const std::vector<std::pair<std::string, Term>> terms{
      {"L_C", [](const train::LossTerms& t) { return t.consistency; }},
      {"L_RS", [](const train::LossTerms& t) { return t.recon_synthetic; }},
      {"L_RI", [](const train::LossTerms& t) { return t.recon_anatomy; }},
      {"total", [](const train::LossTerms& t) { return t.total; }}};

  auto params = train::named_parameters(bundle);
  std::mt19937_64 pick(9);
  std::string detail;
  bool ok = true;
  for (const auto& [name, term] : terms) {
    for (auto& [_, p] : params) p.mutable_grad() = torch::Tensor();
    term(train::forward_losses(bundle, inputs, cfg)).backward();
    double diff_sq = 0, ref_sq = 0;
    int coords = 0;
    for (auto& [pname, p] : params) {
      auto flat = p.detach().view({-1});
      const auto grad = p.grad().defined() ? p.grad().view({-1}) : torch::zeros_like(flat);
      for (int k = 0; k < 3; ++k) {
        const auto idx = static_cast<std::int64_t>(pick() % static_cast<std::uint64_t>(flat.numel()));
        const double h = 1e-4;
        const double orig = flat[idx].item<double>();
        double fp, fm;
        {
          torch::NoGradGuard ng;
          flat[idx] = orig + h;
          fp = term(train::forward_losses(bundle, inputs, cfg)).item<double>();
          flat[idx] = orig - h;
          fm = term(train::forward_losses(bundle, inputs, cfg)).item<double>();
          flat[idx] = orig;
        }
        const double numeric = (fp - fm) / (2 * h);
        const double analytic = grad[idx].item<double>();
        diff_sq += (numeric - analytic) * (numeric - analytic);
        ref_sq += numeric * numeric;
        ++coords;
      }
    }
    const double rel = std::sqrt(diff_sq) / std::max(std::sqrt(ref_sq), 1e-12);
    ok = ok && rel < 1e-3;
    detail += name + " " + num(rel, 2) + "  ";
  }
  return check(ok, "float64 rel err over sampled coords: " + detail);
}

// ---------------------------------------------------------------- 3

std::vector<torch::Tensor> snapshot(const torch::nn::Module& net) {
  std::vector<torch::Tensor> out;
  for (const auto& p : net.parameters()) out.push_back(p.detach().clone());
  return out;
}

bool identical(const std::vector<torch::Tensor>& a, const std::vector<torch::Tensor>& b, double* max_diff = nullptr) {
  bool same = a.size() == b.size();
  double worst = 0;
  for (std::size_t i = 0; same && i < a.size(); ++i) {
    worst = std::max(worst, (a[i] - b[i]).abs().max().item<double>());
    same = same && torch::equal(a[i], b[i]);
  }
  if (max_diff) *max_diff = worst;
  return same;
}

Outcome routing(const data::DatasetSplits& small) {
  train::TrainConfig cfg;
  cfg.arch.input_side = small.train.shape().height;
  cfg.arch.block_count = 2;
  cfg.arch.base_channels = 8;
  cfg.arch.latent_dim = 16;
  cfg.batch_size = 16;
  const auto plan = data::batches(small.train, cfg.batch_size, 1);
  auto run = [&](train::TrainConfig c, int steps) {
    auto st = train::start_training(c);
    for (int s = 0; s < steps; ++s)
      train::train_step(st.bundle, train::gather(small.train, plan[static_cast<std::size_t>(s) % plan.size()], s), c,
                        st.optimizer, train::cyclic_lr(s, c.lr_base, c.lr_max, c.lr_cycle_steps));
    return st;
  };

  auto no_rec = cfg;
  no_rec.weights = {0.0, 1.0};
  const auto init = train::start_training(no_rec);
  const auto a = run(no_rec, 50);
  const bool da_frozen = identical(snapshot(*init.bundle.anatomy_decoder), snapshot(*a.bundle.anatomy_decoder));
  const bool d_frozen = identical(snapshot(*init.bundle.joint_decoder), snapshot(*a.bundle.joint_decoder));
  const bool ea_moved = !identical(snapshot(*init.bundle.anatomy_encoder), snapshot(*a.bundle.anatomy_encoder));

  auto zero_c = cfg;
  zero_c.weights = {1.0, 0.0};
  auto removed = zero_c;
  removed.consistency_in_graph = false;
  const auto with = run(zero_c, 50);
  const auto without = run(removed, 50);
  double dc = 0, dd = 0;
  const bool ec_same = identical(snapshot(*with.bundle.characteristic_encoder), snapshot(*without.bundle.characteristic_encoder), &dc);
  const bool d_same = identical(snapshot(*with.bundle.joint_decoder), snapshot(*without.bundle.joint_decoder), &dd);
  return check(da_frozen && d_frozen && ea_moved && ec_same && d_same,
               std::string("lambda_rec=0: D_A ") + (da_frozen ? "unchanged" : "CHANGED") + ", D " +
                   (d_frozen ? "unchanged" : "CHANGED") + ", E_A " + (ea_moved ? "updated" : "NOT updated") +
                   "; lambda_cons=0 vs L_C removed: E_C max diff " + num(dc, 3) + ", D max diff " + num(dd, 3) +
                   " after 50 steps");
}

// ---------------------------------------------------------------- 4

Outcome overfit(const data::DatasetSplits& synth, const loss::LossWeights& weights) {
  train::TrainConfig cfg;  // default architecture
  cfg.weights = weights;
  cfg.lr_base = cfg.lr_max = 1e-3;
  data::IndexBatch idx;
  for (std::size_t i = 0; i < 8; ++i) idx.push_back(i);
  const auto batch = train::gather(synth.train, idx, 21);  // fixed variants every step
  auto st = train::start_training(cfg);
  const auto inputs = train::build_variants(batch, cfg);
  const double initial = train::forward_losses(st.bundle, inputs, cfg).recon_synthetic.item<double>();
  double last = initial, best = initial;
  for (int s = 0; s < 500; ++s) {
    last = train::train_step(st.bundle, batch, cfg, st.optimizer, cfg.lr_max).recon_synthetic;
    best = std::min(best, last);
  }
  const double final_rs = train::forward_losses(st.bundle, inputs, cfg).recon_synthetic.item<double>();
  return check(final_rs < 0.01 * initial, "lambda_cons " + num(weights.consistency, 3) + ": L_RS initial " + num(initial) + " -> after 500 steps " + num(final_rs) +
                                              " (" + num(100 * final_rs / initial, 3) + "% of initial)");
}

// ---------------------------------------------------------------- 5, 6, 7, 9

struct TrainedPair {
  model::ModelBundle unoranic;
  model::ModelBundle ae;
  double seconds = 0;
  int epochs_u = 0, epochs_ae = 0;
};

TrainedPair train_pair(const train::TrainConfig& cfg, const data::DatasetSplits& d, const fs::path& dir, bool reuse,
                       bool verbose) {
  TrainedPair out;
  const auto u_path = dir / "unoranic.zip", ae_path = dir / "vanilla_ae.zip";
  const auto t0 = std::chrono::steady_clock::now();
  train::FitHooks hooks;
  if (verbose)
    hooks.on_record = [](const train::TrainLogRecord& r) {
      std::cerr << "  epoch " << r.epoch << " val " << r.val->total << " L_RS " << r.val->recon_synthetic << " L_RI "
                << r.val->recon_anatomy << " L_C " << r.val->consistency << " (" << num(r.wall_seconds, 3) << " s)\n";
    };
  if (reuse && fs::exists(u_path) && fs::exists(ae_path)) {
    out.unoranic = train::load_model(u_path);
    out.ae = train::load_model(ae_path);
  } else {
    auto u = train::fit(cfg, d.train, d.val, hooks);
    train::save_model(u_path, u.best, cfg);
    out.epochs_u = u.state.progress.epoch;
    auto ae = train::fit_vanilla_ae(cfg, d.train, d.val, hooks);
    auto ae_cfg = cfg;
    ae_cfg.model_kind = model::ModelKind::vanilla_ae;
    train::save_model(ae_path, ae.best, ae_cfg);
    out.epochs_ae = ae.state.progress.epoch;
    out.unoranic = std::move(u.best);
    out.ae = std::move(ae.best);
  }
  out.seconds = elapsed_since(t0);
  return out;
}

Outcome orthogonalization(model::ModelBundle& u, const data::Dataset& test, const fs::path& dir) {
  auto policy = augment::AugmentationPolicy::training_default();  // corrupted variants only
  const auto st = eval::orthogonalization(u, test, policy, 404);
  config::write_json_file(dir / "orthogonalization.json",
                          Json{{"intra", st.intra}, {"inter", st.inter}, {"ratio", st.ratio()}});
  return check(st.ratio() < 0.5, "intra " + num(st.intra) + " / inter " + num(st.inter) + " = " + num(st.ratio(), 3) +
                                     " on " + std::to_string(test.size()) + " held-out images (limit 0.5)");
}

Outcome revision(model::ModelBundle& u, const data::Dataset& test, const fs::path& dir) {
  const std::vector<CorruptionKind> kinds(augment::training_kinds().begin(), augment::training_kinds().end());
  const auto r = eval::revision_experiment(u, test, kinds, 3, 11);
  config::write_json_file(dir / "revision.json", eval::to_json(r));
  bool ok = true;
  std::string worst_kind;
  double worst_gap = -1e9;
  std::string failures;
  for (const auto& e : r.entries) {
    const double gap = r.psnr_clean_reference - e.psnr_revised;
    const bool near = std::abs(gap) <= 3.0;
    const bool improves = !(e.psnr_corrupted < 25.0) || e.psnr_revised > e.psnr_corrupted;
    if (!near || !improves) {
      ok = false;
      failures += " " + std::string(augment::to_string(e.kind));
    }
    if (gap > worst_gap) {
      worst_gap = gap;
      worst_kind = augment::to_string(e.kind);
    }
  }
  return check(ok, "clean reference " + num(r.psnr_clean_reference) + " dB; largest drop " + num(worst_gap, 3) +
                       " dB (" + worst_kind + ") over " + std::to_string(r.entries.size()) +
                       " training corruptions at severity 3" + (ok ? "" : "; failing:" + failures));
}

Outcome ae_comparison(TrainedPair& p, const data::Dataset& test, const fs::path& dir) {
  const auto u = eval::reconstruction_experiment(p.unoranic, test);
  const auto ae = eval::reconstruction_experiment(p.ae, test);
  config::write_json_file(dir / "reconstruction.json", Json::array({eval::to_json(u), eval::to_json(ae)}));
  return check(u.mean_psnr >= ae.mean_psnr - 0.1, "unORANIC " + num(u.mean_psnr) + " dB vs vanilla AE " +
                                                      num(ae.mean_psnr) + " dB (margin " +
                                                      num(u.mean_psnr - ae.mean_psnr, 3) + ", need >= -0.1)");
}

std::vector<std::int64_t> labels_of(const data::Dataset& d) {
  std::vector<std::int64_t> y;
  for (const auto& s : d.samples) y.push_back(s.label.value_or(0));
  return y;
}

Outcome robustness(TrainedPair& p, const data::DatasetSplits& d, const fs::path& dir) {
  eval::ProbeConfig pc;
  pc.seed = 5;
  const auto y = labels_of(d.train);
  const auto probe_u = eval::LinearProbe::fit(eval::embed(p.unoranic, eval::EmbeddingSource::anatomy, d.train.samples), y,
                                              d.train.class_count, pc);
  const auto probe_ae =
      eval::LinearProbe::fit(eval::embed(p.ae, eval::EmbeddingSource::anatomy, d.train.samples), y, d.train.class_count, pc);
  const std::vector<eval::RobustnessModel> models{{"unoranic", &p.unoranic, eval::EmbeddingSource::anatomy, &probe_u},
                                                  {"vanilla_ae", &p.ae, eval::EmbeddingSource::anatomy, &probe_ae}};
  const std::vector<CorruptionKind> noise(augment::noise_kinds().begin(), augment::noise_kinds().end());
  const auto r = eval::robustness_sweep(models, d.test, noise, 13);
  config::write_json_file(dir / "robustness.json", eval::to_json(r));

  bool ok = true;
  std::string detail;
  for (const auto& m : models) {
    int inversions = 0;
    bool too_big = false;
    detail += m.name + " [";
    for (int s = 1; s <= 5; ++s) {
      const double v = r.mean_auc(m.name, noise, s);
      detail += num(v, 4) + (s < 5 ? " " : "]  ");
      if (s > 1) {
        const double rise = v - r.mean_auc(m.name, noise, s - 1);
        if (rise > 0) {
          ++inversions;
          too_big = too_big || rise > 0.01;
        }
      }
    }
    ok = ok && inversions <= 1 && !too_big;
  }
  const double u5 = r.mean_auc("unoranic", noise, 5), ae5 = r.mean_auc("vanilla_ae", noise, 5);
  ok = ok && u5 >= ae5;
  return check(ok, "noise-mean AUC by severity 1..5: " + detail + "sev-5 margin " + num(u5 - ae5, 3));
}

// ---------------------------------------------------------------- 8

Outcome metric_oracles() {
  std::mt19937_64 gen(8);
  int exact = 0, trials = 0;
  for (int n : {2, 3, 10, 57, 200, 499, 500}) {
    for (int rep = 0; rep < 6; ++rep, ++trials) {
      std::uniform_int_distribution<int> coarse(0, rep % 2 ? 4 : 1000);
      std::vector<double> s(static_cast<std::size_t>(n));
      std::vector<std::int64_t> y(s.size());
      for (std::size_t i = 0; i < s.size(); ++i) {
        s[i] = coarse(gen) / 7.0;
        y[i] = static_cast<std::int64_t>((gen() % 3) == 0);
      }
      y[0] = 0;
      y[1] = 1;
      double wins = 0, pairs = 0;
      for (std::size_t i = 0; i < s.size(); ++i)
        for (std::size_t j = 0; j < s.size(); ++j)
          if (y[i] == 1 && y[j] == 0) {
            pairs += 1;
            wins += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
          }
      exact += eval::roc_auc(s, y) == wins / pairs;
    }
  }
  const std::vector<double> a{0.0, 0.0, 0.0, 0.0}, b{0.1, 0.1, 0.1, 0.1};
  const double p = eval::psnr(a, b);
  return check(exact == trials && std::abs(p - 20.0) < 1e-9,
               "roc_auc bit-equal to pair counting in " + std::to_string(exact) + "/" + std::to_string(trials) +
                   " cases (n <= 500, with ties); PSNR hand case " + num(p, 15) + " dB");
}

// ---------------------------------------------------------------- 10

Outcome medmnist(const std::optional<fs::path>& root, const fs::path& dir, bool verbose) {
  if (!root) return {Verdict::skip, "set UNORANIC_MEDMNIST_DIR (bloodmnist.npz, pneumoniamnist.npz) to run"};
  const auto blood_path = *root / "bloodmnist.npz", pneu_path = *root / "pneumoniamnist.npz";
  if (!fs::exists(blood_path) || !fs::exists(pneu_path))
    return {Verdict::skip, "bloodmnist.npz or pneumoniamnist.npz missing in " + root->string()};
  auto cfg = config::train_config_from_json(config::read_json_file(fs::path(UNORANIC_CONFIG_DIR) / "medmnist.json").at("train"));
  auto train_on = [&](const data::DatasetSplits& s) {
    auto c = cfg;
    c.arch.input_channels = s.train.shape().channels;
    c.arch.input_side = s.train.shape().height;
    train::FitHooks hooks;
    if (verbose)
      hooks.on_record = [](const train::TrainLogRecord& r) { std::cerr << "  epoch " << r.epoch << " val " << r.val->total << "\n"; };
    return train::fit(c, s.train, s.val, hooks).best;
  };
  const auto blood = data::load_container_splits(blood_path);
  auto bb = train_on(blood);
  const auto recon = eval::reconstruction_experiment(bb, blood.test);
  eval::ProbeExperimentConfig pec;
  pec.seed = 3;
  const auto blood_probes = eval::probe_experiment(bb, blood.train, blood.test, pec);
  double detect = 0;
  for (const auto& r : blood_probes)
    if (r.task == eval::ProbeTask::corruption_detection && r.source == eval::EmbeddingSource::characteristic) detect = r.auc;
  const auto pneu = data::load_container_splits(pneu_path);
  auto pb = train_on(pneu);
  const auto pneu_probes = eval::probe_experiment(pb, pneu.train, pneu.test, pec);
  double anat = 0;
  for (const auto& r : pneu_probes)
    if (r.task == eval::ProbeTask::classification && r.source == eval::EmbeddingSource::anatomy) anat = r.auc;
  config::write_json_file(dir / "medmnist.json", Json{{"blood_recon", eval::to_json(recon)},
                                                      {"blood_probes", eval::to_json(blood_probes)},
                                                      {"pneumonia_probes", eval::to_json(pneu_probes)}});
  const bool ok = std::abs(recon.mean_psnr - 31.7) <= 2.0 && anat >= 0.90 && detect > 0.6;
  return check(ok, "Blood recon " + num(recon.mean_psnr) + " dB (31.7 +/- 2); Pneumonia anatomy AUC " + num(anat, 3) +
                       " (>= 0.90); Blood characteristic detection AUC " + num(detect, 3) + " (> 0.6)");
}

// ---------------------------------------------------------------- 11

std::string file_digest(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(in)), {});
  std::uint64_t h = 1469598103934665603ULL;  // FNV-1a
  for (unsigned char c : bytes) h = (h ^ c) * 1099511628211ULL;
  std::ostringstream o;
  o << std::hex << std::setw(16) << std::setfill('0') << h;
  return o.str();
}

std::vector<std::string> pipeline_run(const fs::path& dir) {
  fs::create_directories(dir);
  data::SyntheticSpec spec;
  spec.train_count = 96;
  spec.val_count = 32;
  spec.test_count = 32;
  spec.image_side = 16;
  spec.seed = 99;
  data::write_container(dir / "data.npz", data::generate_synthetic(spec));
  const auto d = data::load_container_splits(dir / "data.npz");
  train::TrainConfig cfg;
  cfg.arch.input_side = 16;
  cfg.arch.block_count = 2;
  cfg.arch.base_channels = 8;
  cfg.arch.latent_dim = 16;
  cfg.batch_size = 16;
  cfg.max_epochs = 2;
  cfg.weights = {1.0, 0.001};
  cfg.seed = 31;
  auto r = train::fit(cfg, d.train, d.val);
  train::save_checkpoint(dir / "checkpoint.zip", r.state);
  train::save_model(dir / "best.zip", r.best, cfg);
  auto best = train::load_model(dir / "best.zip");
  const std::vector<CorruptionKind> kinds{CorruptionKind::gaussian_noise, CorruptionKind::contrast};
  const auto rev = eval::revision_experiment(best, d.test, kinds, 3, 4);
  config::write_json_file(dir / "revise.json", eval::to_json(rev));
  std::ofstream(dir / "revise.csv") << eval::to_csv(rev);
  eval::ProbeExperimentConfig pec;
  pec.probe.epochs = 20;
  config::write_json_file(dir / "probe.json", eval::to_json(eval::probe_experiment(best, d.train, d.test, pec)));
  std::vector<std::string> digests;
  for (const char* f : {"data.npz", "checkpoint.zip", "best.zip", "revise.json", "revise.csv", "probe.json"})
    digests.push_back(std::string(f) + "=" + file_digest(dir / f));
  return digests;
}

Outcome determinism(const fs::path& dir) {
  fs::remove_all(dir / "run_a");
  fs::remove_all(dir / "run_b");
  const auto a = pipeline_run(dir / "run_a");
  const auto b = pipeline_run(dir / "run_b");
  std::string detail;
  int same = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    same += a[i] == b[i];
    if (a[i] != b[i]) detail += " differs:" + a[i];
  }
  return check(same == static_cast<int>(a.size()),
               std::to_string(same) + "/" + std::to_string(a.size()) + " artifact hashes identical across two runs (" +
                   a[1] + ", " + a[3] + ")" + detail);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"unORANIC acceptance criteria"};
  fs::path work = fs::temp_directory_path() / "unoranic-acceptance";
  std::vector<int> only;
  bool reuse = false, verbose = false;
  fs::path run_config = fs::path(UNORANIC_CONFIG_DIR) / "synthetic.json";
  app.add_option("--work-dir", work, "Directory for models and reports");
  app.add_option("--only", only, "Run only these criteria")->delimiter(',');
  app.add_option("--config", run_config, "Run config for the synthetic training criteria");
  app.add_flag("--reuse", reuse, "Reuse trained models found in the work dir");
  app.add_flag("--verbose", verbose, "Per-epoch progress on stderr");
  CLI11_PARSE(app, argc, argv);

  torch::set_num_threads(1);
  fs::create_directories(work);
  std::optional<fs::path> medmnist_dir;
  if (const char* env = std::getenv("UNORANIC_MEDMNIST_DIR"); env && *env) medmnist_dir = env;

  const std::set<int> selected(only.begin(), only.end());
  auto wanted = [&](int c) { return selected.empty() || selected.count(c) > 0; };
  int failures = 0;
  auto report = [&](int id, const std::string& name, const std::function<Outcome()>& body) {
    if (!wanted(id)) return;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = body();
    } catch (const std::exception& e) {
      o = {Verdict::fail, std::string("exception: ") + e.what()};
    }
    const char* tag = o.verdict == Verdict::pass ? "PASS" : o.verdict == Verdict::fail ? "FAIL" : "SKIP";
    failures += o.verdict == Verdict::fail;
    std::cout << "criterion " << std::setw(2) << id << " " << tag << "  " << name << ": " << o.detail << "  ["
              << num(elapsed_since(t0), 3) << " s]" << std::endl;
  };

  const auto rc = config::read_json_file(run_config);
  const auto spec = config::synthetic_spec_from_json(rc.at("synthetic"));
  auto cfg = config::train_config_from_json(rc.at("train"));
  cfg.arch.input_side = spec.image_side;
  cfg.arch.input_channels = spec.channels;
  cfg.validate();
  const auto synth = data::generate_synthetic(spec);
  const auto small = [] {
    data::SyntheticSpec s;
    s.train_count = 64;
    s.val_count = 16;
    s.test_count = 16;
    s.image_side = 16;
    return data::generate_synthetic(s);
  }();

  report(1, "loss oracles", loss_oracles);
  report(2, "gradient check", gradient_check);
  report(3, "routing", [&] { return routing(small); });
  report(4, "overfit one batch", [&] { return overfit(synth, cfg.weights); });

  std::optional<TrainedPair> pair;
  auto trained = [&]() -> TrainedPair& {
    if (!pair) {
      pair = train_pair(cfg, synth, work, reuse, verbose);
      std::cout << "# trained unORANIC and vanilla AE (" << cfg.max_epochs << " epoch budget, base "
                << cfg.arch.base_channels << ", lambda_cons " << cfg.weights.consistency << ") in "
                << num(pair->seconds, 4) << " s" << std::endl;
    }
    return *pair;
  };
  report(5, "orthogonalization", [&] { return orthogonalization(trained().unoranic, synth.test, work); });
  report(6, "corruption revision", [&] { return revision(trained().unoranic, synth.test, work); });
  report(7, "reconstruction vs vanilla AE", [&] { return ae_comparison(trained(), synth.test, work); });
  report(8, "metric oracles", metric_oracles);
  report(9, "robustness trend", [&] { return robustness(trained(), synth, work); });
  report(10, "MedMNIST bands (optional)", [&] { return medmnist(medmnist_dir, work, verbose); });
  report(11, "end-to-end determinism", [&] { return determinism(work); });
  return failures == 0 ? 0 : 1;
}
