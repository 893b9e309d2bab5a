#include "unoranic/cli/commands.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "unoranic/cli/manifest.hpp"
#include "unoranic/cli/run_config.hpp"
#include "unoranic/errors.hpp"
#include "unoranic/experiments.hpp"
#include "unoranic/reports.hpp"
#include "unoranic/seed.hpp"
#include "unoranic/zip_archive.hpp"

namespace unoranic::cli {
namespace fs = std::filesystem;
using config::Json;

namespace {

std::optional<std::uint64_t> seed_override() {
  const char* env = std::getenv("UNORANIC_SEED");
  if (!env || !*env) return std::nullopt;
  try {
    std::size_t used = 0;
    const auto v = std::stoull(env, &used, 10);
    if (used != std::string(env).size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw ConfigError(std::string("UNORANIC_SEED is not a non-negative integer: '") + env + "'");
  }
}

void prepare_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir))
    throw ConfigError("cannot create output directory " + dir.string() + ": " + ec.message());
  const auto probe = dir / ".write-test";
  std::ofstream f(probe);
  if (!f) throw ConfigError("output directory is not writable: " + dir.string());
  f.close();
  fs::remove(probe, ec);
}

void write_text(const fs::path& root, const std::string& name, const std::string& text, RunManifest& m) {
  const auto path = root / name;
  zip::write_file_atomic(path, std::as_bytes(std::span(text.data(), text.size())));
  m.add_artifact(root, path);
}

void write_json(const fs::path& root, const std::string& name, const Json& j, RunManifest& m) {
  config::write_json_file(root / name, j);
  m.add_artifact(root, root / name);
}

std::vector<std::string> argv_of(const std::string& command) { return {"unoranic", command}; }

// Maps library exceptions onto the exit-code contract.
template <class F>
int guarded(std::ostream& err, int default_code, F&& body) {
  try {
    return body();
  } catch (const ArtifactMismatchError& e) {
    err << "error: " << e.what() << '\n';
    return kExitArtifactMismatch;
  } catch (const DivergenceError& e) {
    err << "error: training diverged: " << e.what() << '\n';
    return kExitTrainingFailure;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const FormatError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const IntegrityError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return default_code;
  }
}

std::string prefixed_csv(const std::string& model, const std::string& csv, bool header) {
  std::istringstream in(csv);
  std::ostringstream o;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (first) {
      if (header) o << "model," << line << '\n';
      first = false;
      continue;
    }
    o << model << ',' << line << '\n';
  }
  return o.str();
}

struct LoadedModel {
  std::string name;
  fs::path path;
  model::ModelBundle bundle;
};

std::vector<LoadedModel> load_models(const std::vector<fs::path>& paths) {
  std::vector<LoadedModel> out;
  std::map<std::string, int> used;
  for (const auto& p : paths) {
    if (!fs::exists(p)) throw ConfigError("checkpoint not found: " + p.string());
    model::ModelBundle bundle;
    try {
      bundle = train::load_model(p);
    } catch (const FormatError& e) {
      throw ArtifactMismatchError(p.string() + ": " + e.what());
    } catch (const IntegrityError& e) {
      throw ArtifactMismatchError(p.string() + ": " + e.what());
    }
    std::string name(model::to_string(bundle.kind));
    if (++used[name] > 1) name += "#" + std::to_string(used[name]);
    out.push_back({name, p, std::move(bundle)});
  }
  return out;
}

}  // namespace

int cmd_synth(const SynthArgs& args, std::ostream& out, std::ostream& err) {
  return guarded(err, kExitUsage, [&] {
    auto spec = config::synthetic_spec_from_json(config::read_json_file(args.spec));
    if (auto s = seed_override()) spec.seed = *s;
    prepare_dir(args.out);
    RunManifest manifest("synth", argv_of("synth"));
    manifest.set_config(config::to_json(spec));
    manifest.add_seed("synthetic", spec.seed);
    const auto splits = data::generate_synthetic(spec);
    const auto path = args.out / (spec.name + ".npz");
    data::write_container(path, splits);
    manifest.add_artifact(args.out, path);
    manifest.write(args.out);
    out << "wrote " << path.string() << " (" << splits.train.size() << "/" << splits.val.size() << "/"
        << splits.test.size() << " samples)\n";
    return kExitOk;
  });
}

int cmd_train(const TrainArgs& args, std::ostream& out, std::ostream& err) {
  fs::path out_dir;
  std::optional<RunManifest> manifest;
  const int code = guarded(err, kExitTrainingFailure, [&] {
    auto rc = run_config_from_json(config::read_json_file(args.config));
    if (args.model) rc.train.model_kind = model::parse_model_kind(*args.model);
    if (auto s = seed_override()) rc.train.seed = *s;
    if (args.out) rc.out = args.out->string();
    if (args.data) rc.data = args.data->string();
    if (!rc.out) throw ConfigError("no output directory: pass --out or set \"out\" in the config");
    out_dir = *rc.out;

    data::DatasetSplits splits;
    if (rc.data) {
      splits = data::load_container_splits(*rc.data);
    } else if (rc.synthetic) {
      splits = data::generate_synthetic(*rc.synthetic);
    } else {
      throw ConfigError("no dataset: pass --data or set \"data\" in the config");
    }
    splits.train.validate();
    splits.val.validate();
    if (rc.arch_shape_from_data) {
      const auto shape = splits.train.shape();
      if (shape.height != shape.width) throw ConfigError("only square images are supported");
      rc.train.arch.input_channels = shape.channels;
      rc.train.arch.input_side = shape.height;
    }
    rc.train.validate();

    prepare_dir(out_dir);
    manifest.emplace("train", argv_of("train"));
    const auto resolved = to_json(rc);
    manifest->set_config(resolved);
    manifest->add_seed("train", rc.train.seed);
    write_json(out_dir, kResolvedConfigFile, resolved, *manifest);

    const auto ckpt_path = out_dir / kCheckpointFile;
    const auto log_path = out_dir / kLogFile;
    const bool resuming = args.resume && fs::exists(ckpt_path);
    auto state = resuming ? train::load_checkpoint(ckpt_path) : train::start_training(rc.train);
    if (resuming && config::to_json(state.config) != config::to_json(rc.train))
      throw ArtifactMismatchError("existing checkpoint was trained with a different configuration");
    std::ofstream log(log_path, resuming ? std::ios::app : std::ios::trunc);
    if (!log) throw ConfigError("cannot write " + log_path.string());

    train::FitHooks hooks;
    hooks.on_record = [&](const train::TrainLogRecord& r) {
      Json j{{"epoch", r.epoch}, {"step", r.step}, {"lr", r.lr},
             {"train", {{"consistency", r.train.consistency}, {"recon_synthetic", r.train.recon_synthetic},
                        {"recon_anatomy", r.train.recon_anatomy}, {"total", r.train.total}}}};
      if (r.val)
        j["val"] = {{"consistency", r.val->consistency}, {"recon_synthetic", r.val->recon_synthetic},
                    {"recon_anatomy", r.val->recon_anatomy}, {"total", r.val->total}};
      j["wall_seconds"] = r.wall_seconds;
      log << j.dump() << '\n' << std::flush;
      if (!args.quiet)
        out << "epoch " << r.epoch << " step " << r.step << " train " << r.train.total << " val "
            << (r.val ? r.val->total : 0.0) << '\n' << std::flush;
    };
    hooks.on_epoch_end = [&](const train::TrainState& s) { train::save_checkpoint(ckpt_path, s); };

    auto result = train::resume(std::move(state), splits.train, splits.val, hooks);
    train::save_checkpoint(ckpt_path, result.state);
    train::save_model(out_dir / kBestModelFile, result.best, rc.train);
    log.close();
    manifest->add_artifact(out_dir, ckpt_path);
    manifest->add_artifact(out_dir, out_dir / kBestModelFile);
    manifest->add_artifact(out_dir, log_path);
    manifest->write(out_dir);
    out << "best epoch " << result.state.progress.best_epoch << ", val total "
        << result.state.progress.best_val_total << "\n";
    return kExitOk;
  });
  if (code == kExitTrainingFailure && manifest) {
    // The per-epoch checkpoint stays in place; record the failure next to it.
    try {
      manifest->set_status("failed");
      if (fs::exists(out_dir / kCheckpointFile)) manifest->add_artifact(out_dir, out_dir / kCheckpointFile);
      manifest->write(out_dir);
    } catch (const std::exception&) {
    }
  }
  return code;
}

int cmd_corrupt(const CorruptArgs& args, std::ostream& out, std::ostream& err) {
  return guarded(err, kExitUsage, [&] {
    if (args.list) {
      for (auto kind : augment::all_kinds()) {
        out << augment::to_string(kind);
        if (kind != augment::CorruptionKind::identity)
          for (int s = augment::kMinSeverity; s <= augment::kMaxSeverity; ++s)
            out << ' ' << augment::severity_parameter(kind, s);
        out << '\n';
      }
      return kExitOk;
    }
    if (!args.data || !args.out) throw ConfigError("corrupt needs --data and --out (or --list)");
    if (args.corruption.empty()) throw ConfigError("corrupt needs --corruption");
    const auto kind = augment::parse_kind(args.corruption);
    if (args.severity < augment::kMinSeverity || args.severity > augment::kMaxSeverity)
      throw ConfigError("severity must be in 1..5");
    const auto seed = seed_override().value_or(args.seed);
    auto splits = data::load_container_splits(*args.data);
    prepare_dir(*args.out);
    RunManifest manifest("corrupt", argv_of("corrupt"));
    manifest.set_config(Json{{"data", args.data->string()},
                             {"corruption", args.corruption},
                             {"severity", args.severity},
                             {"seed", seed}});
    manifest.add_seed("corrupt", seed);
    std::uint64_t split_tag = 0;
    for (auto* ds : {&splits.train, &splits.val, &splits.test}) {
      for (std::size_t i = 0; i < ds->size(); ++i)
        ds->samples[i] = augment::apply_corruption(
            ds->samples[i], {kind, args.severity, derive_seed(seed, {split_tag, i})});
      ++split_tag;
    }
    const auto path = *args.out / (args.data->stem().string() + "-" + args.corruption + "-s" +
                                   std::to_string(args.severity) + ".npz");
    data::write_container(path, splits);
    manifest.add_artifact(*args.out, path);
    manifest.write(*args.out);
    out << "wrote " << path.string() << '\n';
    return kExitOk;
  });
}

int cmd_eval(const EvalArgs& args, std::ostream& out, std::ostream& err) {
  std::ostringstream sink;
  std::ostream& say = args.quiet ? sink : out;
  return guarded(err, kExitUsage, [&] {
    const std::string& ex = args.experiment;
    if (ex != "recon" && ex != "revise" && ex != "probe" && ex != "robust")
      throw ConfigError("unknown experiment '" + ex + "' (expected recon|revise|probe|robust)");
    if (args.checkpoints.empty()) throw ConfigError("at least one --checkpoint is required");
    EvalSettings settings;
    if (args.config) settings = run_config_from_json(config::read_json_file(*args.config)).eval;
    if (auto s = seed_override()) settings.seed = *s;

    auto splits = data::load_container_splits(args.data);
    auto models = load_models(args.checkpoints);
    prepare_dir(args.out);
    RunManifest manifest("eval", argv_of("eval"));
    Json cfg{{"experiment", ex}, {"data", args.data.string()}, {"eval", to_json(settings)}};
    Json ck = Json::array();
    for (const auto& m : models) ck.push_back({{"name", m.name}, {"path", m.path.string()}, {"sha256", sha256_hex(m.path)}});
    cfg["checkpoints"] = ck;
    manifest.set_config(cfg);
    manifest.add_seed("eval", settings.seed);

    Json report{{"experiment", ex}, {"dataset", splits.test.name}};
    std::string csv;
    std::string svg;
    if (ex == "recon") {
      std::vector<eval::PsnrReport> reports;
      Json arr = Json::array();
      for (auto& m : models) {
        reports.push_back(eval::reconstruction_experiment(m.bundle, splits.test));
        auto j = eval::to_json(reports.back());
        j["model"] = m.name;
        arr.push_back(j);
        say << m.name << ": mean PSNR " << reports.back().mean_psnr << " dB\n";
      }
      report["reports"] = arr;
      csv = eval::to_csv(reports);
      svg = eval::render_bar_chart(eval::reconstruction_chart(reports));
    } else if (ex == "revise") {
      Json arr = Json::array();
      for (std::size_t i = 0; i < models.size(); ++i) {
        auto& m = models[i];
        const auto r = eval::revision_experiment(m.bundle, splits.test, settings.revision_kinds,
                                                 settings.revision_severity, settings.seed);
        auto j = eval::to_json(r);
        j["model"] = m.name;
        arr.push_back(j);
        csv += prefixed_csv(m.name, eval::to_csv(r), i == 0);
        if (i == 0) svg = eval::render_line_chart(eval::revision_chart(r));
        say << m.name << ": clean reference " << r.psnr_clean_reference << " dB\n";
      }
      report["reports"] = arr;
    } else if (ex == "probe") {
      Json arr = Json::array();
      eval::Chart chart{"Linear probes (" + splits.test.name + ")", "task / embedding", "AUC", {}, {}};
      for (std::size_t i = 0; i < models.size(); ++i) {
        auto& m = models[i];
        eval::ProbeExperimentConfig pc;
        pc.probe = settings.probe;
        pc.seed = settings.seed;
        const auto results = eval::probe_experiment(m.bundle, splits.train, splits.test, pc);
        arr.push_back({{"model", m.name}, {"results", eval::to_json(results)}});
        csv += prefixed_csv(m.name, eval::to_csv(results), i == 0);
        eval::Series s{m.name, {}};
        for (const auto& r : results) {
          const auto label = std::string(eval::to_string(r.task)) + " / " + std::string(eval::to_string(r.source));
          auto it = std::find(chart.categories.begin(), chart.categories.end(), label);
          if (it == chart.categories.end()) {
            chart.categories.push_back(label);
            for (auto& other : chart.series) other.values.push_back(NAN);
            it = chart.categories.end() - 1;
          }
          s.values.resize(chart.categories.size(), NAN);
          s.values[it - chart.categories.begin()] = r.auc;
          say << m.name << ": " << label << " AUC " << r.auc << " ACC " << r.acc << '\n';
        }
        chart.series.push_back(s);
      }
      for (auto& s : chart.series) s.values.resize(chart.categories.size(), NAN);
      report["reports"] = arr;
      svg = eval::render_bar_chart(chart);
    } else {
      std::vector<eval::LinearProbe> probes;
      probes.reserve(models.size());
      const auto labels = [&] {
        std::vector<std::int64_t> l;
        for (const auto& s : splits.train.samples) l.push_back(s.label.value_or(0));
        return l;
      }();
      std::vector<eval::RobustnessModel> entries;
      for (auto& m : models) {
        probes.push_back(eval::LinearProbe::fit(eval::embed(m.bundle, eval::EmbeddingSource::anatomy, splits.train.samples),
                                                labels, std::max(2, splits.train.class_count), settings.probe));
      }
      for (std::size_t i = 0; i < models.size(); ++i)
        entries.push_back({models[i].name, &models[i].bundle, eval::EmbeddingSource::anatomy, &probes[i]});
      const auto r = eval::robustness_sweep(entries, splits.test, settings.robustness_kinds, settings.seed);
      report["report"] = eval::to_json(r);
      csv = eval::to_csv(r);
      svg = eval::render_line_chart(eval::robustness_chart(r, settings.robustness_kinds,
                                                           "Probe AUC under corruption (" + splits.test.name + ")"));
      std::vector<augment::CorruptionKind> noise;
      for (auto k : augment::noise_kinds())
        if (std::find(settings.robustness_kinds.begin(), settings.robustness_kinds.end(), k) != settings.robustness_kinds.end())
          noise.push_back(k);
      if (!noise.empty())
        write_text(args.out, "robust_noise.svg",
                   eval::render_line_chart(eval::robustness_chart(r, noise, "Probe AUC under noise (" + splits.test.name + ")")),
                   manifest);
      for (const auto& m : models)
        say << m.name << ": clean AUC " << r.auc(m.name, augment::CorruptionKind::identity, 0) << '\n';
    }
    write_json(args.out, ex + ".json", report, manifest);
    write_text(args.out, ex + ".csv", csv, manifest);
    write_text(args.out, ex + ".svg", svg, manifest);
    manifest.write(args.out, "manifest-" + ex + ".json");
    return kExitOk;
  });
}

int run(const std::vector<std::string>& argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"unORANIC: dual-branch autoencoder training and evaluation", "unoranic"};
  app.require_subcommand(1);
  app.set_version_flag("--version", version_string());

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "Generate a synthetic dataset container");
  s->add_option("--spec", synth.spec, "Synthetic dataset spec (JSON)")->required();
  s->add_option("--out", synth.out, "Output directory")->required();

  TrainArgs tr;
  std::string model;
  auto* t = app.add_subcommand("train", "Train unORANIC or the vanilla AE baseline");
  t->add_option("--config", tr.config, "Run config (JSON)")->required();
  t->add_option("--data", tr.data, "Dataset container (.npz)");
  t->add_option("--out", tr.out, "Output directory");
  t->add_option("--model", model, "unoranic | vanilla_ae")->check(CLI::IsMember({"unoranic", "vanilla_ae"}));
  t->add_flag("--resume", tr.resume, "Continue from <out>/checkpoint.zip if present");
  t->add_flag("--quiet", tr.quiet, "No per-epoch progress output");

  CorruptArgs co;
  auto* c = app.add_subcommand("corrupt", "Apply one catalog corruption to a dataset container");
  c->add_option("--data", co.data, "Dataset container (.npz)");
  c->add_option("--corruption", co.corruption, "Corruption name (see --list)");
  c->add_option("--severity", co.severity, "Severity 1..5")->check(CLI::Range(1, 5));
  c->add_option("--seed", co.seed, "Base seed of the per-image streams");
  c->add_option("--out", co.out, "Output directory");
  c->add_flag("--list", co.list, "List corruption names and per-severity strengths");

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "Run an evaluation experiment");
  e->add_option("--checkpoint", ev.checkpoints, "Model or training checkpoint (repeatable)")->required();
  e->add_option("--data", ev.data, "Dataset container (.npz)")->required();
  e->add_option("--experiment", ev.experiment, "recon | revise | probe | robust")
      ->required()
      ->check(CLI::IsMember({"recon", "revise", "probe", "robust"}));
  e->add_option("--out", ev.out, "Output directory")->required();
  e->add_option("--config", ev.config, "Run config whose \"eval\" section is used");
  e->add_flag("--quiet", ev.quiet, "Only errors on stderr, no summary lines");

  std::vector<const char*> cargv;
  for (const auto& a : argv) cargv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(cargv.size()), cargv.data());
  } catch (const CLI::ParseError& pe) {
    const int code = app.exit(pe, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }
  if (!model.empty()) tr.model = model;
  if (s->parsed()) return cmd_synth(synth, out, err);
  if (t->parsed()) return cmd_train(tr, out, err);
  if (c->parsed()) return cmd_corrupt(co, out, err);
  return cmd_eval(ev, out, err);
}

}  // namespace unoranic::cli
