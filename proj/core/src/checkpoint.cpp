#include <cmath>
#include <cstring>

#include "unoranic/config.hpp"
#include "unoranic/errors.hpp"
#include "unoranic/npy.hpp"
#include "unoranic/train.hpp"
#include "unoranic/zip_archive.hpp"

namespace unoranic::train {
namespace {

using Json = config::Json;

npy::DType npy_dtype(torch::ScalarType t) {
  switch (t) {
    case torch::kFloat32: return npy::DType::f32;
    case torch::kFloat64: return npy::DType::f64;
    case torch::kInt64: return npy::DType::i64;
    default: throw ConfigError("checkpoint: unsupported tensor dtype");
  }
}

torch::ScalarType torch_dtype(npy::DType t) {
  switch (t) {
    case npy::DType::f32: return torch::kFloat32;
    case npy::DType::f64: return torch::kFloat64;
    case npy::DType::i64: return torch::kInt64;
    default: throw FormatError("checkpoint: unsupported array dtype");
  }
}

std::vector<std::byte> tensor_npy(const torch::Tensor& t) {
  const auto c = t.detach().cpu().contiguous();
  npy::Array a;
  a.dtype = npy_dtype(c.scalar_type());
  a.shape.assign(c.sizes().begin(), c.sizes().end());
  a.data.resize(c.nbytes());
  if (c.nbytes() > 0) std::memcpy(a.data.data(), c.data_ptr(), c.nbytes());
  return npy::serialize(a);
}

// Copies the stored array into `dst` in place after checking dtype and shape.
void restore(const zip::Reader& r, const std::string& name, torch::Tensor& dst) {
  const auto bytes = r.read(name);
  const auto a = npy::parse(bytes);
  if (torch_dtype(a.dtype) != dst.scalar_type())
    throw ArtifactMismatchError("checkpoint entry " + name + " has a different dtype");
  if (!std::equal(a.shape.begin(), a.shape.end(), dst.sizes().begin(), dst.sizes().end()))
    throw ArtifactMismatchError("checkpoint entry " + name + " has a different shape");
  torch::NoGradGuard no_grad;
  auto src = torch::empty(dst.sizes(), dst.options());
  if (!a.data.empty()) std::memcpy(src.data_ptr(), a.data.data(), a.data.size());
  dst.copy_(src);
}

template <class F>
void for_each_tensor(const model::ModelBundle& bundle, F&& f) {
  for (const auto& [net, module] : bundle.networks()) {
    for (auto& p : module->named_parameters()) f(net + "/" + p.key(), p.value());
    for (auto& b : module->named_buffers()) f(net + "/" + b.key(), b.value());
  }
}

void add_bundle(zip::Writer& w, const std::string& prefix, const model::ModelBundle& bundle) {
  for_each_tensor(bundle, [&](const std::string& name, const torch::Tensor& t) {
    w.add(prefix + name + ".npy", tensor_npy(t));
  });
}

void restore_bundle(const zip::Reader& r, const std::string& prefix, model::ModelBundle& bundle) {
  for_each_tensor(bundle, [&](const std::string& name, torch::Tensor t) {
    restore(r, prefix + name + ".npy", t);
  });
}

std::string dtype_name(torch::Dtype d) { return d == torch::kFloat64 ? "float64" : "float32"; }

torch::Dtype parse_dtype(const std::string& s) {
  if (s == "float32") return torch::kFloat32;
  if (s == "float64") return torch::kFloat64;
  throw FormatError("checkpoint: unknown dtype '" + s + "'");
}

Json header(std::string_view kind, const model::ModelBundle& bundle, const TrainConfig& config) {
  return Json{{"format", std::string(kCheckpointFormat)},
              {"version", kCheckpointVersion},
              {"content", std::string(kind)},
              {"model_kind", std::string(model::to_string(bundle.kind))},
              {"arch", config::to_json(bundle.arch)},
              {"dtype", dtype_name(bundle.dtype())},
              {"config", config::to_json(config)}};
}

Json read_header(const zip::Reader& r, std::string_view expected_content) {
  const auto bytes = r.read("checkpoint.json");
  Json j;
  try {
    j = Json::parse(reinterpret_cast<const char*>(bytes.data()),
                    reinterpret_cast<const char*>(bytes.data()) + bytes.size());
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint.json: ") + e.what());
  }
  if (!j.is_object() || j.value("format", "") != kCheckpointFormat)
    throw FormatError("not an unoranic checkpoint");
  if (j.value("version", 0) != kCheckpointVersion)
    throw ArtifactMismatchError("unsupported checkpoint version " + j["version"].dump());
  const auto content = j.value("content", "");
  if (expected_content == "training" && content != "training")
    throw ArtifactMismatchError("archive holds model weights only, not a training state");
  return j;
}

model::ModelBundle empty_bundle(const Json& j) {
  const auto arch = config::arch_from_json(j.at("arch"));
  auto bundle = model::init_model(arch, 0, model::parse_model_kind(j.at("model_kind").get<std::string>()));
  bundle.to(parse_dtype(j.at("dtype").get<std::string>()));
  return bundle;
}

Json breakdown_json(const loss::LossBreakdown& b) {
  return Json{{"consistency", b.consistency}, {"recon_synthetic", b.recon_synthetic},
              {"recon_anatomy", b.recon_anatomy}, {"total", b.total}};
}

loss::LossBreakdown breakdown_from(const Json& j) {
  return {j.at("consistency").get<double>(), j.at("recon_synthetic").get<double>(),
          j.at("recon_anatomy").get<double>(), j.at("total").get<double>()};
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const TrainState& state) {
  const auto& p = state.progress;
  auto j = header("training", state.bundle, state.config);
  j["progress"] = Json{{"epoch", p.epoch},
                       {"batch_in_epoch", p.batch_in_epoch},
                       {"global_step", p.global_step},
                       {"best_val_total", std::isfinite(p.best_val_total) ? Json(p.best_val_total) : Json()},
                       {"best_epoch", p.best_epoch},
                       {"epochs_since_improvement", p.epochs_since_improvement},
                       {"finished", p.finished}};
  j["rng"] = Json{{"master_seed", state.config.seed}, {"epoch", p.epoch}, {"batch_in_epoch", p.batch_in_epoch}};
  j["epoch_sum"] = breakdown_json(state.epoch_sum);
  j["epoch_samples"] = state.epoch_samples;
  j["optimizer_step"] = state.optimizer.step_count();
  j["has_best"] = state.best.has_value();

  zip::Writer w;
  const auto text = j.dump(2) + "\n";
  w.add("checkpoint.json", std::as_bytes(std::span(text.data(), text.size())));
  add_bundle(w, "model/", state.bundle);
  for (const auto& s : state.optimizer.slots()) {
    w.add("optim/exp_avg/" + s.name + ".npy", tensor_npy(s.exp_avg));
    w.add("optim/exp_avg_sq/" + s.name + ".npy", tensor_npy(s.exp_avg_sq));
  }
  if (state.best) add_bundle(w, "best/", *state.best);
  w.write_to(path);
}

TrainState load_checkpoint(const std::filesystem::path& path) {
  const zip::Reader r(path);
  const auto j = read_header(r, "training");
  try {
    auto config = config::train_config_from_json(j.at("config"));
    auto bundle = empty_bundle(j);
    restore_bundle(r, "model/", bundle);
    auto optimizer = make_optimizer(bundle, config);
    for (auto& s : optimizer.slots()) {
      restore(r, "optim/exp_avg/" + s.name + ".npy", s.exp_avg);
      restore(r, "optim/exp_avg_sq/" + s.name + ".npy", s.exp_avg_sq);
    }
    optimizer.set_step_count(j.at("optimizer_step").get<std::int64_t>());

    TrainProgress p;
    const auto& jp = j.at("progress");
    p.epoch = jp.at("epoch").get<int>();
    p.batch_in_epoch = jp.at("batch_in_epoch").get<std::size_t>();
    p.global_step = jp.at("global_step").get<std::int64_t>();
    if (!jp.at("best_val_total").is_null()) p.best_val_total = jp.at("best_val_total").get<double>();
    p.best_epoch = jp.at("best_epoch").get<int>();
    p.epochs_since_improvement = jp.at("epochs_since_improvement").get<int>();
    p.finished = jp.at("finished").get<bool>();

    std::optional<model::ModelBundle> best;
    if (j.at("has_best").get<bool>()) {
      best = empty_bundle(j);
      restore_bundle(r, "best/", *best);
    }
    TrainState state{std::move(config), std::move(bundle), std::move(optimizer), p, std::move(best),
                     breakdown_from(j.at("epoch_sum")), j.at("epoch_samples").get<std::size_t>()};
    return state;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": malformed checkpoint.json: " + e.what());
  }
}

void save_model(const std::filesystem::path& path, const model::ModelBundle& bundle,
                const TrainConfig& config) {
  auto j = header("model", bundle, config);
  zip::Writer w;
  const auto text = j.dump(2) + "\n";
  w.add("checkpoint.json", std::as_bytes(std::span(text.data(), text.size())));
  add_bundle(w, "model/", bundle);
  w.write_to(path);
}

model::ModelBundle load_model(const std::filesystem::path& path) {
  const zip::Reader r(path);
  const auto j = read_header(r, "model");
  try {
    // A training checkpoint serves its best weights when it has them.
    const bool use_best = j.value("content", "") == "training" && j.value("has_best", false);
    auto bundle = empty_bundle(j);
    restore_bundle(r, use_best ? "best/" : "model/", bundle);
    bundle.set_mode(model::Mode::eval);
    return bundle;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": malformed checkpoint.json: " + e.what());
  }
}

}  // namespace unoranic::train
