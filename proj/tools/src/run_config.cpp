#include "unoranic/cli/run_config.hpp"

#include <set>

#include "unoranic/errors.hpp"

namespace unoranic::cli {
namespace {

using config::Json;

std::vector<augment::CorruptionKind> kinds_from(const Json& j, const char* key) {
  if (!j.is_array()) throw ConfigError(std::string("eval.") + key + ": expected an array of names");
  std::vector<augment::CorruptionKind> out;
  for (const auto& k : j) {
    if (!k.is_string()) throw ConfigError(std::string("eval.") + key + ": expected strings");
    out.push_back(augment::parse_kind(k.get<std::string>()));
  }
  return out;
}

Json kinds_json(const std::vector<augment::CorruptionKind>& kinds) {
  Json out = Json::array();
  for (auto k : kinds) out.push_back(std::string(augment::to_string(k)));
  return out;
}

void check_keys(const Json& j, std::initializer_list<const char*> allowed, const std::string& context) {
  if (!j.is_object()) throw ConfigError(context + ": expected a JSON object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& item : j.items())
    if (!ok.count(item.key())) throw ConfigError(context + ": unknown key '" + item.key() + "'");
}

template <class T>
T typed(const Json& j, const std::string& context) {
  try {
    return j.get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(context + ": wrong type");
  }
}

EvalSettings eval_from_json(const Json& j) {
  check_keys(j, {"revision_severity", "revision_kinds", "robustness_kinds", "probe", "seed"}, "eval");
  EvalSettings e;
  if (j.contains("revision_severity")) e.revision_severity = typed<int>(j["revision_severity"], "eval.revision_severity");
  if (e.revision_severity < 1 || e.revision_severity > 5) throw ConfigError("eval.revision_severity must be in 1..5");
  if (j.contains("revision_kinds")) e.revision_kinds = kinds_from(j["revision_kinds"], "revision_kinds");
  if (j.contains("robustness_kinds")) e.robustness_kinds = kinds_from(j["robustness_kinds"], "robustness_kinds");
  if (j.contains("seed")) e.seed = typed<std::uint64_t>(j["seed"], "eval.seed");
  if (j.contains("probe")) {
    const auto& p = j["probe"];
    check_keys(p, {"epochs", "lr", "batch_size", "seed", "standardize"}, "eval.probe");
    if (p.contains("epochs")) e.probe.epochs = typed<int>(p["epochs"], "eval.probe.epochs");
    if (p.contains("lr")) e.probe.lr = typed<double>(p["lr"], "eval.probe.lr");
    if (p.contains("batch_size")) e.probe.batch_size = typed<std::size_t>(p["batch_size"], "eval.probe.batch_size");
    if (p.contains("seed")) e.probe.seed = typed<std::uint64_t>(p["seed"], "eval.probe.seed");
    if (p.contains("standardize")) e.probe.standardize = typed<bool>(p["standardize"], "eval.probe.standardize");
    e.probe.validate();
  }
  return e;
}

}  // namespace

RunConfig run_config_from_json(const Json& j) {
  check_keys(j, {"train", "data", "synthetic", "out", "experiments", "eval"}, "config");
  RunConfig c;
  if (j.contains("train")) {
    const auto& t = j["train"];
    c.train = config::train_config_from_json(t);
    if (t.contains("arch") && t["arch"].is_object())
      c.arch_shape_from_data = !t["arch"].contains("input_side") && !t["arch"].contains("input_channels");
  }
  if (j.contains("data")) c.data = typed<std::string>(j["data"], "data");
  if (j.contains("synthetic")) c.synthetic = config::synthetic_spec_from_json(j["synthetic"]);
  if (j.contains("out")) c.out = typed<std::string>(j["out"], "out");
  if (j.contains("experiments")) {
    c.experiments = typed<std::vector<std::string>>(j["experiments"], "experiments");
    for (const auto& e : c.experiments)
      if (e != "recon" && e != "revise" && e != "probe" && e != "robust")
        throw ConfigError("experiments: unknown experiment '" + e + "'");
  }
  if (j.contains("eval")) c.eval = eval_from_json(j["eval"]);
  return c;
}

Json to_json(const EvalSettings& e) {
  return Json{{"revision_severity", e.revision_severity},
              {"revision_kinds", kinds_json(e.revision_kinds)},
              {"robustness_kinds", kinds_json(e.robustness_kinds)},
              {"probe", {{"epochs", e.probe.epochs},
                         {"lr", e.probe.lr},
                         {"batch_size", e.probe.batch_size},
                         {"seed", e.probe.seed},
                         {"standardize", e.probe.standardize}}},
              {"seed", e.seed}};
}

Json to_json(const RunConfig& c) {
  Json j;
  j["train"] = config::to_json(c.train);
  j["data"] = c.data ? Json(*c.data) : Json();
  j["synthetic"] = c.synthetic ? config::to_json(*c.synthetic) : Json();
  j["out"] = c.out ? Json(*c.out) : Json();
  j["experiments"] = c.experiments;
  j["eval"] = to_json(c.eval);
  return j;
}

}  // namespace unoranic::cli
