#include "unoranic/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "unoranic/errors.hpp"
#include "unoranic/zip_archive.hpp"

namespace unoranic::config {
namespace {

// Reads fields of one JSON object and remembers which keys were used.
class Fields {
 public:
  Fields(const Json& j, std::string context) : j_(j), context_(std::move(context)) {
    if (!j.is_object()) throw ConfigError(context_ + ": expected a JSON object");
  }

  template <class T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      if constexpr (std::is_unsigned_v<T> && !std::is_same_v<T, bool>) {
        if (!it->is_number_unsigned()) throw ConfigError("expected a non-negative integer");
      } else if constexpr (std::is_integral_v<T> && !std::is_same_v<T, bool>) {
        if (!it->is_number_integer()) throw ConfigError("expected an integer");
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!it->is_number()) throw ConfigError("expected a number");
      }
      out = it->template get<T>();
    } catch (const std::exception& e) {
      throw ConfigError(context_ + "." + key + ": " + e.what());
    }
  }

  const Json* sub(const char* key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  void finish() const {
    for (const auto& item : j_.items())
      if (!seen_.count(item.key())) throw ConfigError(context_ + ": unknown key '" + item.key() + "'");
  }

 private:
  const Json& j_;
  std::string context_;
  std::set<std::string> seen_;
};

template <class Enum, class Parse>
void get_enum(Fields& f, const char* key, Enum& out, Parse parse) {
  std::string name;
  bool present = false;
  if (const Json* v = f.sub(key)) {
    if (!v->is_string()) throw ConfigError(std::string(key) + ": expected a string");
    name = v->get<std::string>();
    present = true;
  }
  if (present) out = parse(name);
}

}  // namespace

Json to_json(const model::ArchConfig& arch) {
  return Json{{"input_channels", arch.input_channels}, {"input_side", arch.input_side},
              {"block_count", arch.block_count},       {"base_channels", arch.base_channels},
              {"latent_dim", arch.latent_dim},         {"leaky_slope", arch.leaky_slope}};
}

Json to_json(const augment::AugmentationPolicy& policy) {
  Json kinds = Json::array();
  for (auto k : policy.kinds) kinds.push_back(std::string(augment::to_string(k)));
  return Json{{"kinds", kinds},
              {"severity_weights", policy.severity_weights},
              {"identity_probability", policy.identity_probability}};
}

Json to_json(const train::TrainConfig& c) {
  return Json{{"model_kind", std::string(model::to_string(c.model_kind))},
              {"arch", to_json(c.arch)},
              {"batch_size", c.batch_size},
              {"max_epochs", c.max_epochs},
              {"patience", c.patience},
              {"max_steps", c.max_steps},
              {"lr_base", c.lr_base},
              {"lr_max", c.lr_max},
              {"lr_cycle_steps", c.lr_cycle_steps},
              {"adam_beta1", c.adam_beta1},
              {"adam_beta2", c.adam_beta2},
              {"adam_epsilon", c.adam_epsilon},
              {"weights", {{"reconstruction", c.weights.reconstruction},
                           {"consistency", c.weights.consistency}}},
              {"variant_count", c.variant_count},
              {"policy", to_json(c.policy)},
              {"recon_norm", std::string(loss::to_string(c.recon_norm))},
              {"lri_input", std::string(train::to_string(c.lri_input))},
              {"consistency_in_graph", c.consistency_in_graph},
              {"seed", c.seed}};
}

Json to_json(const data::SyntheticSpec& s) {
  return Json{{"name", s.name},
              {"train_count", s.train_count},
              {"val_count", s.val_count},
              {"test_count", s.test_count},
              {"image_side", s.image_side},
              {"channels", s.channels},
              {"class_count", s.class_count},
              {"foreground_min", s.foreground_min},
              {"foreground_max", s.foreground_max},
              {"background_min", s.background_min},
              {"background_max", s.background_max},
              {"seed", s.seed}};
}

model::ArchConfig arch_from_json(const Json& j, model::ArchConfig a) {
  Fields f(j, "arch");
  f.get("input_channels", a.input_channels);
  f.get("input_side", a.input_side);
  f.get("block_count", a.block_count);
  f.get("base_channels", a.base_channels);
  f.get("latent_dim", a.latent_dim);
  f.get("leaky_slope", a.leaky_slope);
  f.finish();
  a.validate();
  return a;
}

augment::AugmentationPolicy policy_from_json(const Json& j, augment::AugmentationPolicy p) {
  Fields f(j, "policy");
  if (const Json* kinds = f.sub("kinds")) {
    if (!kinds->is_array()) throw ConfigError("policy.kinds: expected an array");
    p.kinds.clear();
    for (const auto& k : *kinds) {
      if (!k.is_string()) throw ConfigError("policy.kinds: expected strings");
      p.kinds.push_back(augment::parse_kind(k.get<std::string>()));
    }
  }
  if (const Json* w = f.sub("severity_weights")) {
    if (!w->is_array() || w->size() != 5) throw ConfigError("policy.severity_weights: expected 5 numbers");
    for (std::size_t i = 0; i < 5; ++i) {
      if (!(*w)[i].is_number()) throw ConfigError("policy.severity_weights: expected numbers");
      p.severity_weights[i] = (*w)[i].get<double>();
    }
  }
  f.get("identity_probability", p.identity_probability);
  f.finish();
  p.validate();
  return p;
}

train::TrainConfig train_config_from_json(const Json& j, train::TrainConfig c) {
  Fields f(j, "train");
  get_enum(f, "model_kind", c.model_kind, model::parse_model_kind);
  if (const Json* a = f.sub("arch")) c.arch = arch_from_json(*a, c.arch);
  f.get("batch_size", c.batch_size);
  f.get("max_epochs", c.max_epochs);
  f.get("patience", c.patience);
  f.get("max_steps", c.max_steps);
  f.get("lr_base", c.lr_base);
  f.get("lr_max", c.lr_max);
  f.get("lr_cycle_steps", c.lr_cycle_steps);
  f.get("adam_beta1", c.adam_beta1);
  f.get("adam_beta2", c.adam_beta2);
  f.get("adam_epsilon", c.adam_epsilon);
  if (const Json* w = f.sub("weights")) {
    Fields fw(*w, "train.weights");
    fw.get("reconstruction", c.weights.reconstruction);
    fw.get("consistency", c.weights.consistency);
    fw.finish();
  }
  f.get("variant_count", c.variant_count);
  if (const Json* p = f.sub("policy")) c.policy = policy_from_json(*p, c.policy);
  get_enum(f, "recon_norm", c.recon_norm, loss::parse_recon_norm);
  get_enum(f, "lri_input", c.lri_input, train::parse_lri_input);
  f.get("consistency_in_graph", c.consistency_in_graph);
  f.get("seed", c.seed);
  f.finish();
  c.validate();
  return c;
}

data::SyntheticSpec synthetic_spec_from_json(const Json& j, data::SyntheticSpec s) {
  Fields f(j, "synthetic");
  f.get("name", s.name);
  f.get("train_count", s.train_count);
  f.get("val_count", s.val_count);
  f.get("test_count", s.test_count);
  f.get("image_side", s.image_side);
  f.get("channels", s.channels);
  f.get("class_count", s.class_count);
  f.get("foreground_min", s.foreground_min);
  f.get("foreground_max", s.foreground_max);
  f.get("background_min", s.background_min);
  f.get("background_max", s.background_max);
  f.get("seed", s.seed);
  f.finish();
  s.validate();
  return s;
}

Json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

void write_json_file(const std::filesystem::path& path, const Json& j) {
  const auto text = j.dump(2) + "\n";
  zip::write_file_atomic(path, std::as_bytes(std::span(text.data(), text.size())));
}

}  // namespace unoranic::config
