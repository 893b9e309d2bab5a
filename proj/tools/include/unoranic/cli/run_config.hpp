#pragma once

#include <optional>
#include <string>
#include <vector>

#include "unoranic/config.hpp"
#include "unoranic/probe.hpp"
#include "unoranic/train.hpp"

namespace unoranic::cli {

struct EvalSettings {
  int revision_severity = 3;
  std::vector<augment::CorruptionKind> revision_kinds{augment::training_kinds().begin(),
                                                      augment::training_kinds().end()};
  std::vector<augment::CorruptionKind> robustness_kinds{augment::evaluation_kinds().begin(),
                                                        augment::evaluation_kinds().end()};
  eval::ProbeConfig probe;
  std::uint64_t seed = 0;
};

// Run configuration file. `train` mirrors TrainConfig; `data` and `out` are
// defaults for the matching command-line flags.
struct RunConfig {
  train::TrainConfig train;
  // Input shape keys the file did not set explicitly; they follow the dataset.
  bool arch_shape_from_data = true;
  std::optional<std::string> data;
  std::optional<data::SyntheticSpec> synthetic;
  std::optional<std::string> out;
  std::vector<std::string> experiments;
  EvalSettings eval;
};

RunConfig run_config_from_json(const config::Json& j);
// Every default materialized.
config::Json to_json(const RunConfig& config);
config::Json to_json(const EvalSettings& settings);

}  // namespace unoranic::cli
