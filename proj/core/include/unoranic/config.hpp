#pragma once

#include <nlohmann/json.hpp>

#include <filesystem>

#include "unoranic/augment.hpp"
#include "unoranic/dataio.hpp"
#include "unoranic/model.hpp"
#include "unoranic/train.hpp"

// JSON round-trips for configuration structs. Readers start from the
// defaults, overwrite only the keys present and reject unknown keys and
// wrongly typed values with ConfigError.
namespace unoranic::config {

using Json = nlohmann::ordered_json;

Json to_json(const model::ArchConfig& arch);
Json to_json(const augment::AugmentationPolicy& policy);
Json to_json(const train::TrainConfig& config);
Json to_json(const data::SyntheticSpec& spec);

model::ArchConfig arch_from_json(const Json& j, model::ArchConfig base = {});
augment::AugmentationPolicy policy_from_json(const Json& j,
                                             augment::AugmentationPolicy base = augment::AugmentationPolicy::training_default());
train::TrainConfig train_config_from_json(const Json& j, train::TrainConfig base = {});
data::SyntheticSpec synthetic_spec_from_json(const Json& j, data::SyntheticSpec base = {});

// Parses a file; syntax errors become ConfigError with the path in the message.
Json read_json_file(const std::filesystem::path& path);
// Pretty-printed, newline-terminated, written atomically.
void write_json_file(const std::filesystem::path& path, const Json& j);

}  // namespace unoranic::config
