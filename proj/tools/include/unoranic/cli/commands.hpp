#pragma once

#include <filesystem>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace unoranic::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 2,
  kExitTrainingFailure = 3,
  kExitArtifactMismatch = 4,
};

struct SynthArgs {
  std::filesystem::path spec;
  std::filesystem::path out;
};

struct TrainArgs {
  std::filesystem::path config;
  std::optional<std::filesystem::path> data;
  std::optional<std::filesystem::path> out;
  std::optional<std::string> model;
  // Continue from <out>/checkpoint.zip when it exists.
  bool resume = false;
  bool quiet = false;
};

struct EvalArgs {
  std::vector<std::filesystem::path> checkpoints;
  std::filesystem::path data;
  std::string experiment;
  std::filesystem::path out;
  std::optional<std::filesystem::path> config;
  bool quiet = false;
};

struct CorruptArgs {
  std::optional<std::filesystem::path> data;
  std::string corruption;
  int severity = 3;
  std::uint64_t seed = 0;
  std::optional<std::filesystem::path> out;
  // Print the catalog with per-severity strengths instead of corrupting.
  bool list = false;
};

// Output file names inside a train run directory.
inline constexpr const char* kCheckpointFile = "checkpoint.zip";
inline constexpr const char* kBestModelFile = "best.zip";
inline constexpr const char* kLogFile = "train_log.jsonl";
inline constexpr const char* kResolvedConfigFile = "config.json";

// Each returns an ExitCode; errors are reported on `err`.
int cmd_synth(const SynthArgs& args, std::ostream& out, std::ostream& err);
int cmd_train(const TrainArgs& args, std::ostream& out, std::ostream& err);
// Applies one corruption to every image of every split of a container.
int cmd_corrupt(const CorruptArgs& args, std::ostream& out, std::ostream& err);
int cmd_eval(const EvalArgs& args, std::ostream& out, std::ostream& err);

// Full command line (argv[0] first).
int run(const std::vector<std::string>& argv, std::ostream& out, std::ostream& err);

}  // namespace unoranic::cli
