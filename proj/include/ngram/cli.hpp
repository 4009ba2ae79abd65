#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "ngram/model.hpp"
#include "ngram/tasks.hpp"

namespace ngram {

enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,
  kExitUsage = 2,
  kExitData = 3,
  kExitDivergence = 4,
};

enum class TaskKind { Classify, Regress, LM };

std::string to_string(TaskKind task);
TaskKind parse_task(const std::string& name);

// Everything `train` needs, merged from the config file and flags.
struct RunConfig {
  ModelSpec model;
  TaskKind task = TaskKind::Classify;
  TrainConfig train;
  std::size_t classes = 2;
  std::size_t min_freq = 1;
  std::filesystem::path train_path;
  std::filesystem::path valid_path;
  std::filesystem::path test_path;
  std::filesystem::path out = "run";

  // Rejects family/task pairs the model cannot serve, naming both fields.
  void validate() const;
};

// key=value lines; '#' starts a comment. Dashes in keys become underscores.
std::map<std::string, std::string> read_config_file(const std::filesystem::path& path);

// Builds a RunConfig from merged key/value settings. Unknown keys and
// unparsable values raise ConfigError naming the key.
RunConfig make_run_config(const std::map<std::string, std::string>& kv);

// Entry point shared by the binary and the tests. Returns an ExitCode.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run_cli(int argc, char** argv);

}  // namespace ngram
