#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "pfair/cli/config.hpp"

namespace pfair::cli {

struct CommandOptions {
  std::optional<std::filesystem::path> data;
  std::optional<std::filesystem::path> bundle;
  std::optional<std::filesystem::path> refmap;
  std::optional<std::filesystem::path> output_dir;
  bool oracle = false;
};

struct RunResult {
  std::filesystem::path manifest;
  std::vector<std::filesystem::path> outputs;
  std::vector<std::string> warnings;
};

// Output directory precedence: flag, PFAIR_OUT_DIR, config.
std::filesystem::path resolve_output_dir(const ExperimentConfig& config, const CommandOptions& options);

RunResult cmd_simulate(const ExperimentConfig& config, const CommandOptions& options);
RunResult cmd_ingest(const ExperimentConfig& config, const CommandOptions& options);
RunResult cmd_fit(const ExperimentConfig& config, const CommandOptions& options);
RunResult cmd_decouple(const ExperimentConfig& config, const CommandOptions& options);
RunResult cmd_audit(const ExperimentConfig& config, const CommandOptions& options);
RunResult cmd_predict(const ExperimentConfig& config, const CommandOptions& options);
RunResult cmd_bench_scale(const ExperimentConfig& config, const CommandOptions& options);

}  // namespace pfair::cli
