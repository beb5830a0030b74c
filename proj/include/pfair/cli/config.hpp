#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "pfair/csv.hpp"
#include "pfair/decoupling.hpp"
#include "pfair/graph.hpp"
#include "pfair/local_models.hpp"
#include "pfair/refpoint_search.hpp"
#include "pfair/schema.hpp"
#include "pfair/simulate.hpp"

namespace pfair::cli {

struct DataSource {
  std::filesystem::path path;
  CsvOptions csv;
  std::optional<double> train_fraction;  // evaluate on the held-out part when set
};

struct SimulationConfig {
  std::size_t n = 0;
  LinearScmParams params;
};

struct AuditConfig {
  std::vector<std::uint64_t> kilbertus_seeds = {1, 2};
  std::size_t monte_carlo_samples = 256;
  std::string group_column = "A";
};

struct ReportConfig {
  std::string group_column;    // approval rates per level of this column
  std::string stratum_column;  // optional ground-truth strata, e.g. income
  double threshold = 0.5;
};

struct BenchConfig {
  std::size_t nodes = 1024;
  std::size_t degree = 102;
  std::size_t rows = 1000;
};

struct ExperimentConfig {
  nlohmann::json source;  // as parsed, for hashing and the manifest
  std::filesystem::path base_dir;

  std::uint64_t seed = 0;
  std::filesystem::path output_dir = "out";

  std::optional<CausalGraph> graph;
  std::optional<Schema> schema;
  std::string outcome;
  std::optional<std::string> favorable_level;
  Propagation propagation = Propagation::hard;
  std::map<std::string, HypothesisSpec> hypotheses;
  std::optional<DataSource> data;
  std::optional<SimulationConfig> simulation;
  std::optional<LeastAdvantagedPredicate> least_advantaged;
  AnnealingConfig annealing;
  bool oracle = false;
  std::vector<double> thresholds;
  AuditConfig audit;
  ReportConfig report;
  BenchConfig bench;

  DecouplingOptions decoupling_options() const;
  std::vector<Edge> objectionable() const;
};

// Parses and cross-validates a config. Relative paths resolve against the
// config file's directory. Throws config-error naming the offending field.
ExperimentConfig parse_config(const nlohmann::json& j, const std::filesystem::path& base_dir = ".");
ExperimentConfig load_config(const std::filesystem::path& path);

// Hash of the canonical form; insensitive to whitespace and key order and to
// where the outputs go.
std::uint64_t config_hash(const nlohmann::json& j);

LinearScmParams scm_params_from_json(const nlohmann::json& j);
nlohmann::json scm_params_to_json(const LinearScmParams& p);

}  // namespace pfair::cli
