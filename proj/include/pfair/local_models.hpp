#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pfair/dataset.hpp"
#include "pfair/graph.hpp"
#include "pfair/linalg.hpp"
#include "pfair/network.hpp"
#include "pfair/schema.hpp"

namespace pfair {

enum class HypothesisKind { linear, logistic, mlp };

std::string_view to_string(HypothesisKind kind);
HypothesisKind hypothesis_kind_from_string(std::string_view text);

struct TrainingConfig {
  std::size_t epochs = 100;
  std::size_t batch_size = 256;
  double learning_rate = 1e-3;
  std::uint64_t seed = 0;
};

struct HypothesisSpec {
  HypothesisKind kind = HypothesisKind::linear;
  std::size_t hidden_layers = 2;  // mlp only
  TrainingConfig training;
  SingularPolicy singular = SingularPolicy::min_norm;  // linear only

  // max(5, number of parents).
  static std::size_t hidden_width(std::size_t in_degree) { return in_degree < 5 ? 5 : in_degree; }

  // Throws kind-mismatch when the hypothesis cannot model the target (linear
  // needs continuous columns, logistic needs discrete ones).
  void check_target(const VariableSpec& target) const;
};

// Fitted mechanism h_V(parents; theta_V). Immutable once built.
//
// Inputs are the parents' raw values concatenated in parent order (one value
// per column), or their encoded form. Outputs are in encoded target space:
// the value for continuous columns, P(level 1) for binary ones and a
// probability per level for categorical ones.
class LocalModule {
 public:
  LocalModule() = default;

  // Linear mechanism; coefficients is target-columns x (encoded inputs + 1),
  // intercept last.
  static LocalModule linear(std::string target, VariableSpec target_spec, std::vector<std::string> parents,
                            std::vector<VariableSpec> parent_specs, std::vector<std::vector<double>> coefficients);

  // Network mechanism. input_shift/input_scale standardize encoded inputs;
  // target_shift/target_scale undo the standardization of continuous target
  // columns (one entry per target column; ignored for discrete columns).
  static LocalModule network(std::string target, VariableSpec target_spec, std::vector<std::string> parents,
                             std::vector<VariableSpec> parent_specs, HypothesisKind kind, Network net,
                             std::vector<double> input_shift, std::vector<double> input_scale,
                             std::vector<double> target_shift, std::vector<double> target_scale);

  const std::string& target() const noexcept { return target_; }
  const VariableSpec& target_spec() const noexcept { return target_spec_; }
  const std::vector<std::string>& parents() const noexcept { return parents_; }
  const std::vector<VariableSpec>& parent_specs() const noexcept { return parent_specs_; }
  HypothesisKind kind() const noexcept { return kind_; }
  std::size_t raw_input_width() const noexcept { return raw_width_; }
  std::size_t encoded_input_width() const noexcept { return encoded_width_; }
  std::size_t output_width() const noexcept { return target_spec_.encoded_width(); }

  // Linear only; throws unknown-node for an unknown name. Names are encoded
  // input names ("C", "marital=married") or "intercept".
  double coefficient(const std::string& name, std::size_t target_column = 0) const;
  const std::vector<std::vector<double>>& coefficients() const noexcept { return coefficients_; }
  const Network& net() const noexcept { return net_; }
  const std::vector<double>& input_shift() const noexcept { return input_shift_; }
  const std::vector<double>& input_scale() const noexcept { return input_scale_; }
  const std::vector<double>& target_shift() const noexcept { return target_shift_; }
  const std::vector<double>& target_scale() const noexcept { return target_scale_; }

  // Throws arity-mismatch or kind-mismatch.
  std::vector<double> encode_inputs(std::span<const double> raw) const;
  void predict_encoded(std::span<const double> encoded, std::span<double> out) const;
  std::vector<double> predict_encoded(std::span<const double> encoded) const;
  std::vector<double> predict(std::span<const double> raw) const;

  // Scalar score of target column 0: the value for continuous targets, the
  // probability of `positive_level` for discrete ones (default level 1 for
  // binary, last level for categorical).
  double score(std::span<const double> raw, std::optional<std::size_t> positive_level = std::nullopt) const;

  std::size_t parameter_count() const noexcept;
  std::size_t mac_count() const noexcept;
  std::uint64_t parameter_fingerprint() const;

  // Training metadata.
  double training_loss = 0.0;
  double initial_loss = 0.0;
  std::vector<double> loss_trace;
  bool rank_deficient = false;
  std::uint64_t seed = 0;

 private:
  std::string target_;
  VariableSpec target_spec_;
  std::vector<std::string> parents_;
  std::vector<VariableSpec> parent_specs_;
  HypothesisKind kind_ = HypothesisKind::linear;
  std::size_t raw_width_ = 0;
  std::size_t encoded_width_ = 0;
  std::vector<std::string> input_names_;

  std::vector<std::vector<double>> coefficients_;
  Network net_;
  std::vector<double> input_shift_, input_scale_, target_shift_, target_scale_;

  void init_shape();
};

// Converts encoded target outputs back to raw values: argmax level for
// discrete columns, identity for continuous ones.
std::vector<double> hard_values(const VariableSpec& spec, std::span<const double> encoded);

// Seed actually used for a module: the configured seed mixed with the node
// name, so a module's initialization does not depend on fitting order.
std::uint64_t module_seed(std::uint64_t seed, const std::string& node);

LocalModule fit_local(const Dataset& dataset, const std::string& target, const std::vector<std::string>& parents,
                      const HypothesisSpec& hypothesis);

double predict_local(const LocalModule& module, std::span<const double> raw_inputs);

class ModelBundle {
 public:
  ModelBundle() = default;
  ModelBundle(std::uint64_t graph_fingerprint, std::map<std::string, LocalModule> modules);

  std::uint64_t graph_fingerprint() const noexcept { return graph_fingerprint_; }
  const std::map<std::string, LocalModule>& modules() const noexcept { return modules_; }
  bool has_module(const std::string& node) const { return modules_.contains(node); }
  // Throws unknown-node.
  const LocalModule& module(const std::string& node) const;
  std::size_t size() const noexcept { return modules_.size(); }
  bool empty() const noexcept { return modules_.empty(); }

  // Throws fingerprint-mismatch when the bundle was fitted on another graph.
  void check_graph(const CausalGraph& graph) const;

  std::uint64_t parameter_fingerprint() const;

 private:
  std::uint64_t graph_fingerprint_ = 0;
  std::map<std::string, LocalModule> modules_;
};

// One module per non-root node, fitted independently. Errors are rethrown
// tagged with the node. A graph without edges yields an empty bundle and a
// warning.
ModelBundle fit_all(const CausalGraph& graph, const Dataset& dataset,
                    const std::map<std::string, HypothesisSpec>& hypotheses,
                    std::vector<std::string>* warnings = nullptr);

std::size_t param_count(const ModelBundle& bundle);
std::size_t mac_count(const ModelBundle& bundle);

// All-mlp bundle over a graph whose nodes are single continuous columns,
// randomly initialized and never trained. Used for scale benchmarks.
ModelBundle random_mlp_bundle(const CausalGraph& graph, std::uint64_t seed);
Schema continuous_schema(const CausalGraph& graph);

}  // namespace pfair
