#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "pfair/dataset.hpp"
#include "pfair/graph.hpp"
#include "pfair/local_models.hpp"

namespace pfair {

// Per-edge reference points. The value on (W, V) is a raw value tuple in W's
// domain (one entry per column of W).
class ReferencePointMap {
 public:
  void set(const Edge& edge, std::vector<double> value) { values_[edge] = std::move(value); }
  void set(const Edge& edge, double value) { values_[edge] = {value}; }
  void erase(const Edge& edge) { values_.erase(edge); }
  bool contains(const Edge& edge) const { return values_.contains(edge); }
  const std::vector<double>* find(const Edge& edge) const;
  // Throws unknown-edge.
  const std::vector<double>& at(const Edge& edge) const;
  bool empty() const noexcept { return values_.empty(); }
  std::size_t size() const noexcept { return values_.size(); }
  const std::map<Edge, std::vector<double>>& entries() const noexcept { return values_; }
  bool operator==(const ReferencePointMap&) const = default;

 private:
  std::map<Edge, std::vector<double>> values_;
};

// Replacement mechanism for one node: encoded parent inputs in, encoded target
// values out (same layout as LocalModule::predict_encoded).
struct Replacement {
  std::size_t input_width = 0;
  std::size_t output_width = 0;
  std::function<void(std::span<const double>, std::span<double>)> fn;

  static Replacement from_module(LocalModule module);
};

using ModuleOverride = std::map<std::string, Replacement>;

enum class Propagation {
  hard,      // discrete nodes pass their most probable level downstream
  expected,  // discrete nodes pass their predicted probabilities downstream
};

enum class InputSource { reference_point, downstream_of_reference, observed };

std::string_view to_string(InputSource source);

struct PropagationState {
  std::vector<std::string> nodes;              // graph declaration order
  std::vector<std::vector<double>> values;     // raw instantiated value per node
  std::vector<std::vector<double>> encoded;    // what each node feeds downstream
  std::vector<bool> affected;
  std::map<Edge, InputSource> sources;         // every edge into a computed module
  std::vector<double> outcome_output;          // encoded module output for the outcome
  double outcome = 0.0;                        // score: value or favorable-level probability

  const std::vector<double>& value(const std::string& node) const;
  bool is_affected(const std::string& node) const;
};

// Observed raw and encoded values for every graph node present in a dataset.
class ObservedTable {
 public:
  ObservedTable(const Dataset& dataset, const CausalGraph& graph);

  std::size_t rows() const noexcept { return rows_; }
  bool has(std::size_t node) const { return !raw_width_.empty() && present_[node]; }
  std::span<const double> raw(std::size_t node, std::size_t row) const;
  std::span<const double> encoded(std::size_t node, std::size_t row) const;

 private:
  std::size_t rows_ = 0;
  std::vector<std::string> names_;
  std::vector<bool> present_;
  std::vector<std::size_t> raw_width_, enc_width_;
  std::vector<std::vector<double>> raw_, enc_;
};

struct DecouplingOptions {
  // Outcome node; defaults to the dataset's target.
  std::string outcome;
  Propagation propagation = Propagation::hard;
  // Favorable level of a discrete outcome; see LocalModule::score.
  std::optional<std::size_t> favorable_level;
};

struct PredictionSummary {
  std::vector<double> scores;
  std::vector<std::size_t> affected_counts;  // affected nodes per row
};

// Binds a graph and a fitted bundle. Checks the fingerprint, the outcome
// module and the parent order of every module once.
class Decoupler {
 public:
  Decoupler(const CausalGraph& graph, const ModelBundle& bundle, DecouplingOptions options);

  const CausalGraph& graph() const noexcept { return *graph_; }
  const ModelBundle& bundle() const noexcept { return *bundle_; }
  const DecouplingOptions& options() const noexcept { return options_; }
  std::size_t outcome_index() const noexcept { return outcome_; }

  // Tail domain of an edge into a modelled node.
  const VariableSpec& tail_spec(const Edge& edge) const;

  // Throws unknown-edge for a key that is not an objectionable edge and
  // kind-mismatch for a value outside the tail's domain.
  void validate(const ReferencePointMap& refmap) const;
  // Throws arity-mismatch or unknown-node.
  void validate(const ModuleOverride& overrides) const;

  PropagationState instantiate(const ObservedTable& table, std::size_t row, const ReferencePointMap& refmap,
                               const ModuleOverride& overrides = {}) const;

  // Scores for the given rows (all rows when rows is empty), in order.
  PredictionSummary predict(const ObservedTable& table, const ReferencePointMap& refmap,
                            const ModuleOverride& overrides = {}, std::span<const std::size_t> rows = {}) const;

 private:
  const CausalGraph* graph_;
  const ModelBundle* bundle_;
  DecouplingOptions options_;
  std::size_t outcome_ = 0;
  std::vector<std::size_t> order_;
  std::vector<const LocalModule*> modules_;  // by node index, null for roots

  std::vector<std::size_t> slot_base_;       // first incoming-edge slot per node

  struct Resolved {
    std::vector<char> keyed;                 // per incoming-edge slot
    std::vector<std::vector<double>> encoded;
    std::vector<const Replacement*> replaced;  // per node
  };
  Resolved resolve(const ReferencePointMap& refmap, const ModuleOverride& overrides) const;
  double run(const ObservedTable& table, std::size_t row, const Resolved& resolved, PropagationState* state,
             std::size_t* affected_count) const;
};

PropagationState instantiate_row(const CausalGraph& graph, const ModelBundle& bundle, const ReferencePointMap& refmap,
                                 const ModuleOverride& overrides, const Dataset& dataset, std::size_t row,
                                 const DecouplingOptions& options = {});

PredictionSummary predict_all(const CausalGraph& graph, const ModelBundle& bundle, const ReferencePointMap& refmap,
                              const ModuleOverride& overrides, const Dataset& dataset,
                              const DecouplingOptions& options = {});

// Heads of keyed edges and everything downstream of them.
std::set<std::string> edge_reach(const CausalGraph& graph, const ReferencePointMap& refmap);

// [{tail, head, value}] with discrete values written as level labels.
nlohmann::json refmap_to_json(const ReferencePointMap& refmap, const Decoupler& decoupler);
ReferencePointMap refmap_from_json(const nlohmann::json& j, const Decoupler& decoupler);

}  // namespace pfair
