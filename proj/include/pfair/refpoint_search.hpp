#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "pfair/dataset.hpp"
#include "pfair/decoupling.hpp"

namespace pfair {

struct ColumnCondition {
  enum class Op { equals, in_set, range };
  std::string column;
  Op op = Op::equals;
  std::vector<std::string> levels;  // equals: one label; in_set: several
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
};

// Conjunction of column conditions selecting the least advantaged rows.
class LeastAdvantagedPredicate {
 public:
  LeastAdvantagedPredicate() = default;
  explicit LeastAdvantagedPredicate(std::vector<ColumnCondition> conditions) : conditions_(std::move(conditions)) {}

  const std::vector<ColumnCondition>& conditions() const noexcept { return conditions_; }
  // Throws missing-column or unknown-categorical-level.
  void validate(const Schema& schema) const;
  std::vector<std::size_t> select(const Dataset& dataset) const;

  static LeastAdvantagedPredicate equals(std::string column, std::string level);

 private:
  std::vector<ColumnCondition> conditions_;
};

// {"all": [{"column": c, "equals": l} | {"column": c, "in": [..]} |
//          {"column": c, "min": x, "max": y}]} or a single condition object.
LeastAdvantagedPredicate predicate_from_json(const nlohmann::json& j);
nlohmann::json predicate_to_json(const LeastAdvantagedPredicate& predicate);

struct AnnealingConfig {
  double initial_temperature = 1.0;
  double cooling = 0.995;
  std::size_t iterations = 5000;
  double proposal_scale = 1.0;  // continuous step, in tail standard deviations
  std::size_t restarts = 3;
  std::uint64_t seed = 0;

  // Throws invalid-argument.
  void validate() const;
};

struct TraceEntry {
  std::size_t restart = 0;
  std::size_t iteration = 0;
  double temperature = 0.0;
  ReferencePointMap candidate;
  double objective = 0.0;
  bool accepted = false;
  double best = 0.0;  // running maximum within the restart
};

struct SearchTrace {
  std::vector<TraceEntry> entries;
};

// Mean outcome score over the rows a predicate selects. Evaluations are
// memoized per candidate.
class SubgroupObjective {
 public:
  SubgroupObjective(const Decoupler& decoupler, const Dataset& dataset, const LeastAdvantagedPredicate& predicate);

  double operator()(const ReferencePointMap& refmap);
  const std::vector<std::size_t>& rows() const noexcept { return rows_; }
  const ObservedTable& table() const noexcept { return table_; }
  const Decoupler& decoupler() const noexcept { return *decoupler_; }
  const Dataset& dataset() const noexcept { return *dataset_; }
  std::size_t evaluations() const noexcept { return evaluations_; }

 private:
  const Decoupler* decoupler_;
  const Dataset* dataset_;
  ObservedTable table_;
  std::vector<std::size_t> rows_;
  std::map<std::vector<std::pair<Edge, std::vector<double>>>, double> memo_;
  std::size_t evaluations_ = 0;
};

// Throws empty-subpopulation.
double objective(const ReferencePointMap& refmap, const CausalGraph& graph, const ModelBundle& bundle,
                 const Dataset& dataset, const LeastAdvantagedPredicate& predicate,
                 const DecouplingOptions& options = {});

// Reference point each edge takes in the identity candidate: the subgroup's
// modal level (discrete) or mean (continuous) of the tail.
ReferencePointMap identity_candidate(const SubgroupObjective& objective, const std::vector<Edge>& edges);

struct SearchResult {
  ReferencePointMap refmap;
  double objective = 0.0;
  double baseline = 0.0;           // empty map
  double identity_objective = 0.0;
  SearchTrace trace;
  std::size_t evaluations = 0;
};

SearchResult optimize(const Decoupler& decoupler, const std::vector<Edge>& edges,
                      const LeastAdvantagedPredicate& predicate, const Dataset& dataset,
                      const AnnealingConfig& config);

struct ExhaustiveResult {
  ReferencePointMap refmap;
  double objective = 0.0;
  std::size_t candidates = 0;
};

inline constexpr std::size_t kExhaustiveCap = 1'000'000;

// Full enumeration of the product of tail domains; first maximum in
// enumeration order wins (last edge varies fastest). Throws space-too-large
// for continuous tails or more than `cap` candidates.
ExhaustiveResult exhaustive_search(const Decoupler& decoupler, const std::vector<Edge>& edges,
                                   const LeastAdvantagedPredicate& predicate, const Dataset& dataset,
                                   std::size_t cap = kExhaustiveCap);

void write_trace_csv(const SearchTrace& trace, const std::vector<Edge>& edges, const Decoupler& decoupler,
                     std::ostream& out);

}  // namespace pfair
