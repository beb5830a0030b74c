#include "pfair/refpoint_search.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <random>

#include "pfair/error.hpp"
#include "pfair/fingerprint.hpp"

namespace pfair {

using nlohmann::json;

void LeastAdvantagedPredicate::validate(const Schema& schema) const {
  for (const auto& c : conditions_) {
    const ColumnSpec& col = schema.column(c.column);
    if (c.op == ColumnCondition::Op::range) {
      if (!(c.lo <= c.hi)) throw Error(ErrorCode::invalid_argument, "empty range on '" + c.column + "'");
      continue;
    }
    if (c.levels.empty()) throw Error(ErrorCode::invalid_argument, "condition on '" + c.column + "' lists no level");
    for (const auto& l : c.levels) {
      if (col.discrete())
        col.level_value(l);
      else
        col.parse(l);
    }
  }
}

std::vector<std::size_t> LeastAdvantagedPredicate::select(const Dataset& dataset) const {
  const Schema& schema = dataset.schema();
  validate(schema);
  std::vector<char> keep(dataset.rows(), 1);
  for (const auto& c : conditions_) {
    const ColumnSpec& col = schema.column(c.column);
    const auto values = dataset.column(c.column);
    if (c.op == ColumnCondition::Op::range) {
      for (std::size_t r = 0; r < values.size(); ++r) keep[r] &= (values[r] >= c.lo && values[r] <= c.hi) ? 1 : 0;
      continue;
    }
    std::vector<double> wanted;
    for (const auto& l : c.levels) wanted.push_back(col.discrete() ? col.level_value(l) : col.parse(l));
    for (std::size_t r = 0; r < values.size(); ++r)
      keep[r] &= std::find(wanted.begin(), wanted.end(), values[r]) != wanted.end() ? 1 : 0;
  }
  std::vector<std::size_t> rows;
  for (std::size_t r = 0; r < keep.size(); ++r)
    if (keep[r]) rows.push_back(r);
  return rows;
}

LeastAdvantagedPredicate LeastAdvantagedPredicate::equals(std::string column, std::string level) {
  ColumnCondition c;
  c.column = std::move(column);
  c.levels = {std::move(level)};
  return LeastAdvantagedPredicate({c});
}

namespace {

ColumnCondition condition_from_json(const json& j) {
  ColumnCondition c;
  c.column = j.at("column").get<std::string>();
  auto label = [](const json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); };
  if (j.contains("equals")) {
    c.op = ColumnCondition::Op::equals;
    c.levels = {label(j["equals"])};
  } else if (j.contains("in")) {
    c.op = ColumnCondition::Op::in_set;
    for (const auto& v : j["in"]) c.levels.push_back(label(v));
  } else if (j.contains("min") || j.contains("max")) {
    c.op = ColumnCondition::Op::range;
    if (j.contains("min")) c.lo = j["min"].get<double>();
    if (j.contains("max")) c.hi = j["max"].get<double>();
  } else {
    throw Error(ErrorCode::config_error, "condition on '" + c.column + "' needs equals, in or min/max");
  }
  return c;
}

}  // namespace

LeastAdvantagedPredicate predicate_from_json(const json& j) {
  try {
    std::vector<ColumnCondition> conds;
    if (j.contains("all")) {
      for (const auto& c : j["all"]) conds.push_back(condition_from_json(c));
    } else {
      conds.push_back(condition_from_json(j));
    }
    return LeastAdvantagedPredicate(std::move(conds));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::config_error, std::string("bad predicate: ") + e.what());
  }
}

json predicate_to_json(const LeastAdvantagedPredicate& predicate) {
  json all = json::array();
  for (const auto& c : predicate.conditions()) {
    json j{{"column", c.column}};
    switch (c.op) {
      case ColumnCondition::Op::equals: j["equals"] = c.levels.front(); break;
      case ColumnCondition::Op::in_set: j["in"] = c.levels; break;
      case ColumnCondition::Op::range:
        if (std::isfinite(c.lo)) j["min"] = c.lo;
        if (std::isfinite(c.hi)) j["max"] = c.hi;
        break;
    }
    all.push_back(std::move(j));
  }
  return {{"all", all}};
}

void AnnealingConfig::validate() const {
  if (!(initial_temperature > 0.0) || !std::isfinite(initial_temperature))
    throw Error(ErrorCode::invalid_argument, "initial temperature must be positive");
  if (!(cooling > 0.0 && cooling < 1.0)) throw Error(ErrorCode::invalid_argument, "cooling factor must lie in (0,1)");
  if (!(proposal_scale > 0.0)) throw Error(ErrorCode::invalid_argument, "proposal scale must be positive");
  if (restarts == 0) throw Error(ErrorCode::invalid_argument, "at least one restart is required");
}

SubgroupObjective::SubgroupObjective(const Decoupler& decoupler, const Dataset& dataset,
                                     const LeastAdvantagedPredicate& predicate)
    : decoupler_(&decoupler), dataset_(&dataset), table_(dataset, decoupler.graph()), rows_(predicate.select(dataset)) {
  if (rows_.empty()) throw Error(ErrorCode::empty_subpopulation, "the least-advantaged predicate selects no rows");
}

double SubgroupObjective::operator()(const ReferencePointMap& refmap) {
  std::vector<std::pair<Edge, std::vector<double>>> key(refmap.entries().begin(), refmap.entries().end());
  if (const auto it = memo_.find(key); it != memo_.end()) return it->second;
  const auto pred = decoupler_->predict(table_, refmap, {}, rows_);
  double sum = 0.0;
  for (double s : pred.scores) sum += s;
  const double mean = sum / static_cast<double>(rows_.size());
  ++evaluations_;
  memo_.emplace(std::move(key), mean);
  return mean;
}

double objective(const ReferencePointMap& refmap, const CausalGraph& graph, const ModelBundle& bundle,
                 const Dataset& dataset, const LeastAdvantagedPredicate& predicate, const DecouplingOptions& options) {
  DecouplingOptions opts = options;
  if (opts.outcome.empty() && dataset.target_node()) opts.outcome = *dataset.target_node();
  const Decoupler d(graph, bundle, opts);
  SubgroupObjective f(d, dataset, predicate);
  return f(refmap);
}

namespace {

struct ColumnDomain {
  bool discrete = true;
  std::size_t levels = 0;
  double lo = 0.0, hi = 0.0, sd = 0.0;
};

std::vector<std::vector<ColumnDomain>> domains(const Decoupler& d, const Dataset& data, const std::vector<Edge>& edges) {
  std::vector<std::vector<ColumnDomain>> out;
  for (const auto& e : edges) {
    std::vector<ColumnDomain> cols;
    for (const auto& col : d.tail_spec(e).columns) {
      ColumnDomain dom;
      dom.discrete = col.discrete();
      dom.levels = col.level_count();
      if (!dom.discrete) {
        const auto v = data.column(col.name);
        dom.lo = *std::min_element(v.begin(), v.end());
        dom.hi = *std::max_element(v.begin(), v.end());
        double mean = 0.0;
        for (double x : v) mean += x;
        mean /= static_cast<double>(v.size());
        double var = 0.0;
        for (double x : v) var += (x - mean) * (x - mean);
        dom.sd = v.size() > 1 ? std::sqrt(var / static_cast<double>(v.size() - 1)) : 0.0;
      }
      cols.push_back(dom);
    }
    out.push_back(std::move(cols));
  }
  return out;
}

void check_edges(const Decoupler& d, const std::vector<Edge>& edges) {
  for (const auto& e : edges) {
    if (!d.graph().is_objectionable(e)) throw Error(ErrorCode::unknown_edge, to_string(e) + " is not objectionable");
  }
  auto sorted = edges;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
    throw Error(ErrorCode::invalid_argument, "objectionable edge listed twice");
}

}  // namespace

ReferencePointMap identity_candidate(const SubgroupObjective& objective, const std::vector<Edge>& edges) {
  const Dataset& data = objective.dataset();
  const auto& rows = objective.rows();
  ReferencePointMap out;
  for (const auto& e : edges) {
    std::vector<double> value;
    for (const auto& col : objective.decoupler().tail_spec(e).columns) {
      const auto v = data.column(col.name);
      if (col.discrete()) {
        std::vector<std::size_t> counts(col.level_count(), 0);
        for (std::size_t r : rows) ++counts[static_cast<std::size_t>(v[r])];
        value.push_back(static_cast<double>(std::max_element(counts.begin(), counts.end()) - counts.begin()));
      } else {
        double sum = 0.0;
        for (std::size_t r : rows) sum += v[r];
        value.push_back(sum / static_cast<double>(rows.size()));
      }
    }
    out.set(e, std::move(value));
  }
  return out;
}

SearchResult optimize(const Decoupler& decoupler, const std::vector<Edge>& edges,
                      const LeastAdvantagedPredicate& predicate, const Dataset& dataset,
                      const AnnealingConfig& config) {
  config.validate();
  check_edges(decoupler, edges);
  SubgroupObjective f(decoupler, dataset, predicate);
  SearchResult result;
  result.baseline = f(ReferencePointMap{});
  if (edges.empty()) {
    result.objective = result.baseline;
    result.identity_objective = result.baseline;
    result.evaluations = f.evaluations();
    return result;
  }
  const auto dom = domains(decoupler, dataset, edges);
  const ReferencePointMap start = identity_candidate(f, edges);
  result.identity_objective = f(start);
  result.refmap = start;
  result.objective = result.identity_objective;

  for (std::size_t restart = 0; restart < config.restarts; ++restart) {
    std::mt19937_64 rng(Fnv1a().u64(config.seed).u64(restart).digest());
    std::uniform_int_distribution<std::size_t> pick_edge(0, edges.size() - 1);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);

    ReferencePointMap current = start;
    double current_f = result.identity_objective;
    double best_f = current_f;
    double temperature = config.initial_temperature;
    for (std::size_t it = 1; it <= config.iterations; ++it) {
      const std::size_t k = pick_edge(rng);
      std::vector<double> value = current.at(edges[k]);
      for (std::size_t c = 0; c < value.size(); ++c) {
        const ColumnDomain& cd = dom[k][c];
        if (cd.discrete) {
          value[c] = static_cast<double>(std::uniform_int_distribution<std::size_t>(0, cd.levels - 1)(rng));
        } else {
          value[c] = std::clamp(value[c] + config.proposal_scale * cd.sd * normal(rng), cd.lo, cd.hi);
        }
      }
      ReferencePointMap candidate = current;
      candidate.set(edges[k], std::move(value));
      const double cand_f = f(candidate);
      const double delta = cand_f - current_f;
      const bool accept = delta >= 0.0 || unit(rng) < std::exp(delta / temperature);
      if (accept) {
        current = candidate;
        current_f = cand_f;
      }
      best_f = std::max(best_f, cand_f);
      if (cand_f > result.objective) {
        result.objective = cand_f;
        result.refmap = candidate;
      }
      result.trace.entries.push_back({restart, it, temperature, std::move(candidate), cand_f, accept, best_f});
      temperature *= config.cooling;
    }
  }
  result.evaluations = f.evaluations();
  return result;
}

ExhaustiveResult exhaustive_search(const Decoupler& decoupler, const std::vector<Edge>& edges,
                                   const LeastAdvantagedPredicate& predicate, const Dataset& dataset, std::size_t cap) {
  check_edges(decoupler, edges);
  // Flatten every (edge, column) into one odometer digit.
  struct Digit {
    std::size_t edge, column, levels;
  };
  std::vector<Digit> digits;
  double space = 1.0;
  for (std::size_t k = 0; k < edges.size(); ++k) {
    const auto& cols = decoupler.tail_spec(edges[k]).columns;
    for (std::size_t c = 0; c < cols.size(); ++c) {
      if (!cols[c].discrete())
        throw Error(ErrorCode::space_too_large, "continuous tail '" + cols[c].name + "' cannot be enumerated");
      digits.push_back({k, c, cols[c].level_count()});
      space *= static_cast<double>(cols[c].level_count());
    }
  }
  if (space > static_cast<double>(cap))
    throw Error(ErrorCode::space_too_large, std::to_string(static_cast<long long>(space)) + " candidates exceed the cap of " +
                                               std::to_string(cap));
  SubgroupObjective f(decoupler, dataset, predicate);
  std::vector<std::vector<double>> values;
  for (const auto& e : edges) values.emplace_back(decoupler.tail_spec(e).columns.size(), 0.0);
  std::vector<std::size_t> odo(digits.size(), 0);
  ExhaustiveResult result;
  bool first = true;
  while (true) {
    ReferencePointMap cand;
    for (std::size_t i = 0; i < digits.size(); ++i) values[digits[i].edge][digits[i].column] = static_cast<double>(odo[i]);
    for (std::size_t k = 0; k < edges.size(); ++k) cand.set(edges[k], values[k]);
    const double v = f(cand);
    ++result.candidates;
    if (first || v > result.objective) {
      result.objective = v;
      result.refmap = std::move(cand);
      first = false;
    }
    std::size_t i = digits.size();
    while (i > 0) {
      --i;
      if (++odo[i] < digits[i].levels) break;
      odo[i] = 0;
      if (i == 0) return result;
    }
    if (digits.empty()) return result;
  }
}

void write_trace_csv(const SearchTrace& trace, const std::vector<Edge>& edges, const Decoupler& decoupler,
                     std::ostream& out) {
  out << "restart,iteration,temperature,objective,accepted,best";
  for (const auto& e : edges) out << ',' << e.tail << "->" << e.head;
  out << '\n';
  const auto num = format_number;
  for (const auto& t : trace.entries) {
    out << t.restart << ',' << t.iteration << ',' << num(t.temperature) << ',' << num(t.objective) << ','
        << (t.accepted ? 1 : 0) << ',' << num(t.best);
    for (const auto& e : edges) {
      const auto& spec = decoupler.tail_spec(e);
      const auto& v = t.candidate.at(e);
      out << ',';
      for (std::size_t c = 0; c < v.size(); ++c) {
        if (c) out << '|';
        out << spec.columns[c].format(v[c]);
      }
    }
    out << '\n';
  }
}

}  // namespace pfair
