#include "pfair/decoupling.hpp"

#include <algorithm>
#include <deque>

#include "pfair/error.hpp"

namespace pfair {

const std::vector<double>* ReferencePointMap::find(const Edge& edge) const {
  const auto it = values_.find(edge);
  return it == values_.end() ? nullptr : &it->second;
}

const std::vector<double>& ReferencePointMap::at(const Edge& edge) const {
  const auto* v = find(edge);
  if (!v) throw Error(ErrorCode::unknown_edge, "no reference point on " + to_string(edge));
  return *v;
}

Replacement Replacement::from_module(LocalModule module) {
  Replacement r;
  r.input_width = module.encoded_input_width();
  r.output_width = module.output_width();
  auto shared = std::make_shared<const LocalModule>(std::move(module));
  r.fn = [shared](std::span<const double> in, std::span<double> out) { shared->predict_encoded(in, out); };
  return r;
}

std::string_view to_string(InputSource source) {
  switch (source) {
    case InputSource::reference_point: return "reference-point";
    case InputSource::downstream_of_reference: return "downstream-of-reference";
    case InputSource::observed: return "observed";
  }
  return "?";
}

const std::vector<double>& PropagationState::value(const std::string& node) const {
  const auto it = std::find(nodes.begin(), nodes.end(), node);
  if (it == nodes.end()) throw Error(ErrorCode::unknown_node, "unknown node '" + node + "'");
  return values[static_cast<std::size_t>(it - nodes.begin())];
}

bool PropagationState::is_affected(const std::string& node) const {
  const auto it = std::find(nodes.begin(), nodes.end(), node);
  if (it == nodes.end()) throw Error(ErrorCode::unknown_node, "unknown node '" + node + "'");
  return affected[static_cast<std::size_t>(it - nodes.begin())];
}

ObservedTable::ObservedTable(const Dataset& dataset, const CausalGraph& graph) : rows_(dataset.rows()) {
  const std::size_t n = graph.size();
  names_ = graph.nodes();
  present_.assign(n, false);
  raw_width_.assign(n, 0);
  enc_width_.assign(n, 0);
  raw_.resize(n);
  enc_.resize(n);
  const Schema& schema = dataset.schema();
  std::vector<double> raw;
  for (std::size_t v = 0; v < n; ++v) {
    if (!schema.has_node(names_[v])) continue;
    const VariableSpec& spec = schema.variable(names_[v]);
    const auto& cols = schema.node_columns(names_[v]);
    present_[v] = true;
    raw_width_[v] = cols.size();
    enc_width_[v] = spec.encoded_width();
    raw_[v].resize(rows_ * raw_width_[v]);
    enc_[v].resize(rows_ * enc_width_[v]);
    for (std::size_t r = 0; r < rows_; ++r) {
      std::span<double> dst(raw_[v].data() + r * raw_width_[v], raw_width_[v]);
      dataset.node_values(cols, r, dst);
      encode_values(spec, dst, std::span<double>(enc_[v].data() + r * enc_width_[v], enc_width_[v]));
    }
  }
}

std::span<const double> ObservedTable::raw(std::size_t node, std::size_t row) const {
  return {raw_[node].data() + row * raw_width_[node], raw_width_[node]};
}

std::span<const double> ObservedTable::encoded(std::size_t node, std::size_t row) const {
  return {enc_[node].data() + row * enc_width_[node], enc_width_[node]};
}

Decoupler::Decoupler(const CausalGraph& graph, const ModelBundle& bundle, DecouplingOptions options)
    : graph_(&graph), bundle_(&bundle), options_(std::move(options)) {
  bundle.check_graph(graph);
  order_ = graph.topo_order();
  const std::size_t n = graph.size();
  modules_.assign(n, nullptr);
  slot_base_.assign(n + 1, 0);
  for (std::size_t v = 0; v < n; ++v) {
    const auto& name = graph.nodes()[v];
    const auto& pidx = graph.parent_indices(v);
    slot_base_[v + 1] = slot_base_[v] + pidx.size();
    if (pidx.empty()) continue;
    const LocalModule& m = bundle.module(name);
    std::vector<std::string> expected;
    for (std::size_t p : pidx) expected.push_back(graph.nodes()[p]);
    if (m.parents() != expected)
      throw Error(ErrorCode::fingerprint_mismatch, "module '" + name + "' parent order differs from the graph");
    modules_[v] = &m;
  }
  if (options_.outcome.empty()) throw Error(ErrorCode::invalid_argument, "no outcome node given");
  outcome_ = graph.require_index(options_.outcome);
  if (!modules_[outcome_]) throw Error(ErrorCode::invalid_argument, "outcome '" + options_.outcome + "' is a root node");
}

const VariableSpec& Decoupler::tail_spec(const Edge& edge) const {
  const auto h = graph_->index_of(edge.head);
  const auto t = graph_->index_of(edge.tail);
  if (!h || !t || !graph_->has_edge(edge)) throw Error(ErrorCode::unknown_edge, "unknown edge " + to_string(edge));
  const auto& pidx = graph_->parent_indices(*h);
  const auto pos = static_cast<std::size_t>(std::find(pidx.begin(), pidx.end(), *t) - pidx.begin());
  return modules_[*h]->parent_specs()[pos];
}

void Decoupler::validate(const ReferencePointMap& refmap) const {
  for (const auto& [edge, value] : refmap.entries()) {
    if (!graph_->is_objectionable(edge))
      throw Error(ErrorCode::unknown_edge, to_string(edge) + " is not an objectionable edge");
    const VariableSpec& spec = tail_spec(edge);
    if (value.size() != spec.columns.size()) {
      throw Error(ErrorCode::kind_mismatch, "reference point on " + to_string(edge) + " needs " +
                                                std::to_string(spec.columns.size()) + " values");
    }
    for (std::size_t c = 0; c < value.size(); ++c) {
      if (!spec.columns[c].admits(value[c])) {
        throw Error(ErrorCode::kind_mismatch, "reference value " + std::to_string(value[c]) + " on " +
                                                  to_string(edge) + " is outside the domain of '" +
                                                  spec.columns[c].name + "'");
      }
    }
  }
}

void Decoupler::validate(const ModuleOverride& overrides) const {
  for (const auto& [node, rep] : overrides) {
    const std::size_t v = graph_->require_index(node);
    if (!modules_[v]) throw Error(ErrorCode::invalid_argument, "cannot override root node '" + node + "'");
    if (rep.input_width != modules_[v]->encoded_input_width() || rep.output_width != modules_[v]->output_width())
      throw Error(ErrorCode::arity_mismatch, "override for '" + node + "' does not match the module's arity");
    if (!rep.fn) throw Error(ErrorCode::invalid_argument, "override for '" + node + "' has no mechanism");
  }
}

Decoupler::Resolved Decoupler::resolve(const ReferencePointMap& refmap, const ModuleOverride& overrides) const {
  validate(refmap);
  validate(overrides);
  Resolved r;
  r.keyed.assign(slot_base_.back(), 0);
  r.encoded.resize(slot_base_.back());
  r.replaced.assign(graph_->size(), nullptr);
  for (const auto& [edge, value] : refmap.entries()) {
    const std::size_t h = graph_->require_index(edge.head), t = graph_->require_index(edge.tail);
    const auto& pidx = graph_->parent_indices(h);
    const std::size_t slot = slot_base_[h] + static_cast<std::size_t>(std::find(pidx.begin(), pidx.end(), t) - pidx.begin());
    r.keyed[slot] = 1;
    r.encoded[slot] = encode_values(tail_spec(edge), value);
  }
  for (const auto& [node, rep] : overrides) r.replaced[graph_->require_index(node)] = &rep;
  return r;
}

namespace {

double outcome_score(const VariableSpec& spec, std::span<const double> out, std::optional<std::size_t> level) {
  const auto& col = spec.columns.front();
  switch (col.kind) {
    case ColumnKind::continuous: return out[0];
    case ColumnKind::binary: return level.value_or(1) == 0 ? 1.0 - out[0] : out[0];
    case ColumnKind::categorical: {
      const std::size_t l = level.value_or(col.levels.size() - 1);
      if (l >= col.levels.size()) throw Error(ErrorCode::invalid_argument, "favorable level out of range");
      return out[l];
    }
  }
  return out[0];
}

}  // namespace

double Decoupler::run(const ObservedTable& table, std::size_t row, const Resolved& res, PropagationState* state,
                      std::size_t* affected_count) const {
  const std::size_t n = graph_->size();
  const auto& names = graph_->nodes();
  std::vector<std::span<const double>> feed(n);
  std::vector<std::vector<double>> own(n);
  std::vector<char> affected(n, 0);
  std::vector<double> inputs, out;
  double score = 0.0;
  std::size_t count = 0;

  auto observed = [&](std::size_t v) -> std::span<const double> {
    if (!table.has(v))
      throw Error(ErrorCode::missing_column, "no observed values for node '" + names[v] + "'");
    return table.encoded(v, row);
  };

  for (std::size_t v : order_) {
    const LocalModule* m = modules_[v];
    if (!m) {
      if (table.has(v)) feed[v] = table.encoded(v, row);
      if (state && table.has(v)) {
        const auto raw = table.raw(v, row);
        state->values[v].assign(raw.begin(), raw.end());
        state->encoded[v].assign(feed[v].begin(), feed[v].end());
      }
      continue;
    }
    const auto& pidx = graph_->parent_indices(v);
    inputs.clear();
    bool any = false;
    for (std::size_t pos = 0; pos < pidx.size(); ++pos) {
      const std::size_t p = pidx[pos];
      const std::size_t slot = slot_base_[v] + pos;
      InputSource src;
      std::span<const double> x;
      if (res.keyed[slot]) {
        x = res.encoded[slot];
        src = InputSource::reference_point;
        any = true;
      } else if (affected[p]) {
        x = feed[p];
        src = InputSource::downstream_of_reference;
        any = true;
      } else {
        x = feed[p].data() ? feed[p] : observed(p);
        src = InputSource::observed;
      }
      inputs.insert(inputs.end(), x.begin(), x.end());
      if (state) state->sources[Edge{names[p], names[v]}] = src;
    }
    const Replacement* rep = res.replaced[v];
    const bool aff = any || rep != nullptr;
    affected[v] = aff;
    count += aff ? 1 : 0;
    if (aff || v == outcome_) {
      out.resize(m->output_width());
      if (rep) {
        rep->fn(inputs, out);
      } else {
        m->predict_encoded(inputs, out);
      }
      if (v == outcome_) {
        score = outcome_score(m->target_spec(), out, options_.favorable_level);
        if (state) state->outcome_output = out;
      }
      const bool need_raw = state || (aff && options_.propagation == Propagation::hard);
      std::vector<double> raw = need_raw ? hard_values(m->target_spec(), out) : std::vector<double>{};
      if (aff) {
        own[v] = options_.propagation == Propagation::hard ? encode_values(m->target_spec(), raw) : out;
        feed[v] = own[v];
      } else if (table.has(v)) {
        feed[v] = table.encoded(v, row);
      }
      if (state) {
        state->values[v] = std::move(raw);
        state->encoded[v] = aff ? own[v] : out;
      }
    } else {
      if (table.has(v)) feed[v] = table.encoded(v, row);
      if (state && table.has(v)) {
        const auto raw = table.raw(v, row);
        state->values[v].assign(raw.begin(), raw.end());
        state->encoded[v].assign(feed[v].begin(), feed[v].end());
      }
    }
  }
  if (state) {
    state->affected.assign(affected.begin(), affected.end());
    state->outcome = score;
  }
  if (affected_count) *affected_count = count;
  return score;
}

PropagationState Decoupler::instantiate(const ObservedTable& table, std::size_t row, const ReferencePointMap& refmap,
                                        const ModuleOverride& overrides) const {
  if (row >= table.rows()) throw Error(ErrorCode::invalid_argument, "row " + std::to_string(row) + " out of range");
  const auto res = resolve(refmap, overrides);
  PropagationState state;
  state.nodes = graph_->nodes();
  state.values.resize(graph_->size());
  state.encoded.resize(graph_->size());
  run(table, row, res, &state, nullptr);
  return state;
}

PredictionSummary Decoupler::predict(const ObservedTable& table, const ReferencePointMap& refmap,
                                     const ModuleOverride& overrides, std::span<const std::size_t> rows) const {
  const auto res = resolve(refmap, overrides);
  PredictionSummary out;
  const std::size_t count = rows.empty() ? table.rows() : rows.size();
  out.scores.resize(count);
  out.affected_counts.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t r = rows.empty() ? i : rows[i];
    if (r >= table.rows()) throw Error(ErrorCode::invalid_argument, "row " + std::to_string(r) + " out of range");
    try {
      out.scores[i] = run(table, r, res, nullptr, &out.affected_counts[i]);
    } catch (const Error& e) {
      throw Error(e.code(), "row " + std::to_string(r) + ": " + e.detail());
    }
  }
  return out;
}

namespace {

DecouplingOptions with_outcome(const Dataset& dataset, DecouplingOptions options) {
  if (options.outcome.empty() && dataset.target_node()) options.outcome = *dataset.target_node();
  return options;
}

}  // namespace

PropagationState instantiate_row(const CausalGraph& graph, const ModelBundle& bundle, const ReferencePointMap& refmap,
                                 const ModuleOverride& overrides, const Dataset& dataset, std::size_t row,
                                 const DecouplingOptions& options) {
  const Decoupler d(graph, bundle, with_outcome(dataset, options));
  return d.instantiate(ObservedTable(dataset, graph), row, refmap, overrides);
}

PredictionSummary predict_all(const CausalGraph& graph, const ModelBundle& bundle, const ReferencePointMap& refmap,
                              const ModuleOverride& overrides, const Dataset& dataset,
                              const DecouplingOptions& options) {
  const Decoupler d(graph, bundle, with_outcome(dataset, options));
  return d.predict(ObservedTable(dataset, graph), refmap, overrides);
}

std::set<std::string> edge_reach(const CausalGraph& graph, const ReferencePointMap& refmap) {
  std::set<std::string> out;
  std::deque<std::size_t> queue;
  std::vector<char> seen(graph.size(), 0);
  for (const auto& [edge, _] : refmap.entries()) {
    if (!graph.has_edge(edge)) continue;
    const std::size_t h = graph.require_index(edge.head);
    if (!seen[h]) {
      seen[h] = 1;
      queue.push_back(h);
    }
  }
  while (!queue.empty()) {
    const std::size_t v = queue.front();
    queue.pop_front();
    out.insert(graph.nodes()[v]);
    for (std::size_t c : graph.child_indices(v)) {
      if (!seen[c]) {
        seen[c] = 1;
        queue.push_back(c);
      }
    }
  }
  return out;
}

nlohmann::json refmap_to_json(const ReferencePointMap& refmap, const Decoupler& decoupler) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& [edge, value] : refmap.entries()) {
    const VariableSpec& spec = decoupler.tail_spec(edge);
    nlohmann::json vals = nlohmann::json::array();
    for (std::size_t c = 0; c < value.size() && c < spec.columns.size(); ++c) {
      if (spec.columns[c].discrete())
        vals.push_back(spec.columns[c].format(value[c]));
      else
        vals.push_back(value[c]);
    }
    out.push_back({{"tail", edge.tail}, {"head", edge.head}, {"value", vals.size() == 1 ? vals[0] : vals}});
  }
  return out;
}

ReferencePointMap refmap_from_json(const nlohmann::json& j, const Decoupler& decoupler) {
  ReferencePointMap out;
  if (!j.is_array()) throw Error(ErrorCode::config_error, "reference points must be a list");
  for (const auto& item : j) {
    if (!item.contains("tail") || !item.contains("head") || !item.contains("value"))
      throw Error(ErrorCode::config_error, "reference point needs tail, head and value");
    const Edge edge{item["tail"].get<std::string>(), item["head"].get<std::string>()};
    const VariableSpec& spec = decoupler.tail_spec(edge);
    const nlohmann::json vals = item["value"].is_array() ? item["value"] : nlohmann::json::array({item["value"]});
    if (vals.size() != spec.columns.size())
      throw Error(ErrorCode::kind_mismatch, "reference point on " + to_string(edge) + " has the wrong arity");
    std::vector<double> value;
    for (std::size_t c = 0; c < vals.size(); ++c) {
      const auto& col = spec.columns[c];
      if (vals[c].is_string())
        value.push_back(col.discrete() ? col.level_value(vals[c].get<std::string>()) : col.parse(vals[c].get<std::string>()));
      else if (vals[c].is_number())
        value.push_back(vals[c].get<double>());
      else
        throw Error(ErrorCode::config_error, "reference value on " + to_string(edge) + " must be a label or number");
    }
    out.set(edge, std::move(value));
  }
  decoupler.validate(out);
  return out;
}

}  // namespace pfair
