#include "pfair/local_models.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "pfair/error.hpp"
#include "pfair/fingerprint.hpp"
#include "pfair/kernels.hpp"

namespace pfair {

std::string_view to_string(HypothesisKind kind) {
  switch (kind) {
    case HypothesisKind::linear: return "linear";
    case HypothesisKind::logistic: return "logistic";
    case HypothesisKind::mlp: return "mlp";
  }
  return "?";
}

HypothesisKind hypothesis_kind_from_string(std::string_view text) {
  if (text == "linear") return HypothesisKind::linear;
  if (text == "logistic") return HypothesisKind::logistic;
  if (text == "mlp") return HypothesisKind::mlp;
  throw Error(ErrorCode::config_error, "unknown hypothesis kind '" + std::string(text) + "'");
}

void HypothesisSpec::check_target(const VariableSpec& target) const {
  for (const auto& col : target.columns) {
    if (kind == HypothesisKind::linear && col.discrete())
      throw Error(ErrorCode::kind_mismatch, "linear hypothesis for discrete column '" + col.name + "'");
    if (kind == HypothesisKind::logistic && !col.discrete())
      throw Error(ErrorCode::kind_mismatch, "logistic hypothesis for continuous column '" + col.name + "'");
  }
  if (kind == HypothesisKind::mlp && hidden_layers == 0)
    throw Error(ErrorCode::invalid_argument, "mlp needs at least one hidden layer");
}

std::uint64_t module_seed(std::uint64_t seed, const std::string& node) {
  return Fnv1a().u64(seed).str(node).digest();
}

void LocalModule::init_shape() {
  raw_width_ = 0;
  encoded_width_ = 0;
  input_names_.clear();
  for (const auto& p : parent_specs_) {
    raw_width_ += p.columns.size();
    encoded_width_ += p.encoded_width();
    for (auto& n : encoded_names(p)) input_names_.push_back(std::move(n));
  }
}

LocalModule LocalModule::linear(std::string target, VariableSpec target_spec, std::vector<std::string> parents,
                                std::vector<VariableSpec> parent_specs, std::vector<std::vector<double>> coefficients) {
  LocalModule m;
  m.target_ = std::move(target);
  m.target_spec_ = std::move(target_spec);
  m.parents_ = std::move(parents);
  m.parent_specs_ = std::move(parent_specs);
  m.kind_ = HypothesisKind::linear;
  m.init_shape();
  if (m.parents_.size() != m.parent_specs_.size())
    throw Error(ErrorCode::arity_mismatch, "parent names and specs differ in length");
  HypothesisSpec().check_target(m.target_spec_);
  if (coefficients.size() != m.target_spec_.columns.size())
    throw Error(ErrorCode::length_mismatch, "one coefficient row per target column expected");
  for (const auto& row : coefficients) {
    if (row.size() != m.encoded_width_ + 1)
      throw Error(ErrorCode::length_mismatch, "coefficient row width must be inputs + intercept");
  }
  m.coefficients_ = std::move(coefficients);
  return m;
}

LocalModule LocalModule::network(std::string target, VariableSpec target_spec, std::vector<std::string> parents,
                                 std::vector<VariableSpec> parent_specs, HypothesisKind kind, Network net,
                                 std::vector<double> input_shift, std::vector<double> input_scale,
                                 std::vector<double> target_shift, std::vector<double> target_scale) {
  if (kind == HypothesisKind::linear) throw Error(ErrorCode::invalid_argument, "linear modules carry no network");
  LocalModule m;
  m.target_ = std::move(target);
  m.target_spec_ = std::move(target_spec);
  m.parents_ = std::move(parents);
  m.parent_specs_ = std::move(parent_specs);
  m.kind_ = kind;
  m.init_shape();
  if (m.parents_.size() != m.parent_specs_.size())
    throw Error(ErrorCode::arity_mismatch, "parent names and specs differ in length");
  if (net.input_dim() != m.encoded_width_ || net.output_dim() != m.target_spec_.encoded_width())
    throw Error(ErrorCode::length_mismatch, "network shape does not match the module");
  if (net.heads().size() != m.target_spec_.columns.size())
    throw Error(ErrorCode::length_mismatch, "one head per target column expected");
  if (input_shift.size() != m.encoded_width_ || input_scale.size() != m.encoded_width_)
    throw Error(ErrorCode::length_mismatch, "input standardization width mismatch");
  if (target_shift.size() != m.target_spec_.columns.size() || target_scale.size() != target_shift.size())
    throw Error(ErrorCode::length_mismatch, "target standardization width mismatch");
  m.net_ = std::move(net);
  m.input_shift_ = std::move(input_shift);
  m.input_scale_ = std::move(input_scale);
  m.target_shift_ = std::move(target_shift);
  m.target_scale_ = std::move(target_scale);
  return m;
}

double LocalModule::coefficient(const std::string& name, std::size_t target_column) const {
  if (kind_ != HypothesisKind::linear) throw Error(ErrorCode::kind_mismatch, "named coefficients need a linear module");
  if (target_column >= coefficients_.size()) throw Error(ErrorCode::invalid_argument, "target column out of range");
  if (name == "intercept") return coefficients_[target_column].back();
  const auto it = std::find(input_names_.begin(), input_names_.end(), name);
  if (it == input_names_.end())
    throw Error(ErrorCode::unknown_node, "module '" + target_ + "' has no coefficient '" + name + "'");
  return coefficients_[target_column][static_cast<std::size_t>(it - input_names_.begin())];
}

std::vector<double> LocalModule::encode_inputs(std::span<const double> raw) const {
  if (raw.size() != raw_width_) {
    throw Error(ErrorCode::arity_mismatch, "module '" + target_ + "' expects " + std::to_string(raw_width_) +
                                               " input values, got " + std::to_string(raw.size()));
  }
  std::vector<double> out(encoded_width_);
  std::size_t rpos = 0, epos = 0;
  for (const auto& p : parent_specs_) {
    for (std::size_t c = 0; c < p.columns.size(); ++c) {
      if (!p.columns[c].admits(raw[rpos + c])) {
        throw Error(ErrorCode::kind_mismatch, "value " + std::to_string(raw[rpos + c]) + " is not a legal '" +
                                                  p.columns[c].name + "' value");
      }
    }
    const std::size_t w = p.encoded_width();
    encode_values(p, raw.subspan(rpos, p.columns.size()), std::span<double>(out).subspan(epos, w));
    rpos += p.columns.size();
    epos += w;
  }
  return out;
}

void LocalModule::predict_encoded(std::span<const double> encoded, std::span<double> out) const {
  if (encoded.size() != encoded_width_)
    throw Error(ErrorCode::arity_mismatch, "module '" + target_ + "' expects " + std::to_string(encoded_width_) +
                                               " encoded inputs, got " + std::to_string(encoded.size()));
  if (out.size() != output_width()) throw Error(ErrorCode::length_mismatch, "output width mismatch");
  if (kind_ == HypothesisKind::linear) {
    for (std::size_t c = 0; c < coefficients_.size(); ++c) {
      const auto& row = coefficients_[c];
      out[c] = kernels::dot(std::span<const double>(row.data(), encoded_width_), encoded) + row.back();
    }
    return;
  }
  const std::size_t mw = net_.max_width();
  // Small fixed buffers keep the hot path allocation free for typical widths.
  constexpr std::size_t kStack = 512;
  double stack_buf[kStack];
  std::vector<double> heap;
  double* buf = stack_buf;
  const std::size_t need = encoded_width_ + 2 * mw;
  if (need > kStack) {
    heap.resize(need);
    buf = heap.data();
  }
  std::span<double> x(buf, encoded_width_);
  for (std::size_t i = 0; i < encoded_width_; ++i) x[i] = (encoded[i] - input_shift_[i]) / input_scale_[i];
  net_.forward(x, out, std::span<double>(buf + encoded_width_, 2 * mw));
  net_.activate(out);
  std::size_t pos = 0;
  for (std::size_t c = 0; c < target_spec_.columns.size(); ++c) {
    const auto& col = target_spec_.columns[c];
    if (!col.discrete()) out[pos] = out[pos] * target_scale_[c] + target_shift_[c];
    pos += col.encoded_width();
  }
}

std::vector<double> LocalModule::predict_encoded(std::span<const double> encoded) const {
  std::vector<double> out(output_width());
  predict_encoded(encoded, out);
  return out;
}

std::vector<double> LocalModule::predict(std::span<const double> raw) const {
  return predict_encoded(encode_inputs(raw));
}

double LocalModule::score(std::span<const double> raw, std::optional<std::size_t> positive_level) const {
  const auto out = predict(raw);
  const auto& col = target_spec_.columns.front();
  switch (col.kind) {
    case ColumnKind::continuous: return out[0];
    case ColumnKind::binary: {
      const std::size_t lvl = positive_level.value_or(1);
      if (lvl > 1) throw Error(ErrorCode::invalid_argument, "binary level out of range");
      return lvl == 1 ? out[0] : 1.0 - out[0];
    }
    case ColumnKind::categorical: {
      const std::size_t lvl = positive_level.value_or(col.levels.size() - 1);
      if (lvl >= col.levels.size()) throw Error(ErrorCode::invalid_argument, "categorical level out of range");
      return out[lvl];
    }
  }
  return out[0];
}

std::size_t LocalModule::parameter_count() const noexcept {
  if (kind_ == HypothesisKind::linear) return coefficients_.size() * (encoded_width_ + 1);
  return net_.parameter_count();
}

std::size_t LocalModule::mac_count() const noexcept {
  if (kind_ == HypothesisKind::linear) return coefficients_.size() * encoded_width_;
  return net_.mac_count();
}

std::uint64_t LocalModule::parameter_fingerprint() const {
  Fnv1a h;
  h.str(target_).str(to_string(kind_)).u64(parents_.size());
  for (const auto& p : parents_) h.str(p);
  h.u64(coefficients_.size());
  for (const auto& row : coefficients_) h.f64s(row);
  const auto flat = net_.flatten();
  h.u64(flat.size()).f64s(flat);
  h.f64s(input_shift_).f64s(input_scale_).f64s(target_shift_).f64s(target_scale_);
  return h.digest();
}

std::vector<double> hard_values(const VariableSpec& spec, std::span<const double> encoded) {
  if (encoded.size() != spec.encoded_width()) throw Error(ErrorCode::length_mismatch, "encoded width mismatch");
  std::vector<double> out;
  out.reserve(spec.columns.size());
  std::size_t pos = 0;
  for (const auto& col : spec.columns) {
    switch (col.kind) {
      case ColumnKind::continuous: out.push_back(encoded[pos]); break;
      case ColumnKind::binary: out.push_back(encoded[pos] > 0.5 ? 1.0 : 0.0); break;
      case ColumnKind::categorical: {
        const auto first = encoded.begin() + static_cast<std::ptrdiff_t>(pos);
        const auto best = std::max_element(first, first + static_cast<std::ptrdiff_t>(col.levels.size()));
        out.push_back(static_cast<double>(best - first));
        break;
      }
    }
    pos += col.encoded_width();
  }
  return out;
}

namespace {

struct Design {
  std::size_t rows = 0;
  std::size_t width = 0;
  std::vector<double> x;  // rows x width, encoded parents
  std::vector<VariableSpec> parent_specs;
};

Design encode_parents(const Dataset& data, const std::vector<std::string>& parents) {
  const Schema& schema = data.schema();
  Design d;
  d.rows = data.rows();
  std::vector<std::vector<std::size_t>> cols;
  for (const auto& p : parents) {
    if (!schema.has_node(p)) throw Error(ErrorCode::missing_column, "dataset has no columns for node '" + p + "'");
    d.parent_specs.push_back(schema.variable(p));
    cols.push_back(schema.node_columns(p));
    d.width += d.parent_specs.back().encoded_width();
  }
  d.x.resize(d.rows * d.width);
  std::vector<double> raw;
  for (std::size_t r = 0; r < d.rows; ++r) {
    std::size_t pos = 0;
    for (std::size_t i = 0; i < parents.size(); ++i) {
      raw.resize(cols[i].size());
      data.node_values(cols[i], r, raw);
      const std::size_t w = d.parent_specs[i].encoded_width();
      encode_values(d.parent_specs[i], raw, std::span<double>(d.x.data() + r * d.width + pos, w));
      pos += w;
    }
  }
  return d;
}

LocalModule fit_linear(const Dataset& data, const std::string& target, const VariableSpec& tspec,
                       const std::vector<std::string>& parents, Design design, const HypothesisSpec& h) {
  const std::size_t p = design.width + 1;
  std::vector<double> x(design.rows * p);
  for (std::size_t r = 0; r < design.rows; ++r) {
    std::copy_n(design.x.begin() + static_cast<std::ptrdiff_t>(r * design.width), design.width,
                x.begin() + static_cast<std::ptrdiff_t>(r * p));
    x[r * p + design.width] = 1.0;
  }
  const auto& tcols = data.schema().node_columns(target);
  std::vector<std::vector<double>> coef;
  double rss = 0.0;
  bool deficient = false;
  for (std::size_t c : tcols) {
    const auto y = data.column(c);
    auto sol = least_squares(x, design.rows, p, y, h.singular);
    rss += sol.residual_sum_squares;
    deficient = deficient || sol.rank_deficient;
    coef.push_back(std::move(sol.beta));
  }
  auto m = LocalModule::linear(target, tspec, parents, std::move(design.parent_specs), std::move(coef));
  m.training_loss = rss / static_cast<double>(design.rows);
  m.initial_loss = m.training_loss;
  m.rank_deficient = deficient;
  m.seed = module_seed(h.training.seed, target);
  return m;
}

LocalModule fit_network(const Dataset& data, const std::string& target, const VariableSpec& tspec,
                        const std::vector<std::string>& parents, Design design, const HypothesisSpec& h) {
  const std::size_t n = design.rows, d = design.width;
  std::vector<double> shift(d, 0.0), scale(d, 1.0);
  std::size_t pos = 0;
  for (const auto& ps : design.parent_specs) {
    for (const auto& col : ps.columns) {
      if (!col.discrete()) {
        double mean = 0.0;
        for (std::size_t r = 0; r < n; ++r) mean += design.x[r * d + pos];
        mean /= static_cast<double>(n);
        double var = 0.0;
        for (std::size_t r = 0; r < n; ++r) {
          const double e = design.x[r * d + pos] - mean;
          var += e * e;
        }
        const double sd = std::sqrt(var / static_cast<double>(n));
        shift[pos] = mean;
        scale[pos] = sd > 0.0 ? sd : 1.0;
      }
      pos += col.encoded_width();
    }
  }
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t i = 0; i < d; ++i) design.x[r * d + i] = (design.x[r * d + i] - shift[i]) / scale[i];

  const auto& tcols = data.schema().node_columns(target);
  const std::size_t nh = tcols.size();
  std::vector<Head> heads;
  std::vector<double> tshift(nh, 0.0), tscale(nh, 1.0), targets(n * nh);
  for (std::size_t c = 0; c < nh; ++c) {
    const auto& col = tspec.columns[c];
    const auto y = data.column(tcols[c]);
    if (col.kind == ColumnKind::continuous) {
      heads.push_back({HeadLoss::squared, 1});
      double mean = 0.0;
      for (double v : y) mean += v;
      mean /= static_cast<double>(n);
      double var = 0.0;
      for (double v : y) var += (v - mean) * (v - mean);
      const double sd = std::sqrt(var / static_cast<double>(n));
      tshift[c] = mean;
      tscale[c] = sd > 0.0 ? sd : 1.0;
      for (std::size_t r = 0; r < n; ++r) targets[r * nh + c] = (y[r] - mean) / tscale[c];
    } else {
      heads.push_back(col.kind == ColumnKind::binary ? Head{HeadLoss::sigmoid, 1}
                                                     : Head{HeadLoss::softmax, col.levels.size()});
      for (std::size_t r = 0; r < n; ++r) targets[r * nh + c] = y[r];
    }
  }

  const std::uint64_t seed = module_seed(h.training.seed, target);
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> hidden;
  if (h.kind == HypothesisKind::mlp) hidden.assign(h.hidden_layers, HypothesisSpec::hidden_width(parents.size()));
  Network net(d, hidden, heads, rng);
  TrainOptions opts;
  opts.epochs = h.training.epochs;
  opts.batch_size = h.training.batch_size;
  opts.learning_rate = h.training.learning_rate;
  const TrainReport report = train(net, design.x, targets, n, opts, rng);

  auto m = LocalModule::network(target, tspec, parents, std::move(design.parent_specs), h.kind, std::move(net),
                                std::move(shift), std::move(scale), std::move(tshift), std::move(tscale));
  m.initial_loss = report.initial_loss;
  m.training_loss = report.final_loss;
  m.loss_trace = report.epoch_losses;
  m.seed = seed;
  return m;
}

}  // namespace

LocalModule fit_local(const Dataset& dataset, const std::string& target, const std::vector<std::string>& parents,
                      const HypothesisSpec& hypothesis) {
  const Schema& schema = dataset.schema();
  if (!schema.has_node(target))
    throw Error(ErrorCode::missing_column, "dataset has no columns for node '" + target + "'");
  if (dataset.empty()) throw Error(ErrorCode::empty_dataset, "cannot fit '" + target + "' on zero rows");
  const VariableSpec& tspec = schema.variable(target);
  hypothesis.check_target(tspec);
  Design design = encode_parents(dataset, parents);
  if (hypothesis.kind == HypothesisKind::linear)
    return fit_linear(dataset, target, tspec, parents, std::move(design), hypothesis);
  return fit_network(dataset, target, tspec, parents, std::move(design), hypothesis);
}

double predict_local(const LocalModule& module, std::span<const double> raw_inputs) {
  return module.score(raw_inputs);
}

ModelBundle::ModelBundle(std::uint64_t graph_fingerprint, std::map<std::string, LocalModule> modules)
    : graph_fingerprint_(graph_fingerprint), modules_(std::move(modules)) {}

const LocalModule& ModelBundle::module(const std::string& node) const {
  const auto it = modules_.find(node);
  if (it == modules_.end()) throw Error(ErrorCode::unknown_node, "bundle has no module for '" + node + "'");
  return it->second;
}

void ModelBundle::check_graph(const CausalGraph& graph) const {
  const auto fp = graph.fingerprint();
  if (fp != graph_fingerprint_) {
    throw Error(ErrorCode::fingerprint_mismatch,
                "bundle was fitted on graph " + to_hex(graph_fingerprint_) + ", not " + to_hex(fp));
  }
}

std::uint64_t ModelBundle::parameter_fingerprint() const {
  Fnv1a h;
  h.u64(graph_fingerprint_).u64(modules_.size());
  for (const auto& [name, m] : modules_) h.str(name).u64(m.parameter_fingerprint());
  return h.digest();
}

ModelBundle fit_all(const CausalGraph& graph, const Dataset& dataset,
                    const std::map<std::string, HypothesisSpec>& hypotheses, std::vector<std::string>* warnings) {
  if (auto problems = graph.validate(); !problems.empty())
    throw Error(ErrorCode::invalid_argument, "invalid graph: " + problems.front());
  std::map<std::string, LocalModule> modules;
  for (const auto& node : graph.topo_sort()) {
    const auto parents = graph.parents(node);
    if (parents.empty()) continue;
    const auto it = hypotheses.find(node);
    if (it == hypotheses.end())
      throw Error(ErrorCode::config_error, "no hypothesis declared for non-root node '" + node + "'");
    try {
      modules.emplace(node, fit_local(dataset, node, parents, it->second));
    } catch (const Error& e) {
      throw Error(e.code(), "fitting '" + node + "': " + e.detail());
    }
  }
  if (modules.empty() && warnings) warnings->push_back("graph has no edges; the bundle is empty");
  return ModelBundle(graph.fingerprint(), std::move(modules));
}

std::size_t param_count(const ModelBundle& bundle) {
  std::size_t n = 0;
  for (const auto& [_, m] : bundle.modules()) n += m.parameter_count();
  return n;
}

std::size_t mac_count(const ModelBundle& bundle) {
  std::size_t n = 0;
  for (const auto& [_, m] : bundle.modules()) n += m.mac_count();
  return n;
}

Schema continuous_schema(const CausalGraph& graph) {
  std::vector<VariableSpec> vars;
  for (const auto& n : graph.nodes()) vars.push_back({n, {continuous_column(n)}});
  return Schema(std::move(vars));
}

ModelBundle random_mlp_bundle(const CausalGraph& graph, std::uint64_t seed) {
  std::map<std::string, LocalModule> modules;
  for (const auto& node : graph.nodes()) {
    const auto parents = graph.parents(node);
    if (parents.empty()) continue;
    std::vector<VariableSpec> pspecs;
    for (const auto& p : parents) pspecs.push_back({p, {continuous_column(p)}});
    const std::size_t k = parents.size();
    const std::size_t w = HypothesisSpec::hidden_width(k);
    std::mt19937_64 rng(module_seed(seed, node));
    Network net(k, {w, w}, {Head{HeadLoss::squared, 1}}, rng);
    auto m = LocalModule::network(node, {node, {continuous_column(node)}}, parents, std::move(pspecs),
                                  HypothesisKind::mlp, std::move(net), std::vector<double>(k, 0.0),
                                  std::vector<double>(k, 1.0), {0.0}, {1.0});
    m.seed = module_seed(seed, node);
    modules.emplace(node, std::move(m));
  }
  return ModelBundle(graph.fingerprint(), std::move(modules));
}

}  // namespace pfair
