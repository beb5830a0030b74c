#include "pfair/cli/config.hpp"

#include <fstream>
#include <set>

#include "pfair/audit.hpp"
#include "pfair/bundle_io.hpp"
#include "pfair/error.hpp"
#include "pfair/fingerprint.hpp"

namespace pfair::cli {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& field, const std::string& why) {
  throw Error(ErrorCode::config_error, field + ": " + why);
}

Edge parse_edge(const json& j, const std::string& field) {
  if (j.is_array() && j.size() == 2 && j[0].is_string() && j[1].is_string())
    return {j[0].get<std::string>(), j[1].get<std::string>()};
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    const auto pos = s.find("->");
    if (pos != std::string::npos && pos > 0 && pos + 2 < s.size()) return {s.substr(0, pos), s.substr(pos + 2)};
  }
  fail(field, "edges are written \"A->B\" or [\"A\", \"B\"], got " + j.dump());
}

std::vector<Edge> parse_edges(const json& j, const std::string& field) {
  if (!j.is_array()) fail(field, "expected a list of edges");
  std::vector<Edge> out;
  for (const auto& e : j) out.push_back(parse_edge(e, field));
  return out;
}

HypothesisSpec parse_hypothesis(const json& j, const HypothesisSpec& base, const std::string& field) {
  if (!j.is_object()) fail(field, "expected an object");
  HypothesisSpec h = base;
  for (const auto& [key, v] : j.items()) {
    if (key == "kind") {
      h.kind = hypothesis_kind_from_string(v.get<std::string>());
    } else if (key == "hidden_layers") {
      h.hidden_layers = v.get<std::size_t>();
    } else if (key == "epochs") {
      h.training.epochs = v.get<std::size_t>();
    } else if (key == "batch_size") {
      h.training.batch_size = v.get<std::size_t>();
    } else if (key == "learning_rate") {
      h.training.learning_rate = v.get<double>();
    } else if (key == "seed") {
      h.training.seed = v.get<std::uint64_t>();
    } else if (key == "singular") {
      const auto s = v.get<std::string>();
      if (s == "fail") h.singular = SingularPolicy::fail;
      else if (s == "min_norm") h.singular = SingularPolicy::min_norm;
      else fail(field + ".singular", "expected fail or min_norm");
    } else {
      fail(field, "unknown key '" + key + "'");
    }
  }
  if (h.training.batch_size == 0) fail(field + ".batch_size", "must be positive");
  if (!(h.training.learning_rate > 0.0)) fail(field + ".learning_rate", "must be positive");
  return h;
}

AnnealingConfig parse_annealing(const json& j, std::uint64_t seed) {
  AnnealingConfig a;
  a.seed = seed;
  for (const auto& [key, v] : j.items()) {
    if (key == "initial_temperature") a.initial_temperature = v.get<double>();
    else if (key == "cooling") a.cooling = v.get<double>();
    else if (key == "iterations") a.iterations = v.get<std::size_t>();
    else if (key == "proposal_scale") a.proposal_scale = v.get<double>();
    else if (key == "restarts") a.restarts = v.get<std::size_t>();
    else if (key == "seed") a.seed = v.get<std::uint64_t>();
    else fail("annealing", "unknown key '" + key + "'");
  }
  try {
    a.validate();
  } catch (const Error& e) {
    fail("annealing", e.detail());
  }
  return a;
}

DataSource parse_data(const json& j, const std::filesystem::path& base) {
  DataSource d;
  if (!j.contains("path")) fail("data.path", "missing");
  d.path = j["path"].get<std::string>();
  if (d.path.is_relative()) d.path = base / d.path;
  for (const auto& [key, v] : j.items()) {
    if (key == "path") continue;
    if (key == "delimiter") {
      const auto s = v.get<std::string>();
      if (s.size() != 1) fail("data.delimiter", "must be one character");
      d.csv.delimiter = s[0];
    } else if (key == "header") {
      d.csv.header = v.get<bool>();
    } else if (key == "columns") {
      d.csv.column_names = v.get<std::vector<std::string>>();
    } else if (key == "skip_lines") {
      d.csv.skip_lines = v.get<std::size_t>();
    } else if (key == "trim") {
      d.csv.trim = v.get<bool>();
    } else if (key == "train_fraction") {
      d.train_fraction = v.get<double>();
      if (!(*d.train_fraction > 0.0 && *d.train_fraction < 1.0)) fail("data.train_fraction", "must lie in (0,1)");
    } else {
      fail("data", "unknown key '" + key + "'");
    }
  }
  if (!d.csv.header && d.csv.column_names.empty()) fail("data.columns", "required when the file has no header");
  return d;
}

}  // namespace

LinearScmParams scm_params_from_json(const json& j) {
  LinearScmParams p;
  const std::map<std::string, double*> fields = {
      {"p_a", &p.p_a},         {"a_m", &p.a_m},         {"c_m", &p.c_m},         {"m0", &p.m0},
      {"a_l", &p.a_l},         {"c_l", &p.c_l},         {"m_l", &p.m_l},         {"l0", &p.l0},
      {"a_y", &p.a_y},         {"c_y", &p.c_y},         {"m_y", &p.m_y},         {"l_y", &p.l_y},
      {"y0", &p.y0},           {"sigma_c", &p.sigma_c}, {"sigma_m", &p.sigma_m}, {"sigma_l", &p.sigma_l},
      {"sigma_y", &p.sigma_y}};
  for (const auto& [key, v] : j.items()) {
    const auto it = fields.find(key);
    if (it == fields.end()) fail("simulation.params", "unknown coefficient '" + key + "'");
    *it->second = v.get<double>();
  }
  try {
    p.validate();
  } catch (const Error& e) {
    fail("simulation.params", e.detail());
  }
  return p;
}

json scm_params_to_json(const LinearScmParams& p) {
  return {{"p_a", p.p_a},         {"a_m", p.a_m},         {"c_m", p.c_m},         {"m0", p.m0},
          {"a_l", p.a_l},         {"c_l", p.c_l},         {"m_l", p.m_l},         {"l0", p.l0},
          {"a_y", p.a_y},         {"c_y", p.c_y},         {"m_y", p.m_y},         {"l_y", p.l_y},
          {"y0", p.y0},           {"sigma_c", p.sigma_c}, {"sigma_m", p.sigma_m}, {"sigma_l", p.sigma_l},
          {"sigma_y", p.sigma_y}};
}

DecouplingOptions ExperimentConfig::decoupling_options() const {
  DecouplingOptions o;
  o.outcome = outcome;
  o.propagation = propagation;
  if (favorable_level && schema) {
    const auto& col = schema->variable(outcome).columns.front();
    o.favorable_level = static_cast<std::size_t>(col.level_value(*favorable_level));
  }
  return o;
}

std::vector<Edge> ExperimentConfig::objectionable() const { return graph ? graph->objectionable() : std::vector<Edge>{}; }

ExperimentConfig parse_config(const json& j, const std::filesystem::path& base_dir) {
  if (!j.is_object()) fail("config", "top level must be an object");
  static const std::set<std::string> known = {
      "seed",       "output_dir",  "graph",       "schema",           "outcome",     "favorable_level",
      "propagation", "hypotheses", "data",        "simulation",       "objectionable", "least_advantaged",
      "annealing",  "oracle",      "thresholds",  "audit",            "report",      "bench"};
  for (const auto& [key, _] : j.items())
    if (!known.contains(key)) fail("config", "unknown key '" + key + "'");

  ExperimentConfig c;
  c.source = j;
  c.base_dir = base_dir;
  try {
    c.seed = j.value("seed", std::uint64_t{0});
    if (j.contains("output_dir")) {
      c.output_dir = j["output_dir"].get<std::string>();
      if (c.output_dir.is_relative()) c.output_dir = base_dir / c.output_dir;
    }

    if (j.contains("simulation")) {
      const auto& s = j["simulation"];
      SimulationConfig sim;
      sim.n = s.value("n", std::size_t{0});
      if (sim.n == 0) fail("simulation.n", "must be positive");
      sim.params = scm_params_from_json(s.value("params", json::object()));
      c.simulation = sim;
    }

    if (j.contains("graph")) {
      const auto& g = j["graph"];
      const auto nodes = g.at("nodes").get<std::vector<std::string>>();
      const auto edges = parse_edges(g.at("edges"), "graph.edges");
      const auto obj = g.contains("objectionable") ? parse_edges(g["objectionable"], "graph.objectionable")
                                                   : std::vector<Edge>{};
      c.graph = CausalGraph(nodes, edges, obj);
    } else if (c.simulation) {
      c.graph = linear_scm_graph();
    }
    if (j.contains("objectionable")) {
      if (!c.graph) fail("objectionable", "needs a graph");
      c.graph = CausalGraph(c.graph->nodes(), c.graph->edges(), parse_edges(j["objectionable"], "objectionable"));
    }
    if (c.graph) {
      if (const auto problems = c.graph->validate(); !problems.empty()) fail("graph", problems.front());
    }

    if (j.contains("schema")) {
      std::vector<VariableSpec> vars;
      for (const auto& v : j["schema"]) vars.push_back(variable_from_json(v));
      c.schema = Schema(std::move(vars));
    } else if (c.simulation) {
      c.schema = linear_scm_schema();
    }
    if (c.schema) {
      if (const auto problems = c.schema->validate(); !problems.empty()) fail("schema", problems.front());
    }
    if (c.graph && c.schema) {
      for (const auto& n : c.graph->nodes())
        if (!c.schema->has_node(n)) fail("schema", "no variable declared for node '" + n + "'");
    }

    c.outcome = j.value("outcome", std::string(c.simulation ? "Y" : ""));
    if (c.graph && !c.outcome.empty()) {
      if (!c.graph->has_node(c.outcome)) fail("outcome", "unknown node '" + c.outcome + "'");
      if (c.graph->parents(c.outcome).empty()) fail("outcome", "'" + c.outcome + "' has no parents");
    }
    if (j.contains("favorable_level")) {
      c.favorable_level = j["favorable_level"].get<std::string>();
      if (!c.schema || c.outcome.empty()) fail("favorable_level", "needs a schema and an outcome");
      const auto& col = c.schema->variable(c.outcome).columns.front();
      if (!col.discrete()) fail("favorable_level", "outcome '" + c.outcome + "' is continuous");
      try {
        col.level_value(*c.favorable_level);
      } catch (const Error& e) {
        fail("favorable_level", e.detail());
      }
    }
    if (j.contains("propagation")) {
      const auto p = j["propagation"].get<std::string>();
      if (p == "hard") c.propagation = Propagation::hard;
      else if (p == "expected") c.propagation = Propagation::expected;
      else fail("propagation", "expected hard or expected");
    }

    HypothesisSpec base;
    base.training.seed = c.seed;
    std::map<std::string, json> per_node;
    if (j.contains("hypotheses")) {
      for (const auto& [key, v] : j["hypotheses"].items()) {
        if (key == "default") base = parse_hypothesis(v, base, "hypotheses.default");
        else per_node[key] = v;
      }
    }
    if (c.graph) {
      for (const auto& [node, _] : per_node)
        if (!c.graph->has_node(node)) fail("hypotheses", "unknown node '" + node + "'");
      const bool have_default = j.contains("hypotheses") && j["hypotheses"].contains("default");
      for (const auto& node : c.graph->nodes()) {
        if (c.graph->parents(node).empty()) continue;
        const auto it = per_node.find(node);
        if (it == per_node.end() && !have_default) continue;  // reported by commands that fit
        HypothesisSpec h = it == per_node.end() ? base : parse_hypothesis(it->second, base, "hypotheses." + node);
        if (c.schema) {
          try {
            h.check_target(c.schema->variable(node));
          } catch (const Error& e) {
            fail("hypotheses." + node, e.detail());
          }
        }
        c.hypotheses[node] = h;
      }
    }

    if (j.contains("data")) c.data = parse_data(j["data"], base_dir);

    if (j.contains("least_advantaged")) {
      c.least_advantaged = predicate_from_json(j["least_advantaged"]);
      if (c.schema) {
        try {
          c.least_advantaged->validate(*c.schema);
        } catch (const Error& e) {
          fail("least_advantaged", e.detail());
        }
      }
    }
    c.annealing = parse_annealing(j.value("annealing", json::object()), c.seed);
    c.oracle = j.value("oracle", false);

    if (j.contains("thresholds")) {
      c.thresholds = j["thresholds"].get<std::vector<double>>();
      for (std::size_t i = 1; i < c.thresholds.size(); ++i)
        if (!(c.thresholds[i] < c.thresholds[i - 1])) fail("thresholds", "must be strictly decreasing");
    } else {
      c.thresholds = default_thresholds();
    }

    if (j.contains("audit")) {
      const auto& a = j["audit"];
      c.audit.kilbertus_seeds = a.value("kilbertus_seeds", c.audit.kilbertus_seeds);
      c.audit.monte_carlo_samples = a.value("monte_carlo_samples", c.audit.monte_carlo_samples);
      c.audit.group_column = a.value("group_column", c.audit.group_column);
      if (c.audit.monte_carlo_samples == 0) fail("audit.monte_carlo_samples", "must be positive");
    }
    if (j.contains("report")) {
      const auto& r = j["report"];
      c.report.group_column = r.value("group_column", std::string());
      c.report.stratum_column = r.value("stratum_column", std::string());
      c.report.threshold = r.value("threshold", 0.5);
      if (c.schema) {
        for (const auto* col : {&c.report.group_column, &c.report.stratum_column}) {
          if (!col->empty() && !c.schema->column_names().empty()) {
            try {
              c.schema->column_index(*col);
            } catch (const Error& e) {
              fail("report", e.detail());
            }
          }
        }
      }
    }
    if (j.contains("bench")) {
      const auto& b = j["bench"];
      c.bench.nodes = b.value("nodes", c.bench.nodes);
      c.bench.degree = b.value("degree", c.bench.degree);
      c.bench.rows = b.value("rows", c.bench.rows);
      if (c.bench.nodes < 2) fail("bench.nodes", "needs at least two nodes");
      if (c.bench.degree > c.bench.nodes - 1) fail("bench.degree", "exceeds nodes - 1");
    }
  } catch (const json::exception& e) {
    fail("config", e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::config_error) throw;
    fail("config", e.what());
  }
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io_error, "cannot open config '" + path.string() + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::config_error, "'" + path.string() + "' is not valid JSON: " + e.what());
  }
  return parse_config(j, path.has_parent_path() ? path.parent_path() : std::filesystem::path("."));
}

std::uint64_t config_hash(const json& j) {
  json canon = j;
  if (canon.is_object()) canon.erase("output_dir");
  return Fnv1a().str(canon.dump()).digest();
}

}  // namespace pfair::cli
