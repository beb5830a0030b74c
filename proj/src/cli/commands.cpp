#include "pfair/cli/commands.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <random>
#include <sstream>

#include "pfair/audit.hpp"
#include "pfair/bundle_io.hpp"
#include "pfair/csv.hpp"
#include "pfair/error.hpp"
#include "pfair/fingerprint.hpp"
#include "pfair/kernels.hpp"
#include "pfair/reports.hpp"

namespace pfair::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr const char* kToolVersion = "0.1.0";

class Manifest {
 public:
  Manifest(std::string command, const ExperimentConfig& config, fs::path dir)
      : command_(std::move(command)), config_(config), dir_(std::move(dir)) {
    fs::create_directories(dir_);
  }

  template <typename F>
  auto stage(const std::string& name, F&& f) {
    const auto t0 = std::chrono::steady_clock::now();
    if constexpr (std::is_void_v<decltype(f())>) {
      f();
      record(name, t0);
    } else {
      auto r = f();
      record(name, t0);
      return r;
    }
  }

  fs::path file(const std::string& name) {
    const fs::path p = dir_ / name;
    result_.outputs.push_back(p);
    return p;
  }

  void seed(const std::string& name, std::uint64_t value) { seeds_[name] = value; }
  void note(std::string text) { result_.warnings.push_back(std::move(text)); }

  RunResult finish() {
    json outputs = json::array();
    for (const auto& p : result_.outputs) outputs.push_back(p.filename().string());
    const fs::path mpath = dir_ / ("manifest-" + command_ + ".json");
    outputs.push_back(mpath.filename().string());
    json m{{"command", command_},
           {"config_hash", to_hex(config_hash(config_.source))},
           {"versions", {{"tool", kToolVersion}, {"bundle_format", kBundleFormatVersion}}},
           {"kernel_backend", std::string(kernels::to_string(kernels::active()))},
           {"seeds", seeds_},
           {"timings_seconds", timings_},
           {"warnings", result_.warnings},
           {"outputs", outputs}};
    write_text_file(mpath, m.dump(2) + "\n");
    result_.manifest = mpath;
    result_.outputs.push_back(mpath);
    return result_;
  }

 private:
  void record(const std::string& name, std::chrono::steady_clock::time_point t0) {
    timings_[name] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }

  std::string command_;
  const ExperimentConfig& config_;
  fs::path dir_;
  json timings_ = json::object();
  json seeds_ = json::object();
  RunResult result_;
};

const CausalGraph& need_graph(const ExperimentConfig& c) {
  if (!c.graph) throw Error(ErrorCode::config_error, "graph: required by this command");
  return *c.graph;
}

const Schema& need_schema(const ExperimentConfig& c) {
  if (!c.schema) throw Error(ErrorCode::config_error, "schema: required by this command");
  return *c.schema;
}

Dataset load_data(const ExperimentConfig& c, const CommandOptions& o) {
  const Schema& schema = need_schema(c);
  CsvOptions csv = c.data ? c.data->csv : CsvOptions{};
  // The dataset target is a column; the outcome is a node.
  if (!c.outcome.empty()) csv.target = schema.variable(c.outcome).columns.front().name;
  fs::path path;
  if (o.data) path = *o.data;
  else if (c.data) path = c.data->path;
  else throw Error(ErrorCode::config_error, "data: no dataset given (config data.path or --data)");
  return ingest_csv(path, schema, csv);
}

struct Splits {
  Dataset train, eval;
};

Splits split_data(const ExperimentConfig& c, Dataset data, Manifest& m) {
  if (!c.data || !c.data->train_fraction) return {data, data};
  auto s = split(data, FractionSplit{*c.data->train_fraction}, c.seed);
  for (auto& w : s.warnings) m.note(w);
  m.seed("split", c.seed);
  return {std::move(s.train), std::move(s.test)};
}

fs::path bundle_path(const CommandOptions& o, const fs::path& out) {
  return o.bundle ? *o.bundle : out / "bundle.json";
}

std::string num(double v) { return format_number(v); }

std::vector<std::string> column_labels(const Dataset& d, const std::string& column) {
  const ColumnSpec& spec = d.schema().column(column);
  const auto values = d.column(column);
  std::vector<std::string> out;
  out.reserve(values.size());
  for (double v : values) out.push_back(spec.format(v));
  return out;
}

void require_hypotheses(const ExperimentConfig& c) {
  for (const auto& node : need_graph(c).nodes()) {
    if (!c.graph->parents(node).empty() && !c.hypotheses.contains(node))
      throw Error(ErrorCode::config_error, "hypotheses: no hypothesis declared for non-root node '" + node + "'");
  }
}

}  // namespace

fs::path resolve_output_dir(const ExperimentConfig& config, const CommandOptions& options) {
  if (options.output_dir) return *options.output_dir;
  if (const char* env = std::getenv("PFAIR_OUT_DIR"); env && *env) return env;
  return config.output_dir;
}

RunResult cmd_simulate(const ExperimentConfig& config, const CommandOptions& options) {
  if (!config.simulation) throw Error(ErrorCode::config_error, "simulation: required by simulate");
  Manifest m("simulate", config, resolve_output_dir(config, options));
  m.seed("simulation", config.seed);
  const Dataset d = m.stage("simulate", [&] {
    return simulate_linear_scm(config.simulation->params, config.simulation->n, config.seed);
  });
  m.stage("write", [&] { write_csv(d, m.file("dataset.csv")); });
  return m.finish();
}

RunResult cmd_ingest(const ExperimentConfig& config, const CommandOptions& options) {
  Manifest m("ingest", config, resolve_output_dir(config, options));
  const Dataset d = m.stage("ingest", [&] { return load_data(config, options); });
  m.stage("write", [&] {
    write_csv(d, m.file("ingested.csv"));
    json cols = json::array();
    for (std::size_t c = 0; c < d.schema().column_count(); ++c) {
      const ColumnSpec& spec = d.schema().column(c);
      const auto v = d.column(c);
      json cj{{"name", spec.name}, {"kind", std::string(to_string(spec.kind))}};
      if (spec.discrete()) {
        json counts = json::object();
        std::vector<std::size_t> n(spec.level_count(), 0);
        for (double x : v) ++n[static_cast<std::size_t>(x)];
        for (std::size_t l = 0; l < n.size(); ++l) counts[spec.format(static_cast<double>(l))] = n[l];
        cj["counts"] = counts;
      } else {
        double lo = v[0], hi = v[0], sum = 0.0;
        for (double x : v) {
          lo = std::min(lo, x);
          hi = std::max(hi, x);
          sum += x;
        }
        cj["min"] = lo;
        cj["max"] = hi;
        cj["mean"] = sum / static_cast<double>(v.size());
      }
      cols.push_back(cj);
    }
    write_text_file(m.file("summary.json"), json{{"rows", d.rows()}, {"columns", cols}}.dump(2) + "\n");
  });
  return m.finish();
}

RunResult cmd_fit(const ExperimentConfig& config, const CommandOptions& options) {
  const CausalGraph& graph = need_graph(config);
  require_hypotheses(config);
  const fs::path out = resolve_output_dir(config, options);
  Manifest m("fit", config, out);
  Dataset data = m.stage("ingest", [&] { return load_data(config, options); });
  const Splits s = split_data(config, std::move(data), m);
  for (const auto& [node, h] : config.hypotheses) m.seed("module:" + node, module_seed(h.training.seed, node));
  std::vector<std::string> warnings;
  const ModelBundle bundle = m.stage("fit", [&] { return fit_all(graph, s.train, config.hypotheses, &warnings); });
  for (auto& w : warnings) m.note(w);
  m.stage("write", [&] {
    save_bundle(bundle, m.file("bundle.json"));
    std::ofstream rep(m.file("fit_report.csv"));
    rep << "node,kind,parameters,initial_loss,final_loss,rank_deficient\n";
    for (const auto& [node, mod] : bundle.modules()) {
      rep << node << ',' << to_string(mod.kind()) << ',' << mod.parameter_count() << ',' << num(mod.initial_loss)
          << ',' << num(mod.training_loss) << ',' << (mod.rank_deficient ? 1 : 0) << '\n';
    }
  });
  return m.finish();
}

RunResult cmd_decouple(const ExperimentConfig& config, const CommandOptions& options) {
  const CausalGraph& graph = need_graph(config);
  const fs::path out = resolve_output_dir(config, options);
  Manifest m("decouple", config, out);
  if (!config.least_advantaged) throw Error(ErrorCode::config_error, "least_advantaged: required by decouple");
  Dataset data = m.stage("ingest", [&] { return load_data(config, options); });
  const Splits s = split_data(config, std::move(data), m);
  const ModelBundle bundle = m.stage("load_bundle", [&] { return load_bundle(bundle_path(options, out)); });
  const auto params_before = bundle.parameter_fingerprint();
  const Decoupler dec(graph, bundle, config.decoupling_options());
  const auto edges = config.objectionable();
  m.seed("annealing", config.annealing.seed);

  const SearchResult res =
      m.stage("search", [&] { return optimize(dec, edges, *config.least_advantaged, s.eval, config.annealing); });

  json refj{{"reference_points", refmap_to_json(res.refmap, dec)},
            {"objective", res.objective},
            {"baseline_objective", res.baseline},
            {"identity_objective", res.identity_objective},
            {"evaluations", res.evaluations}};
  if (edges.empty()) refj["note"] = "no objectionable edges: identity map, baseline only";
  if (config.oracle || options.oracle) {
    m.stage("exhaustive", [&] {
      try {
        const auto ex = exhaustive_search(dec, edges, *config.least_advantaged, s.eval);
        refj["exhaustive"] = {{"reference_points", refmap_to_json(ex.refmap, dec)},
                              {"objective", ex.objective},
                              {"candidates", ex.candidates}};
      } catch (const Error& e) {
        if (e.code() != ErrorCode::space_too_large) throw;
        refj["exhaustive"] = {{"skipped", e.detail()}};
      }
    });
  }

  m.stage("report", [&] {
    const ObservedTable table(s.eval, graph);
    NamedPolicy base{"unconstrained", dec.predict(table, {}).scores};
    NamedPolicy fair{"decoupled", dec.predict(table, res.refmap).scores};
    std::string group_col = config.report.group_column;
    if (group_col.empty()) group_col = config.least_advantaged->conditions().front().column;
    const auto groups = column_labels(s.eval, group_col);
    std::vector<std::string> strata;
    if (!config.report.stratum_column.empty()) strata = column_labels(s.eval, config.report.stratum_column);
    const RateTable rates = approval_rates({base, fair}, config.report.threshold, groups,
                                           strata.empty() ? nullptr : &strata, "unconstrained");
    std::ofstream rc(m.file("rates.csv"));
    write_rates_csv(rates, rc);

    json rows = json::array();
    for (const auto& c : rates.cells) {
      if (c.policy != "decoupled") continue;
      const auto& b = rates.at("unconstrained", c.group, c.stratum);
      rows.push_back({{"group", c.group},
                      {"stratum", c.stratum},
                      {"count", c.count},
                      {"baseline_rate", b.rate},
                      {"decoupled_rate", c.rate},
                      {"delta", c.delta}});
    }
    json edges_j = json::array();
    for (const auto& e : edges) edges_j.push_back(to_string(e));
    json report{{"objectionable", edges_j},
                {"reference_points", refmap_to_json(res.refmap, dec)},
                {"threshold", config.report.threshold},
                {"rates", rows}};
    if (edges.empty()) report["note"] = "baseline only";
    write_text_file(m.file("report.json"), report.dump(2) + "\n");
  });

  write_text_file(m.file("refmap.json"), refj.dump(2) + "\n");
  {
    std::ofstream tc(m.file("trace.csv"));
    write_trace_csv(res.trace, edges, dec, tc);
  }
  if (bundle.parameter_fingerprint() != params_before)
    throw Error(ErrorCode::fingerprint_mismatch, "bundle parameters changed during decoupling");
  return m.finish();
}

RunResult cmd_audit(const ExperimentConfig& config, const CommandOptions& options) {
  const fs::path out = resolve_output_dir(config, options);
  Manifest m("audit", config, out);
  Dataset data;
  if (options.data || config.data) {
    data = m.stage("ingest", [&] { return load_data(config, options); });
  } else if (config.simulation) {
    m.seed("simulation", config.seed);
    data = m.stage("simulate", [&] {
      return simulate_linear_scm(config.simulation->params, config.simulation->n, config.seed);
    });
  } else {
    throw Error(ErrorCode::config_error, "audit: needs data or a simulation section");
  }

  std::vector<NamedDeviation> fits;
  m.stage("fit", [&] {
    fits.push_back({"unconstrained", fit_unconstrained_ols(data), {}});
    fits.push_back({"nabi", fit_constrained_nabi(data), {}});
    for (auto seed : config.audit.kilbertus_seeds) {
      m.seed("kilbertus:" + std::to_string(seed), seed);
      try {
        fits.push_back({"kilbertus-" + std::to_string(seed), fit_constrained_kilbertus(data, seed), {}});
      } catch (const Error& e) {
        if (e.code() != ErrorCode::nonconvergence) throw;
        m.note("kilbertus seed " + std::to_string(seed) + ": " + e.detail());
      }
    }
  });

  json pse = json::object();
  for (const auto& f : fits) {
    json theta = json::object();
    for (std::size_t i = 0; i < kSlotCount; ++i) theta[std::string(slot_name(static_cast<Slot>(i)))] = f.fit.theta[i];
    pse[f.name] = {{"pse", compute_pse(f.fit)},
                   {"residual_direct", f.fit.residual_direct},
                   {"residual_indirect", f.fit.residual_indirect},
                   {"objective", f.fit.objective},
                   {"theta", theta}};
  }
  write_text_file(m.file("pse.json"), pse.dump(2) + "\n");

  if (config.simulation) {
    for (auto& f : fits) f.matrix = deviation_matrix(f.fit, config.simulation->params);
    std::ofstream dc(m.file("deviation.csv"));
    write_deviation_csv(fits, dc);
    write_text_file(m.file("deviation.svg"), deviation_heatmap_svg(fits));
  } else {
    m.note("no simulation parameters: deviation matrices skipped");
  }

  m.stage("sweep", [&] {
    const auto a = data.column("A"), c = data.column("C"), mm = data.column("M"), l = data.column("L");
    std::vector<NamedPolicy> policies;
    for (const auto& f : fits) {
      NamedPolicy p{f.name, {}};
      p.predictions.reserve(data.rows());
      if (f.fit.constraint == "none") {
        for (std::size_t r = 0; r < data.rows(); ++r)
          p.predictions.push_back(predict_constrained(f.fit, ScmRow{a[r], c[r], mm[r], l[r]}, PlugIn{}));
      } else {
        // Residual scales of the fitted M and L equations.
        double sm = 0.0, sl = 0.0;
        for (std::size_t r = 0; r < data.rows(); ++r) {
          const double em = mm[r] - (f.fit[Slot::a_m] * a[r] + f.fit[Slot::c_m] * c[r] + f.fit[Slot::m0]);
          const double el =
              l[r] - (f.fit[Slot::a_l] * a[r] + f.fit[Slot::c_l] * c[r] + f.fit[Slot::m_l] * mm[r] + f.fit[Slot::l0]);
          sm += em * em;
          sl += el * el;
        }
        MonteCarlo mc;
        mc.samples = config.audit.monte_carlo_samples;
        mc.noise.sigma_m = std::sqrt(sm / static_cast<double>(data.rows()));
        mc.noise.sigma_l = std::sqrt(sl / static_cast<double>(data.rows()));
        for (std::size_t r = 0; r < data.rows(); ++r) {
          mc.seed = Fnv1a().u64(config.seed).str(f.name).u64(r).digest();
          p.predictions.push_back(predict_constrained(f.fit, ScmRow{a[r], c[r], 0.0, 0.0}, mc));
        }
      }
      policies.push_back(std::move(p));
    }
    const auto groups = column_labels(data, config.audit.group_column);
    const SweepTable t = threshold_sweep(policies, config.thresholds, groups);
    std::ofstream sc(m.file("sweep.csv"));
    write_sweep_csv(t, sc);
  });
  return m.finish();
}

RunResult cmd_predict(const ExperimentConfig& config, const CommandOptions& options) {
  const CausalGraph& graph = need_graph(config);
  const fs::path out = resolve_output_dir(config, options);
  Manifest m("predict", config, out);
  const Dataset data = m.stage("ingest", [&] { return load_data(config, options); });
  const ModelBundle bundle = m.stage("load_bundle", [&] { return load_bundle(bundle_path(options, out)); });
  const Decoupler dec(graph, bundle, config.decoupling_options());
  ReferencePointMap refmap;
  if (options.refmap) {
    std::ifstream in(*options.refmap);
    if (!in) throw Error(ErrorCode::io_error, "cannot open '" + options.refmap->string() + "'");
    json j;
    in >> j;
    refmap = refmap_from_json(j.is_object() ? j.at("reference_points") : j, dec);
  }
  const auto pred = m.stage("predict", [&] { return dec.predict(ObservedTable(data, graph), refmap); });
  std::ofstream pc(m.file("predictions.csv"));
  pc << "row,score,affected_nodes\n";
  for (std::size_t r = 0; r < pred.scores.size(); ++r)
    pc << r << ',' << num(pred.scores[r]) << ',' << pred.affected_counts[r] << '\n';
  return m.finish();
}

RunResult cmd_bench_scale(const ExperimentConfig& config, const CommandOptions& options) {
  const fs::path out = resolve_output_dir(config, options);
  Manifest m("bench-scale", config, out);
  m.seed("graph", config.seed);
  const CausalGraph graph =
      m.stage("generate", [&] { return random_dag(config.bench.nodes, config.bench.degree, config.seed); });
  const ModelBundle bundle = m.stage("init", [&] { return random_mlp_bundle(graph, config.seed); });

  const std::size_t n = graph.size();
  const auto order = graph.topo_order();
  std::vector<const LocalModule*> mods(n, nullptr);
  for (std::size_t v = 0; v < n; ++v)
    if (bundle.has_module(graph.nodes()[v])) mods[v] = &bundle.module(graph.nodes()[v]);

  double checksum = 0.0;
  const double seconds = m.stage("forward", [&] {
    std::mt19937_64 rng(config.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> values(n), inputs;
    double out1[1];
    const auto t0 = std::chrono::steady_clock::now();
    for (std::size_t r = 0; r < config.bench.rows; ++r) {
      for (std::size_t v : order) {
        if (!mods[v]) {
          values[v] = normal(rng);
          continue;
        }
        inputs.clear();
        for (std::size_t p : graph.parent_indices(v)) inputs.push_back(values[p]);
        mods[v]->predict_encoded(inputs, out1);
        values[v] = out1[0];
      }
      checksum += values[order.back()];
    }
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  });

  std::size_t edges = graph.edges().size();
  json b{{"nodes", n},
         {"edges", edges},
         {"average_degree", 2.0 * static_cast<double>(edges) / static_cast<double>(n)},
         {"modules", bundle.size()},
         {"parameters", param_count(bundle)},
         {"macs_per_row", mac_count(bundle)},
         {"rows", config.bench.rows},
         {"forward_seconds", seconds},
         {"checksum", checksum}};
  write_text_file(m.file("bench.json"), b.dump(2) + "\n");
  return m.finish();
}

}  // namespace pfair::cli
