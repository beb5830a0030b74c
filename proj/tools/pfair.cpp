// Command-line front end: simulate | ingest | fit | decouple | audit | predict | bench-scale.

#include <CLI11.hpp>
#include <iostream>

#include "pfair/cli/commands.hpp"
#include "pfair/error.hpp"
#include "pfair/kernels.hpp"

namespace {

pfair::kernels::Backend backend_from(const std::string& name) {
  using pfair::kernels::Backend;
  if (name == "scalar") return Backend::scalar;
  if (name == "avx2") return Backend::avx2;
  if (name == "neon") return Backend::neon;
  throw CLI::ValidationError("--simd", "expected scalar, avx2 or neon");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fit local causal modules, decouple objectionable edges and audit constrained baselines"};
  app.require_subcommand(1);

  std::string config_path, simd;
  pfair::cli::CommandOptions opts;
  std::string data, bundle, refmap, out;
  app.add_option("--simd", simd, "Kernel backend (scalar, avx2, neon); defaults to the best available");

  using Fn = pfair::cli::RunResult (*)(const pfair::cli::ExperimentConfig&, const pfair::cli::CommandOptions&);
  struct Cmd {
    const char* name;
    const char* help;
    Fn fn;
  };
  const Cmd cmds[] = {
      {"simulate", "Simulate the linear SCM to CSV", pfair::cli::cmd_simulate},
      {"ingest", "Validate a CSV against the schema", pfair::cli::cmd_ingest},
      {"fit", "Fit one local module per non-root node", pfair::cli::cmd_fit},
      {"decouple", "Search reference points for the least advantaged group", pfair::cli::cmd_decouple},
      {"audit", "PSE, constrained fits, deviation heatmap and threshold sweep", pfair::cli::cmd_audit},
      {"predict", "Predict with a bundle and optional reference points", pfair::cli::cmd_predict},
      {"bench-scale", "Parameter count, MACs and forward timing on a random DAG", pfair::cli::cmd_bench_scale},
  };
  Fn chosen = nullptr;
  for (const auto& c : cmds) {
    auto* sub = app.add_subcommand(c.name, c.help);
    sub->add_option("-c,--config", config_path, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--data", data, "Dataset CSV, overrides the config");
    sub->add_option("--bundle", bundle, "Fitted bundle, defaults to <out>/bundle.json");
    sub->add_option("--refmap", refmap, "Reference points JSON (predict)");
    sub->add_option("-o,--out", out, "Output directory, overrides PFAIR_OUT_DIR and the config");
    sub->add_flag("--oracle", opts.oracle, "Also run the exhaustive search (decouple)");
    sub->callback([&chosen, fn = c.fn] { chosen = fn; });
  }

  CLI11_PARSE(app, argc, argv);

  try {
    if (!simd.empty()) pfair::kernels::select(backend_from(simd));
    if (!data.empty()) opts.data = data;
    if (!bundle.empty()) opts.bundle = bundle;
    if (!refmap.empty()) opts.refmap = refmap;
    if (!out.empty()) opts.output_dir = out;
    const auto config = pfair::cli::load_config(config_path);
    const auto result = chosen(config, opts);
    for (const auto& w : result.warnings) std::cerr << "warning: " << w << '\n';
    for (const auto& p : result.outputs) std::cout << p.string() << '\n';
  } catch (const pfair::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const CLI::Error& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
