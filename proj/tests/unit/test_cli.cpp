#include <doctest.h>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "fixtures.hpp"
#include "pfair/bundle_io.hpp"
#include "pfair/cli/commands.hpp"
#include "pfair/cli/config.hpp"
#include "pfair/csv.hpp"
#include "pfair/error.hpp"

using nlohmann::json;
namespace fs = std::filesystem;
using namespace pfair;
using namespace pfair::cli;

namespace {

const fs::path kSource = PFAIR_SOURCE_DIR;

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("pfair-cli-" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json read_json(const fs::path& p) { return json::parse(slurp(p)); }

json small_linear() {
  json j = read_json(kSource / "configs/linear_fixture.json");
  j.erase("data");
  j["simulation"]["n"] = 1000;
  j["seed"] = 7;
  return j;
}

// The config error message must name the offending field.
void expect_config_error(const json& j, const std::string& field) {
  try {
    parse_config(j);
    FAIL("accepted an invalid config; expected complaint about " << field);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::config_error);
    CHECK_MESSAGE(std::string(e.what()).find(field) != std::string::npos, e.what());
  }
}

json worked_config(const fs::path& data) {
  json j = read_json(kSource / "configs/worked_example.json");
  j["data"]["path"] = data.string();
  return j;
}

fs::path write_worked_csv(const fs::path& dir, std::size_t n, std::uint64_t seed) {
  const fs::path p = dir / "worked.csv";
  write_csv(fixture::simulate_worked(n, seed), p);
  return p;
}

}  // namespace

TEST_CASE("shipped configs parse") {
  for (const char* name : {"linear_fixture.json", "worked_example.json", "adult.json", "bench.json"}) {
    CAPTURE(name);
    const auto c = load_config(kSource / "configs" / name);
    CHECK(c.base_dir == kSource / "configs");
  }
  const auto adult = load_config(kSource / "configs/adult.json");
  REQUIRE(adult.graph);
  CHECK(adult.objectionable().size() == 2);
  CHECK(adult.hypotheses.size() == 4);
  CHECK(adult.favorable_level == std::optional<std::string>(">50K"));
  const auto& country = adult.schema->column("native-country");
  CHECK(country.format(country.parse("United-States")) == "United-States");
  CHECK(country.format(country.parse("Mexico")) == "Other");
  const auto& marital = adult.schema->column("marital-status");
  CHECK(marital.format(marital.parse("Married-AF-spouse")) == "married");
  CHECK(marital.format(marital.parse("Widowed")) == "separated");
  const auto& income = adult.schema->column("income");
  CHECK(income.parse(">50K.") == income.parse(">50K"));
}

TEST_CASE("config validation names the field") {
  json j = small_linear();
  j["thresholds"] = {0.9, 0.5, 0.5};
  expect_config_error(j, "thresholds");

  j = small_linear();
  j["simulation"]["n"] = 0;
  expect_config_error(j, "simulation.n");

  j = small_linear();
  j["bogus"] = 1;
  expect_config_error(j, "bogus");

  j = small_linear();
  j["annealing"] = {{"cooling", 1.5}};
  expect_config_error(j, "annealing");

  j = small_linear();
  j["hypotheses"] = {{"Q", {{"kind", "linear"}}}};
  expect_config_error(j, "Q");

  j = small_linear();
  j["data"] = {{"path", "x.csv"}, {"train_fraction", 1.0}};
  expect_config_error(j, "data.train_fraction");

  j = worked_config("unused.csv");
  j["graph"]["edges"].push_back("Y->A");
  expect_config_error(j, "cycle");

  j = worked_config("unused.csv");
  j["least_advantaged"] = {{"column", "A"}, {"equals", "7"}};
  expect_config_error(j, "least_advantaged");
}

TEST_CASE("fit refuses a graph with an undeclared hypothesis") {
  const auto dir = scratch("missing-hyp");
  json j = worked_config(write_worked_csv(dir, 200, 1));
  j["hypotheses"] = {{"X1", {{"kind", "linear"}}}, {"X2", {{"kind", "linear"}}}};
  const auto c = parse_config(j);
  CommandOptions o;
  o.output_dir = dir;
  try {
    cmd_fit(c, o);
    FAIL("fit ran without hypotheses for X3");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::config_error);
    CHECK(std::string(e.what()).find("'X3'") != std::string::npos);
  }
}

TEST_CASE("config hash ignores layout and output location") {
  const json a = json::parse(R"({"seed": 1, "outcome": "Y", "simulation": {"n": 5}})");
  const json b = json::parse("{\n  \"simulation\" : { \"n\" : 5 },\n \"outcome\":\"Y\",\"seed\":1}");
  CHECK(config_hash(a) == config_hash(b));
  json c = a;
  c["output_dir"] = "elsewhere";
  CHECK(config_hash(a) == config_hash(c));
  json d = a;
  d["seed"] = 2;
  CHECK(config_hash(a) != config_hash(d));
}

TEST_CASE("output directory precedence") {
  auto c = parse_config(small_linear(), "/base");
  CommandOptions o;
  ::unsetenv("PFAIR_OUT_DIR");
  CHECK(resolve_output_dir(c, o) == fs::path("/base/../out/linear"));
  ::setenv("PFAIR_OUT_DIR", "/env-out", 1);
  CHECK(resolve_output_dir(c, o) == fs::path("/env-out"));
  o.output_dir = "/flag-out";
  CHECK(resolve_output_dir(c, o) == fs::path("/flag-out"));
  ::unsetenv("PFAIR_OUT_DIR");
}

TEST_CASE("simulate is byte-reproducible and re-ingests unchanged") {
  const auto c = parse_config(small_linear());
  const auto d1 = scratch("sim1"), d2 = scratch("sim2");
  CommandOptions o1, o2;
  o1.output_dir = d1;
  o2.output_dir = d2;
  const auto r1 = cmd_simulate(c, o1);
  cmd_simulate(c, o2);
  const std::string csv = slurp(d1 / "dataset.csv");
  CHECK(csv == slurp(d2 / "dataset.csv"));
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 1001);

  CommandOptions oi;
  oi.output_dir = d1;
  oi.data = d1 / "dataset.csv";
  const auto ri = cmd_ingest(c, oi);
  CHECK(slurp(d1 / "ingested.csv") == csv);
  CHECK(read_json(d1 / "summary.json")["rows"] == 1000);

  // Every output is listed in the manifest, including the manifest itself.
  for (const auto& r : {r1, ri}) {
    const json m = read_json(r.manifest);
    CHECK(m["outputs"].size() == r.outputs.size());
    for (const auto& p : r.outputs) {
      CHECK(fs::exists(p));
      bool listed = false;
      for (const auto& name : m["outputs"]) listed = listed || name == p.filename().string();
      CHECK_MESSAGE(listed, p.string());
    }
    CHECK(m["config_hash"].get<std::string>().size() == 16);
  }
}

TEST_CASE("fit, decouple and predict on the worked example") {
  const auto dir = scratch("worked");
  const auto c = parse_config(worked_config(write_worked_csv(dir, 400, 5)));
  CommandOptions o;
  o.output_dir = dir;

  const auto rf = cmd_fit(c, o);
  const auto b1 = load_bundle(dir / "bundle.json");
  CHECK(b1.size() == 5);
  const json mf = read_json(rf.manifest);
  CHECK(mf["seeds"].size() == 5);
  for (const char* stage : {"ingest", "fit", "write"}) CHECK(mf["timings_seconds"].contains(stage));

  cmd_fit(c, o);
  CHECK(load_bundle(dir / "bundle.json").parameter_fingerprint() == b1.parameter_fingerprint());

  o.oracle = true;
  cmd_decouple(c, o);
  const json ref = read_json(dir / "refmap.json");
  CHECK(ref["objective"].get<double>() >= ref["baseline_objective"].get<double>());
  CHECK(ref["objective"].get<double>() >= ref["identity_objective"].get<double>());
  // Continuous tails make the exhaustive space infinite.
  CHECK(ref["exhaustive"].contains("skipped"));
  CHECK(ref["reference_points"].size() == 5);
  const json rep = read_json(dir / "report.json");
  CHECK(rep["rates"].size() == 2);
  CHECK(fs::exists(dir / "trace.csv"));
  CHECK(load_bundle(dir / "bundle.json").parameter_fingerprint() == b1.parameter_fingerprint());

  CommandOptions op = o;
  op.refmap = dir / "refmap.json";
  cmd_predict(c, op);
  const std::string pred = slurp(dir / "predictions.csv");
  CHECK(pred.rfind("row,score,affected_nodes\n", 0) == 0);
  CHECK(std::count(pred.begin(), pred.end(), '\n') == 401);
}

TEST_CASE("decouple without objectionable edges reports the baseline only") {
  const auto dir = scratch("no-edges");
  json j = worked_config(write_worked_csv(dir, 200, 9));
  j["graph"]["objectionable"] = json::array();
  const auto c = parse_config(j);
  CommandOptions o;
  o.output_dir = dir;
  o.oracle = true;
  cmd_fit(c, o);
  cmd_decouple(c, o);
  const json ref = read_json(dir / "refmap.json");
  CHECK(ref["reference_points"].empty());
  CHECK(ref["objective"].get<double>() == ref["baseline_objective"].get<double>());
  CHECK(ref["exhaustive"]["candidates"] == 1);
  CHECK(read_json(dir / "report.json")["note"] == "baseline only");
  for (const auto& row : read_json(dir / "report.json")["rates"]) CHECK(row["delta"].get<double>() == 0.0);
}

TEST_CASE("audit writes PSE, deviation and an eleven-row sweep") {
  const auto dir = scratch("audit");
  json j = small_linear();
  j["simulation"]["n"] = 2000;
  j["audit"]["kilbertus_seeds"] = {1, 2};
  j["audit"]["monte_carlo_samples"] = 32;
  const auto c = parse_config(j);
  CommandOptions o;
  o.output_dir = dir;
  const auto r = cmd_audit(c, o);
  const json pse = read_json(dir / "pse.json");
  for (const char* k : {"unconstrained", "nabi", "kilbertus-1", "kilbertus-2"}) CHECK(pse.contains(k));
  CHECK(std::abs(pse["nabi"]["pse"].get<double>()) < 1e-9);
  const std::string sweep = slurp(dir / "sweep.csv");
  CHECK(std::count(sweep.begin(), sweep.end(), '\n') == 12);
  CHECK(sweep.find("approval_kilbertus-2") != std::string::npos);
  const std::string svg = slurp(dir / "deviation.svg");
  CHECK(svg.rfind("<svg", 0) == 0);
  CHECK(slurp(dir / "deviation.csv").find("kilbertus-2") != std::string::npos);
  CHECK(read_json(r.manifest)["seeds"].contains("kilbertus:2"));
}

TEST_CASE("bench-scale matches hand counts on a small graph") {
  const auto dir = scratch("bench");
  json j = {{"seed", 4}, {"bench", {{"nodes", 8}, {"degree", 2}, {"rows", 50}}}};
  const auto c = parse_config(j);
  CommandOptions o;
  o.output_dir = dir;
  const auto t0 = std::chrono::steady_clock::now();
  cmd_bench_scale(c, o);
  CHECK(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() < 1.0);
  const json b = read_json(dir / "bench.json");

  const auto g = random_dag(8, 2, 4);
  std::size_t params = 0, macs = 0, modules = 0;
  for (std::size_t v = 0; v < g.size(); ++v) {
    const std::size_t k = g.parent_indices(v).size();
    if (k == 0) continue;
    ++modules;
    const std::size_t w = std::max<std::size_t>(5, k);
    // two normalized hidden layers and a scalar head
    params += (k * w + w + 2 * w) + (w * w + w + 2 * w) + (w + 1);
    macs += (k * w + 2 * w) + (w * w + 2 * w) + w;
  }
  CHECK(b["edges"] == g.edges().size());
  CHECK(b["modules"] == modules);
  CHECK(b["parameters"] == params);
  CHECK(b["macs_per_row"] == macs);
}

TEST_CASE("command-line binary") {
  const char* tool = std::getenv("PFAIR_TOOL");
  if (!tool) {
    MESSAGE("PFAIR_TOOL not set; skipping");
    return;
  }
  const auto dir = scratch("binary");
  const fs::path cfg = dir / "cfg.json";
  std::ofstream(cfg) << small_linear().dump(2);
  const std::string base = std::string(tool) + " --simd scalar simulate -c " + cfg.string();
  CHECK(std::system((base + " -o " + (dir / "a").string() + " > /dev/null").c_str()) == 0);
  CHECK(std::system((base + " -o " + (dir / "b").string() + " > /dev/null").c_str()) == 0);
  CHECK(slurp(dir / "a/dataset.csv") == slurp(dir / "b/dataset.csv"));
  CHECK(read_json(dir / "a/manifest-simulate.json")["kernel_backend"] == "scalar");

  std::ofstream(dir / "bad.json") << R"({"simulation": {"n": 0}})";
  const int rc = std::system((std::string(tool) + " simulate -c " + (dir / "bad.json").string() + " 2> " +
                              (dir / "err.txt").string())
                                 .c_str());
  CHECK(rc != 0);
  CHECK(slurp(dir / "err.txt").find("simulation.n") != std::string::npos);
}

TEST_CASE("census config ingests raw census-format lines") {
  const auto dir = scratch("adult");
  const fs::path train = dir / "adult.data", test = dir / "adult.test";
  std::ofstream(train) << "39, State-gov, 77516, Bachelors, 13, Never-married, Adm-clerical, Not-in-family, White, "
                          "Male, 2174, 0, 40, United-States, <=50K\n"
                          "50, Self-emp-not-inc, 83311, Bachelors, 13, Married-civ-spouse, Exec-managerial, Husband, "
                          "White, Male, 0, 0, 13, United-States, >50K\n"
                          "\n"
                          "37, ?, 284582, Masters, 14, Divorced, ?, Wife, White, Female, 0, 0, 40, Cuba, <=50K\n";
  std::ofstream(test) << "|1x3 Cross validator\n"
                         "25, Private, 226802, 11th, 7, Widowed, Machine-op-inspct, Own-child, Black, Female, 0, 0, "
                         "40, ?, >50K.\n";
  const auto c = load_config(kSource / "configs/adult.json");
  CsvOptions csv = c.data->csv;
  csv.target = "income";
  const auto d = ingest_csv(train, *c.schema, csv);
  REQUIRE(d.rows() == 3);
  CHECK(d.target_node() == std::optional<std::string>("Y"));
  const auto& sch = d.schema();
  CHECK(sch.column("marital-status").format(d.value(1, sch.column_index("marital-status"))) == "married");
  CHECK(sch.column("marital-status").format(d.value(2, sch.column_index("marital-status"))) == "separated");
  CHECK(sch.column("workclass").format(d.value(2, sch.column_index("workclass"))) == "?");
  CHECK(sch.column("native-country").format(d.value(2, sch.column_index("native-country"))) == "Other");
  CHECK(sch.column("sex").format(d.value(2, sch.column_index("sex"))) == "Female");

  csv.skip_lines = 1;
  const auto t = ingest_csv(test, *c.schema, csv);
  REQUIRE(t.rows() == 1);
  CHECK(sch.column("income").format(t.value(0, sch.column_index("income"))) == ">50K");
  CHECK(sch.column("native-country").format(t.value(0, sch.column_index("native-country"))) == "Other");

  // The command path maps the outcome node to its column.
  CommandOptions o;
  o.output_dir = dir;
  o.data = train;
  cmd_ingest(c, o);
  CHECK(read_json(dir / "summary.json")["rows"] == 3);
}
