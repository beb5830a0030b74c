#include <doctest.h>

#include <filesystem>

#include "fixtures.hpp"
#include "pfair/bundle_io.hpp"
#include "pfair/error.hpp"

using namespace pfair;

namespace {

ModelBundle mixed_bundle(const Dataset& d) {
  HypothesisSpec mlp;
  mlp.kind = HypothesisKind::mlp;
  mlp.training.epochs = 3;
  mlp.training.seed = 5;
  HypothesisSpec logit;
  logit.kind = HypothesisKind::logistic;
  std::map<std::string, HypothesisSpec> h{{"M", mlp}, {"L", HypothesisSpec()}, {"R", mlp}, {"Y", logit}};
  return fit_all(fixture::census_graph(), d, h);
}

}  // namespace

TEST_CASE("bundle round trip keeps every parameter and prediction") {
  const auto d = fixture::synthetic_census(500, 1);
  const auto bundle = mixed_bundle(d);
  const auto back = bundle_from_json(bundle_to_json(bundle));
  CHECK(back.parameter_fingerprint() == bundle.parameter_fingerprint());
  CHECK(back.graph_fingerprint() == bundle.graph_fingerprint());
  for (const auto& [name, m] : bundle.modules()) {
    const auto& r = back.module(name);
    CHECK(r.kind() == m.kind());
    CHECK(r.parents() == m.parents());
    std::vector<double> raw;
    for (const auto& p : m.parents())
      for (double v : d.node_values(p, 7)) raw.push_back(v);
    CHECK(r.predict(raw) == m.predict(raw));
  }

  const auto path = std::filesystem::temp_directory_path() / "pfair_bundle_test.json";
  save_bundle(bundle, path);
  CHECK(load_bundle(path).parameter_fingerprint() == bundle.parameter_fingerprint());
  std::filesystem::remove(path);
}

TEST_CASE("tampered or foreign bundles are refused") {
  const auto d = fixture::synthetic_census(300, 2);
  const auto bundle = mixed_bundle(d);
  auto j = bundle_to_json(bundle);
  for (auto& m : j["modules"]) {
    if (m["target"]["node"] == "L") m["coefficients"][0][0] = m["coefficients"][0][0].get<double>() + 1e-9;
  }
  try {
    (void)bundle_from_json(j);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::fingerprint_mismatch);
  }

  auto wrong = bundle_to_json(bundle);
  wrong["format"] = "something-else";
  CHECK_THROWS_AS(bundle_from_json(wrong), Error);

  CHECK_NOTHROW(bundle.check_graph(fixture::census_graph()));
  try {
    bundle.check_graph(fixture::worked_graph());
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::fingerprint_mismatch);
  }
}

TEST_CASE("schema pieces round trip") {
  auto col = categorical_column("marital", {"married", "single"});
  col.collapse = {{"Married-civ-spouse", "married"}};
  const auto back = column_from_json(column_to_json(col));
  CHECK(back.name == col.name);
  CHECK(back.levels == col.levels);
  CHECK(back.collapse == col.collapse);
  CHECK(back.kind == col.kind);
  const VariableSpec v{"C", {continuous_column("age"), binary_column("foreign", {"no", "yes"})}};
  const auto vb = variable_from_json(variable_to_json(v));
  CHECK(vb.node == "C");
  CHECK(vb.columns.size() == 2);
  CHECK(vb.columns[1].levels == std::vector<std::string>{"no", "yes"});
}
