#include <doctest.h>

#include <random>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "pfair/decoupling.hpp"
#include "pfair/error.hpp"
#include "pfair/simulate.hpp"

using namespace pfair;

namespace {

std::map<std::string, double> observed_row(const Dataset& d, const CausalGraph& g, std::size_t row) {
  std::map<std::string, double> out;
  for (const auto& n : g.nodes()) out[n] = d.node_values(n, row).at(0);
  return out;
}

// Raw inputs of `node`'s module, each parent taken from `value`.
template <class F>
std::vector<double> inputs(const CausalGraph& g, const std::string& node, F&& value) {
  std::vector<double> raw;
  for (const auto& p : g.parents(node)) raw.push_back(value(p));
  return raw;
}

DecouplingOptions y_options(Propagation p = Propagation::hard, std::optional<std::size_t> level = std::nullopt) {
  DecouplingOptions o;
  o.outcome = "Y";
  o.propagation = p;
  o.favorable_level = level;
  return o;
}

struct Worked {
  CausalGraph g = fixture::worked_graph();
  Dataset d = fixture::simulate_worked(400, 3);
  ModelBundle linear = fit_all(g, d, fixture::uniform_hypotheses(g, HypothesisSpec()));
};

Worked& worked() {
  static Worked w;
  return w;
}

ReferencePointMap worked_refmap() {
  ReferencePointMap r;
  r.set({"A", "X2"}, 1.0);
  r.set({"X1", "X4"}, -0.4);
  r.set({"A", "Y"}, 0.0);
  r.set({"X1", "Y"}, 0.9);
  r.set({"X2", "Y"}, 0.3);
  return r;
}

}  // namespace

TEST_CASE("empty refmap reproduces the outcome module on observed parents") {
  auto& w = worked();
  const ObservedTable t(w.d, w.g);
  const Decoupler dec(w.g, w.linear, y_options());
  for (std::size_t row = 0; row < 20; ++row) {
    const auto s = dec.instantiate(t, row, {});
    const auto obs = observed_row(w.d, w.g, row);
    const double direct = predict_local(w.linear.module("Y"), inputs(w.g, "Y", [&](auto& p) { return obs.at(p); }));
    CHECK(s.outcome == direct);
    for (const auto& n : w.g.nodes()) CHECK(!s.is_affected(n));
  }
}

TEST_CASE("worked example follows the substitution order") {
  auto& w = worked();
  const auto refmap = worked_refmap();
  const Decoupler dec(w.g, w.linear, y_options());
  const ObservedTable t(w.d, w.g);
  for (std::size_t row = 0; row < 25; ++row) {
    const auto s = dec.instantiate(t, row, refmap);
    auto o = observed_row(w.d, w.g, row);
    const auto& m = w.linear;
    const double x2 = predict_local(m.module("X2"), std::vector<double>{1.0, o["C"], o["X1"]});
    const double x3 = predict_local(m.module("X3"), std::vector<double>{o["C"], x2});
    const double x4 = predict_local(m.module("X4"), std::vector<double>{-0.4, x2});
    const double y = predict_local(m.module("Y"), std::vector<double>{0.0, 0.9, 0.3, x3, x4});
    CHECK(s.value("X2")[0] == x2);
    CHECK(s.value("X3")[0] == x3);
    CHECK(s.value("X4")[0] == x4);
    CHECK(s.outcome == y);
    CHECK(!s.is_affected("X1"));
    CHECK(s.value("X1")[0] == o["X1"]);
    CHECK(s.is_affected("X3"));
    // Supersession: X2 is affected, yet Y reads the reference value.
    CHECK(s.is_affected("X2"));
    CHECK(s.sources.at({"X2", "Y"}) == InputSource::reference_point);
    CHECK(s.sources.at({"X2", "X3"}) == InputSource::downstream_of_reference);
    CHECK(s.sources.at({"C", "X3"}) == InputSource::observed);
  }
}

TEST_CASE("single keyed edge into the outcome shifts by the coefficient") {
  const auto g = linear_scm_graph();
  const auto d = simulate_linear_scm(fixture::linear_params(), 2000, 4);
  const auto b = fit_all(g, d, fixture::uniform_hypotheses(g, HypothesisSpec()));
  const double theta = b.module("Y").coefficient("A");
  ReferencePointMap r;
  r.set({"A", "Y"}, 1.0);
  const auto base = predict_all(g, b, {}, {}, d);
  const auto keyed = predict_all(g, b, r, {}, d);
  const auto a = d.column("A");
  double worst = 0;
  for (std::size_t i = 0; i < d.rows(); ++i)
    worst = std::max(worst, std::abs((keyed.scores[i] - base.scores[i]) - theta * (1.0 - a[i])));
  CHECK(worst <= 1e-10);
}

TEST_CASE("linear bundles agree with recursive substitution") {
  auto& w = worked();
  const auto s = fixture::linear_system(w.g, w.linear);
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  const auto& obj = w.g.objectionable();
  for (int trial = 0; trial < 40; ++trial) {
    ReferencePointMap r;
    std::map<Edge, double> refs;
    for (std::size_t k = 0; k < obj.size(); ++k) {
      if (!((trial >> k) & 1) && trial != 31) continue;
      const double v = obj[k].tail == "A" ? static_cast<double>(trial % 2) : u(rng);
      r.set(obj[k], v);
      refs[obj[k]] = v;
    }
    const auto pred = predict_all(w.g, w.linear, r, {}, w.d);
    double worst = 0;
    for (std::size_t row = 0; row < 50; ++row) {
      const double expect = oracle::substitute(w.g, s, refs, observed_row(w.d, w.g, row), "Y");
      worst = std::max(worst, std::abs(pred.scores[row] - expect));
    }
    CHECK(worst <= 1e-12);
  }
}

TEST_CASE("edge reach") {
  const auto g = fixture::worked_graph();
  ReferencePointMap r;
  CHECK(edge_reach(g, r).empty());
  r.set({"A", "X2"}, 1.0);
  CHECK(edge_reach(g, r) == std::set<std::string>{"X2", "X3", "X4", "Y"});
  ReferencePointMap y;
  y.set({"A", "Y"}, 1.0);
  CHECK(edge_reach(g, y) == std::set<std::string>{"Y"});
}

TEST_CASE("locality, determinism and parameter intactness") {
  auto& w = worked();
  const auto before = w.linear.parameter_fingerprint();
  const auto refmap = worked_refmap();
  const auto reach = edge_reach(w.g, refmap);
  const Decoupler dec(w.g, w.linear, y_options());
  const ObservedTable t(w.d, w.g);
  for (std::size_t row = 0; row < 30; ++row) {
    const auto s = dec.instantiate(t, row, refmap);
    for (const auto& n : w.g.nodes()) {
      if (reach.contains(n)) continue;
      CHECK(!s.is_affected(n));
      CHECK(s.value(n) == w.d.node_values(n, row));
    }
  }
  // Three copies of one row.
  const std::vector<std::size_t> same{5, 5, 5};
  const auto triple = w.d.select_rows(same);
  const auto p = predict_all(w.g, w.linear, refmap, {}, triple);
  CHECK(p.scores[0] == p.scores[1]);
  CHECK(p.scores[1] == p.scores[2]);
  // A single-row dataset equals instantiate_row.
  const std::vector<std::size_t> one{9};
  const auto single = predict_all(w.g, w.linear, refmap, {}, w.d.select_rows(one));
  CHECK(single.scores[0] == instantiate_row(w.g, w.linear, refmap, {}, w.d, 9).outcome);
  CHECK(w.linear.parameter_fingerprint() == before);
}

TEST_CASE("changing one of two edges from the same tail touches only its own head") {
  auto& w = worked();
  const Decoupler dec(w.g, w.linear, y_options());
  const ObservedTable t(w.d, w.g);
  ReferencePointMap r1, r2;
  r1.set({"X1", "X4"}, 0.2);
  r1.set({"X1", "Y"}, 0.5);
  r2 = r1;
  r2.set({"X1", "X4"}, 1.7);
  for (std::size_t row = 0; row < 10; ++row) {
    const auto a = dec.instantiate(t, row, r1), b = dec.instantiate(t, row, r2);
    for (const auto& n : {"A", "C", "X1", "X2", "X3"}) CHECK(a.value(n) == b.value(n));
    CHECK(a.value("X4") != b.value("X4"));
  }
}

TEST_CASE("keying every input of the outcome makes all rows equal") {
  const auto g0 = linear_scm_graph();
  const CausalGraph g(g0.nodes(), g0.edges(), g0.edges());
  const auto d = simulate_linear_scm(fixture::linear_params(), 300, 5);
  const auto b = fit_all(g, d, fixture::uniform_hypotheses(g, HypothesisSpec()));
  ReferencePointMap r;
  r.set({"A", "Y"}, 1.0);
  r.set({"C", "Y"}, 0.2);
  r.set({"M", "Y"}, -0.1);
  r.set({"L", "Y"}, 0.7);
  const auto p = predict_all(g, b, r, {}, d);
  for (double v : p.scores) CHECK(v == p.scores.front());
  // Brute force: the outcome module on the reference values alone.
  CHECK(p.scores.front() == predict_local(b.module("Y"), std::vector<double>{1.0, 0.2, -0.1, 0.7}));
}

TEST_CASE("refmap validation") {
  auto& w = worked();
  const Decoupler dec(w.g, w.linear, y_options());
  ReferencePointMap neutral;
  neutral.set({"C", "X3"}, 0.0);
  try {
    dec.validate(neutral);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::unknown_edge);
  }
  ReferencePointMap bad_level;
  bad_level.set({"A", "Y"}, 2.0);
  try {
    dec.validate(bad_level);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kind_mismatch);
  }
  CHECK_NOTHROW(dec.validate(worked_refmap()));
}

TEST_CASE("module overrides") {
  auto& w = worked();
  const Decoupler dec(w.g, w.linear, y_options());
  const ObservedTable t(w.d, w.g);
  ModuleOverride ov;
  ov["X3"] = Replacement{2, 1, [](std::span<const double>, std::span<double> out) { out[0] = 4.0; }};
  const auto s = dec.instantiate(t, 0, {}, ov);
  CHECK(s.is_affected("X3"));
  CHECK(s.value("X3")[0] == 4.0);
  CHECK(s.is_affected("Y"));
  CHECK(!s.is_affected("X4"));
  auto o = observed_row(w.d, w.g, 0);
  CHECK(s.outcome ==
        predict_local(w.linear.module("Y"), std::vector<double>{o["A"], o["X1"], o["X2"], 4.0, o["X4"]}));

  ModuleOverride wrong;
  wrong["X3"] = Replacement{3, 1, [](std::span<const double>, std::span<double> out) { out[0] = 0.0; }};
  try {
    dec.validate(wrong);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::arity_mismatch);
  }
  const auto from = Replacement::from_module(w.linear.module("X3"));
  ModuleOverride same{{"X3", from}};
  // Replacing a module marks its node affected, so downstream sees the fitted
  // value rather than the observed one.
  auto o1 = observed_row(w.d, w.g, 1);
  const double x3 = predict_local(w.linear.module("X3"), std::vector<double>{o1["C"], o1["X2"]});
  CHECK(dec.instantiate(t, 1, {}, same).outcome ==
        predict_local(w.linear.module("Y"), std::vector<double>{o1["A"], o1["X1"], o1["X2"], x3, o1["X4"]}));
}

TEST_CASE("hard and expected propagation through a categorical mediator") {
  const CausalGraph g({"A", "C", "M", "Y"}, {{"A", "M"}, {"C", "M"}, {"M", "Y"}, {"C", "Y"}}, {{"A", "M"}});
  const auto census = fixture::synthetic_census(800, 6);
  // Reuse sex, age and marital status; the outcome is hours worked.
  const Schema schema({{"A", {binary_column("sex", {"Female", "Male"})}},
                       {"C", {continuous_column("age")}},
                       {"M", {categorical_column("marital-status", {"married", "never-married", "separated"})}},
                       {"Y", {continuous_column("hours-per-week")}}});
  std::vector<std::vector<double>> cols;
  for (const char* c : {"sex", "age", "marital-status", "hours-per-week"}) {
    const auto v = census.column(c);
    cols.emplace_back(v.begin(), v.end());
  }
  const Dataset d(schema, cols);
  HypothesisSpec mlp;
  mlp.kind = HypothesisKind::mlp;
  mlp.training.epochs = 5;
  const auto b = fit_all(g, d, {{"M", mlp}, {"Y", HypothesisSpec()}});
  ReferencePointMap r;
  r.set({"A", "M"}, 1.0);
  const ObservedTable t(d, g);
  const Decoupler hard(g, b, y_options(Propagation::hard));
  const Decoupler soft(g, b, y_options(Propagation::expected));
  for (std::size_t row = 0; row < 10; ++row) {
    const double age = d.value(row, 1);
    const auto probs = b.module("M").predict(std::vector<double>{1.0, age});
    const auto level = hard_values(schema.variable("M"), probs);
    const auto& y = b.module("Y");
    std::vector<double> enc_hard(4, 0.0), enc_soft(4, 0.0);
    enc_hard[0] = enc_soft[0] = age;
    enc_hard[1 + static_cast<std::size_t>(level[0])] = 1.0;
    for (std::size_t k = 0; k < 3; ++k) enc_soft[1 + k] = probs[k];
    // Parents follow node declaration order: C, then M one-hot.
    CHECK(hard.instantiate(t, row, r).outcome == doctest::Approx(y.predict_encoded(enc_hard)[0]).epsilon(1e-14));
    CHECK(soft.instantiate(t, row, r).outcome == doctest::Approx(y.predict_encoded(enc_soft)[0]).epsilon(1e-14));
    CHECK(hard.instantiate(t, row, r).value("M") == level);
  }
}

TEST_CASE("discrete outcome scores and refmap json") {
  const auto d = fixture::synthetic_census(600, 7);
  const auto g = fixture::census_graph();
  HypothesisSpec logit;
  logit.kind = HypothesisKind::logistic;
  HypothesisSpec mlp;
  mlp.kind = HypothesisKind::mlp;
  mlp.training.epochs = 2;
  const auto b = fit_all(g, d, {{"M", mlp}, {"L", HypothesisSpec()}, {"R", mlp}, {"Y", logit}});
  const ObservedTable t(d, g);
  const Decoupler pos(g, b, y_options());
  const Decoupler neg(g, b, y_options(Propagation::hard, 0));
  const auto s = pos.instantiate(t, 3, {});
  CHECK(s.outcome == s.outcome_output[0]);
  CHECK(neg.instantiate(t, 3, {}).outcome == doctest::Approx(1.0 - s.outcome).epsilon(1e-15));

  // The outcome defaults to the node owning the dataset's target column.
  CHECK(predict_all(g, b, {}, {}, d).scores[3] == s.outcome);

  ReferencePointMap r;
  r.set({"A", "Y"}, 0.0);
  r.set({"M", "Y"}, 0.0);
  const auto j = refmap_to_json(r, pos);
  CHECK(j.dump().find("Female") != std::string::npos);
  CHECK(j.dump().find("married") != std::string::npos);
  CHECK(refmap_from_json(j, pos) == r);
}
