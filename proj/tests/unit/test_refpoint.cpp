#include <doctest.h>

#include <numeric>
#include <sstream>

#include "fixtures.hpp"
#include "pfair/error.hpp"
#include "pfair/refpoint_search.hpp"
#include "pfair/simulate.hpp"

using namespace pfair;

namespace {

DecouplingOptions y_outcome() {
  DecouplingOptions o;
  o.outcome = "Y";
  return o;
}

AnnealingConfig quick(std::uint64_t seed) {
  AnnealingConfig c;
  c.iterations = 300;
  c.restarts = 2;
  c.seed = seed;
  return c;
}

struct Linear {
  CausalGraph g = linear_scm_graph();
  Dataset d = simulate_linear_scm(fixture::linear_params(), 3000, 12);
  ModelBundle b = fit_all(g, d, fixture::uniform_hypotheses(g, HypothesisSpec()));
};

Linear& linear() {
  static Linear l;
  return l;
}

struct Binary {
  CausalGraph g = fixture::binary_graph();
  Dataset d = fixture::simulate_binary(1500, 3);
  ModelBundle b = [this] {
    HypothesisSpec mlp;
    mlp.kind = HypothesisKind::mlp;
    mlp.training.epochs = 20;
    mlp.training.learning_rate = 1e-2;
    mlp.training.batch_size = 64;
    return fit_all(g, d, {{"M", mlp}, {"Y", mlp}});
  }();
};

Binary& binary() {
  static Binary b;
  return b;
}

LeastAdvantagedPredicate positive_c() {
  ColumnCondition cond;
  cond.column = "C";
  cond.op = ColumnCondition::Op::range;
  cond.lo = 0.0;
  return LeastAdvantagedPredicate({cond});
}

}  // namespace

TEST_CASE("objective of the empty map is the subgroup baseline") {
  auto& l = linear();
  const auto pred = positive_c();
  const auto rows = pred.select(l.d);
  REQUIRE(!rows.empty());
  const auto all = predict_all(l.g, l.b, {}, {}, l.d);
  double mean = 0;
  for (auto r : rows) mean += all.scores[r];
  mean /= static_cast<double>(rows.size());
  CHECK(objective({}, l.g, l.b, l.d, pred, y_outcome()) == doctest::Approx(mean).epsilon(1e-14));
}

TEST_CASE("linear objective shifts by the coefficient times the mean gap") {
  auto& l = linear();
  const auto pred = positive_c();
  const auto rows = pred.select(l.d);
  const double base = objective({}, l.g, l.b, l.d, pred, y_outcome());
  const double theta = l.b.module("Y").coefficient("A");
  double mean_a = 0;
  for (auto r : rows) mean_a += l.d.column("A")[r];
  mean_a /= static_cast<double>(rows.size());
  for (double ref : {0.0, 1.0}) {
    ReferencePointMap r;
    r.set({"A", "Y"}, ref);
    CHECK(std::abs(objective(r, l.g, l.b, l.d, pred, y_outcome()) - (base + theta * (ref - mean_a))) <= 1e-10);
  }
}

TEST_CASE("empty subgroups are refused") {
  auto& l = linear();
  ColumnCondition cond;
  cond.column = "C";
  cond.op = ColumnCondition::Op::range;
  cond.lo = 1e9;
  try {
    (void)objective({}, l.g, l.b, l.d, LeastAdvantagedPredicate({cond}), y_outcome());
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::empty_subpopulation);
  }
}

TEST_CASE("predicates") {
  auto& l = linear();
  const auto a1 = LeastAdvantagedPredicate::equals("A", "1");
  for (auto r : a1.select(l.d)) CHECK(l.d.column("A")[r] == 1.0);
  CHECK_THROWS_AS(LeastAdvantagedPredicate::equals("Q", "1").validate(l.d.schema()), Error);
  CHECK_THROWS_AS(LeastAdvantagedPredicate::equals("A", "7").validate(l.d.schema()), Error);
  const auto j = predicate_to_json(a1);
  CHECK(predicate_to_json(predicate_from_json(j)) == j);
}

TEST_CASE("single binary edge picks the better level") {
  auto& l = linear();
  const Decoupler dec(l.g, l.b, y_outcome());
  REQUIRE(l.b.module("Y").coefficient("A") > 0);
  const auto res = optimize(dec, {{"A", "Y"}}, LeastAdvantagedPredicate::equals("A", "0"), l.d, quick(1));
  CHECK(res.refmap.at({"A", "Y"}) == std::vector<double>{1.0});
  CHECK(res.objective >= res.baseline);
}

TEST_CASE("no objectionable edges leaves the baseline") {
  auto& l = linear();
  const Decoupler dec(l.g, l.b, y_outcome());
  const auto res = optimize(dec, {}, positive_c(), l.d, quick(1));
  CHECK(res.refmap.empty());
  CHECK(res.objective == res.baseline);
}

TEST_CASE("exhaustive search enumerates the full product") {
  auto& b = binary();
  const Decoupler dec(b.g, b.b, y_outcome());
  const auto pred = LeastAdvantagedPredicate::equals("B", "1");
  const auto& edges = b.g.objectionable();
  const auto ex = exhaustive_search(dec, edges, pred, b.d);
  CHECK(ex.candidates == 8);

  // Independent enumeration.
  double best = -1e300;
  ReferencePointMap arg;
  for (int mask = 0; mask < 8; ++mask) {
    ReferencePointMap r;
    for (std::size_t k = 0; k < 3; ++k) r.set(edges[k], static_cast<double>((mask >> (2 - k)) & 1));
    const double v = objective(r, b.g, b.b, b.d, pred, y_outcome());
    if (v > best) best = v, arg = r;
  }
  CHECK(ex.objective == best);
  CHECK(ex.refmap == arg);

  try {
    (void)exhaustive_search(dec, edges, pred, b.d, 4);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::space_too_large);
  }
}

TEST_CASE("continuous tails are refused by exhaustive search") {
  auto& l = linear();
  const Decoupler dec(l.g, l.b, y_outcome());
  try {
    (void)exhaustive_search(dec, {{"M", "Y"}}, positive_c(), l.d);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::space_too_large);
  }
}

TEST_CASE("annealing invariants on a discrete instance") {
  auto& b = binary();
  const Decoupler dec(b.g, b.b, y_outcome());
  const auto pred = LeastAdvantagedPredicate::equals("B", "1");
  const auto& edges = b.g.objectionable();
  const auto ex = exhaustive_search(dec, edges, pred, b.d);
  const auto before = b.b.parameter_fingerprint();
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto res = optimize(dec, edges, pred, b.d, quick(seed));
    CHECK(res.objective >= res.baseline);
    CHECK(res.objective >= res.identity_objective);
    CHECK(res.objective <= ex.objective);
    CHECK(res.objective == doctest::Approx(ex.objective).epsilon(1e-12));
    double running = -1e300;
    std::size_t restart = 0;
    for (const auto& e : res.trace.entries) {
      if (e.restart != restart) running = -1e300, restart = e.restart;
      running = std::max(running, e.objective);
      CHECK(e.best >= running - 1e-15);
    }
  }
  CHECK(b.b.parameter_fingerprint() == before);
}

TEST_CASE("fixed seed gives an identical trace") {
  auto& b = binary();
  const Decoupler dec(b.g, b.b, y_outcome());
  const auto pred = LeastAdvantagedPredicate::equals("B", "1");
  const auto a = optimize(dec, b.g.objectionable(), pred, b.d, quick(7));
  const auto c = optimize(dec, b.g.objectionable(), pred, b.d, quick(7));
  std::ostringstream sa, sc;
  write_trace_csv(a.trace, b.g.objectionable(), dec, sa);
  write_trace_csv(c.trace, b.g.objectionable(), dec, sc);
  CHECK(sa.str() == sc.str());
  CHECK(a.refmap == c.refmap);
  const std::string text = sa.str();
  const auto lines = std::count(text.begin(), text.end(), '\n');
  CHECK(static_cast<std::size_t>(lines) == a.trace.entries.size() + 1);
}

TEST_CASE("scaling the outcome leaves the argmax unchanged") {
  auto& l = linear();
  CausalGraph g(l.g.nodes(), l.g.edges(), {{"A", "M"}, {"A", "Y"}});
  const auto d = l.d;
  const auto b = fit_all(g, d, fixture::uniform_hypotheses(g, HypothesisSpec()));
  auto mods = b.modules();
  const auto& y = mods.at("Y");
  auto coef = y.coefficients();
  for (auto& row : coef)
    for (auto& v : row) v *= 3.5;
  mods["Y"] = LocalModule::linear("Y", y.target_spec(), y.parents(), y.parent_specs(), coef);
  const ModelBundle scaled(b.graph_fingerprint(), mods);
  const auto pred = positive_c();
  const auto e1 = exhaustive_search(Decoupler(g, b, y_outcome()), g.objectionable(), pred, d);
  const auto e2 = exhaustive_search(Decoupler(g, scaled, y_outcome()), g.objectionable(), pred, d);
  CHECK(e1.refmap == e2.refmap);
  CHECK(e2.objective == doctest::Approx(3.5 * e1.objective).epsilon(1e-12));
}

TEST_CASE("continuous proposals stay inside the observed range") {
  auto& l = linear();
  const Decoupler dec(l.g, l.b, y_outcome());
  const auto m = l.d.column("M");
  const auto [lo, hi] = std::minmax_element(m.begin(), m.end());
  const auto res = optimize(dec, {{"M", "Y"}, {"A", "Y"}}, positive_c(), l.d, quick(3));
  for (const auto& e : res.trace.entries) {
    const double v = e.candidate.at({"M", "Y"})[0];
    CHECK(v >= *lo);
    CHECK(v <= *hi);
  }
  CHECK(res.objective >= res.baseline);
  // Linear in the reference, so the best value sits at the favorable end.
  const double theta = l.b.module("Y").coefficient("M");
  CHECK(res.refmap.at({"M", "Y"})[0] == doctest::Approx(theta > 0 ? *hi : *lo).epsilon(0.05));
}

TEST_CASE("identity candidate uses the subgroup mode and mean") {
  auto& l = linear();
  const Decoupler dec(l.g, l.b, y_outcome());
  const auto pred = positive_c();
  SubgroupObjective f(dec, l.d, pred);
  const auto id = identity_candidate(f, {{"A", "Y"}, {"M", "Y"}});
  double ones = 0, msum = 0;
  for (auto r : f.rows()) ones += l.d.column("A")[r], msum += l.d.column("M")[r];
  const double n = static_cast<double>(f.rows().size());
  CHECK(id.at({"A", "Y"})[0] == (ones > n / 2 ? 1.0 : 0.0));
  CHECK(id.at({"M", "Y"})[0] == doctest::Approx(msum / n).epsilon(1e-12));
  const double v1 = f(id);
  const auto evals = f.evaluations();
  CHECK(f(id) == v1);
  CHECK(f.evaluations() == evals);
}

TEST_CASE("annealing config validation") {
  AnnealingConfig c;
  c.cooling = 1.5;
  CHECK_THROWS_AS(c.validate(), Error);
  c = AnnealingConfig();
  c.restarts = 0;
  CHECK_THROWS_AS(c.validate(), Error);
}
