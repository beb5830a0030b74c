#include "fixtures.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace fixture {

using pfair::CausalGraph;
using pfair::Edge;

pfair::LinearScmParams linear_params() {
  pfair::LinearScmParams p;
  p.p_a = 0.4;
  p.a_m = 0.8, p.c_m = 0.6, p.m0 = 0.1;
  p.a_l = 0.5, p.c_l = 0.5, p.m_l = 0.7, p.l0 = 0.1;
  p.a_y = 0.4, p.c_y = 0.5, p.m_y = 0.6, p.l_y = 0.3, p.y0 = 0.1;
  p.sigma_c = p.sigma_m = p.sigma_l = p.sigma_y = 0.3;
  return p;
}

pfair::LinearScmParams noiseless_params() {
  auto p = linear_params();
  p.sigma_m = p.sigma_l = p.sigma_y = 0.0;
  return p;
}

CausalGraph worked_graph() {
  return CausalGraph({"A", "C", "X1", "X2", "X3", "X4", "Y"},
                     {{"A", "X1"}, {"C", "X1"}, {"A", "X2"}, {"C", "X2"}, {"X1", "X2"}, {"C", "X3"},
                      {"X2", "X3"}, {"X1", "X4"}, {"X2", "X4"}, {"A", "Y"}, {"X1", "Y"}, {"X2", "Y"},
                      {"X3", "Y"}, {"X4", "Y"}},
                     {{"A", "X2"}, {"X1", "X4"}, {"A", "Y"}, {"X1", "Y"}, {"X2", "Y"}});
}

pfair::Dataset simulate_worked(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution coin(0.5);
  std::normal_distribution<double> z(0.0, 1.0);
  std::vector<std::vector<double>> cols(7, std::vector<double>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const double a = coin(rng) ? 1.0 : 0.0;
    const double c = z(rng);
    const double x1 = 0.8 * a + 0.5 * c + 0.3 * z(rng);
    const double x2 = 0.6 * a + 0.3 * c + 0.7 * x1 + 0.3 * z(rng);
    const double x3 = 0.4 * c + 0.5 * std::tanh(x2) + 0.3 * z(rng);
    const double x4 = 0.5 * x1 - 0.3 * x2 + 0.3 * z(rng);
    const double y = 0.5 * a + 0.4 * x1 + 0.3 * x2 * x2 + 0.6 * x3 + 0.2 * x4 + 0.3 * z(rng);
    const double row[7] = {a, c, x1, x2, x3, x4, y};
    for (std::size_t k = 0; k < 7; ++k) cols[k][i] = row[k];
  }
  std::vector<pfair::VariableSpec> vars;
  vars.push_back({"A", {pfair::binary_column("A")}});
  for (const char* name : {"C", "X1", "X2", "X3", "X4", "Y"}) vars.push_back({name, {pfair::continuous_column(name)}});
  return pfair::Dataset(pfair::Schema(std::move(vars)), std::move(cols), std::string("Y"));
}

CausalGraph census_graph() {
  std::vector<Edge> edges;
  const std::vector<std::pair<std::string, std::vector<std::string>>> parents = {
      {"M", {"A", "C"}}, {"L", {"A", "C", "M"}}, {"R", {"A", "C", "M", "L"}}, {"Y", {"A", "C", "M", "L", "R"}}};
  for (const auto& [head, tails] : parents)
    for (const auto& t : tails) edges.push_back({t, head});
  return CausalGraph({"A", "C", "M", "L", "R", "Y"}, edges, {{"A", "Y"}, {"M", "Y"}});
}

pfair::Schema census_schema() {
  using namespace pfair;
  return Schema({
      {"A", {binary_column("sex", {"Female", "Male"})}},
      {"C", {continuous_column("age"), categorical_column("native-country", {"United-States", "Other"})}},
      {"M", {categorical_column("marital-status", {"married", "never-married", "separated"})}},
      {"L", {continuous_column("education-num")}},
      {"R", {categorical_column("workclass", {"Private", "Self-emp", "Gov"}), continuous_column("hours-per-week")}},
      {"Y", {binary_column("income", {"<=50K", ">50K"})}},
  });
}

pfair::Dataset synthetic_census(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> z(0.0, 1.0);
  std::vector<std::vector<double>> cols(8, std::vector<double>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const double male = u(rng) < 0.67 ? 1.0 : 0.0;
    const double age = std::clamp(38.0 + 13.0 * z(rng), 17.0, 90.0);
    const double foreign = u(rng) < 0.1 ? 1.0 : 0.0;
    const double ya = (age - 38.0) / 13.0;
    // Marital status: married is far more common among men in this sample.
    const double p_married = 1.0 / (1.0 + std::exp(-(-1.2 + 1.8 * male + 1.2 * ya)));
    double marital;
    if (u(rng) < p_married) marital = 0.0;
    else marital = u(rng) < 0.6 - 0.2 * ya ? 1.0 : 2.0;
    const double edu = std::clamp(std::round(10.0 + 0.4 * male - 0.5 * foreign + 0.6 * (marital == 0.0) +
                                                 2.4 * z(rng)),
                                  1.0, 16.0);
    const double r = u(rng);
    const double work = r < 0.7 ? 0.0 : (r < 0.82 + 0.03 * male ? 1.0 : 2.0);
    const double hours = std::clamp(40.0 + 4.0 * male + 2.0 * (marital == 0.0) + 0.6 * (edu - 10.0) + 10.0 * z(rng),
                                    1.0, 99.0);
    const double logit = -3.2 + 0.9 * male + 2.0 * (marital == 0.0) + 0.35 * (edu - 10.0) + 0.5 * ya +
                         0.03 * (hours - 40.0) + 0.4 * (work == 1.0) - 0.3 * foreign;
    const double income = u(rng) < 1.0 / (1.0 + std::exp(-logit)) ? 1.0 : 0.0;
    const double row[8] = {male, age, foreign, marital, edu, work, hours, income};
    for (std::size_t k = 0; k < 8; ++k) cols[k][i] = row[k];
  }
  return pfair::Dataset(census_schema(), std::move(cols), std::string("income"));
}

CausalGraph binary_graph() {
  return CausalGraph({"A", "B", "C", "M", "Y"},
                     {{"A", "M"}, {"B", "M"}, {"A", "Y"}, {"B", "Y"}, {"M", "Y"}, {"C", "Y"}},
                     {{"A", "M"}, {"A", "Y"}, {"M", "Y"}});
}

pfair::Dataset simulate_binary(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> z(0.0, 1.0);
  std::vector<std::vector<double>> cols(5, std::vector<double>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const double a = u(rng) < 0.5 ? 1.0 : 0.0;
    const double b = u(rng) < 0.4 ? 1.0 : 0.0;
    const double c = z(rng);
    const double m = u(rng) < 0.2 + 0.5 * a - 0.1 * b ? 1.0 : 0.0;
    const double y = 0.5 * a - 0.7 * b + 0.8 * m - 1.2 * a * m + 0.3 * c + 0.2 * z(rng);
    const double row[5] = {a, b, c, m, y};
    for (std::size_t k = 0; k < 5; ++k) cols[k][i] = row[k];
  }
  pfair::Schema schema({{"A", {pfair::binary_column("A")}},
                        {"B", {pfair::binary_column("B")}},
                        {"C", {pfair::continuous_column("C")}},
                        {"M", {pfair::binary_column("M")}},
                        {"Y", {pfair::continuous_column("Y")}}});
  return pfair::Dataset(std::move(schema), std::move(cols), std::string("Y"));
}

oracle::LinearSystem linear_system(const CausalGraph& g, const pfair::ModelBundle& bundle) {
  oracle::LinearSystem s;
  for (const auto& e : g.edges()) s.weight[e] = bundle.module(e.head).coefficient(e.tail);
  for (const auto& [node, m] : bundle.modules()) s.intercept[node] = m.coefficient("intercept");
  return s;
}

std::map<std::string, pfair::HypothesisSpec> uniform_hypotheses(const CausalGraph& g, pfair::HypothesisSpec spec) {
  std::map<std::string, pfair::HypothesisSpec> out;
  for (const auto& n : g.nodes())
    if (!g.parents(n).empty()) out[n] = spec;
  return out;
}

}  // namespace fixture
