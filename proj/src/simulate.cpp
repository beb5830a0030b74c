#include "pfair/simulate.hpp"

#include <random>

#include "pfair/error.hpp"

namespace pfair {

void LinearScmParams::validate() const {
  if (!(p_a >= 0.0 && p_a <= 1.0)) throw Error(ErrorCode::invalid_argument, "p_A must lie in [0, 1]");
  for (double s : {sigma_c, sigma_m, sigma_l, sigma_y})
    if (!(s >= 0.0)) throw Error(ErrorCode::invalid_argument, "noise scales must be nonnegative");
}

Schema linear_scm_schema() {
  return Schema({
      {"A", {binary_column("A")}},
      {"C", {continuous_column("C")}},
      {"M", {continuous_column("M")}},
      {"L", {continuous_column("L")}},
      {"Y", {continuous_column("Y")}},
  });
}

CausalGraph linear_scm_graph() {
  return CausalGraph({"A", "C", "M", "L", "Y"},
                     {{"A", "M"}, {"C", "M"}, {"A", "L"}, {"C", "L"}, {"M", "L"},
                      {"A", "Y"}, {"C", "Y"}, {"M", "Y"}, {"L", "Y"}},
                     {{"A", "M"}, {"M", "L"}, {"A", "Y"}, {"M", "Y"}, {"L", "Y"}});
}

Dataset simulate_linear_scm(const LinearScmParams& p, std::size_t n, std::uint64_t seed) {
  p.validate();
  if (n == 0) throw Error(ErrorCode::empty_dataset, "simulation needs n >= 1");

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  std::vector<std::vector<double>> cols(5, std::vector<double>(n));
  for (std::size_t i = 0; i < n; ++i) {
    // Fixed draw order per row keeps rows reproducible.
    const double a = unif(rng) < p.p_a ? 1.0 : 0.0;
    const double ec = gauss(rng), em = gauss(rng), el = gauss(rng), ey = gauss(rng);
    const double c = p.sigma_c * ec;
    const double m = p.a_m * a + p.c_m * c + p.m0 + p.sigma_m * em;
    const double l = p.a_l * a + p.c_l * c + p.m_l * m + p.l0 + p.sigma_l * el;
    const double y = p.a_y * a + p.c_y * c + p.m_y * m + p.l_y * l + p.y0 + p.sigma_y * ey;
    cols[0][i] = a;
    cols[1][i] = c;
    cols[2][i] = m;
    cols[3][i] = l;
    cols[4][i] = y;
  }
  return Dataset(linear_scm_schema(), std::move(cols), std::string("Y"));
}

}  // namespace pfair
