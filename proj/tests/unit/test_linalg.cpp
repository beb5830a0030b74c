#include <doctest.h>

#include <random>
#include <vector>

#include "oracles.hpp"
#include "pfair/error.hpp"
#include "pfair/kernels.hpp"
#include "pfair/linalg.hpp"

using namespace pfair;

TEST_CASE("least squares matches the long-double oracle") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> z(0.0, 1.0);
  const std::size_t n = 2000, p = 4;
  std::vector<double> design, y;
  std::vector<std::vector<double>> rows;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> r{z(rng), z(rng), 3.0 + z(rng), 1.0};
    y.push_back(0.3 * r[0] - 1.2 * r[1] + 0.7 * r[2] + 2.0 + 0.5 * z(rng));
    design.insert(design.end(), r.begin(), r.end());
    rows.push_back(r);
  }
  const auto fit = least_squares(design, n, p, y, SingularPolicy::fail);
  const auto ref = oracle::ols(rows, y);
  for (std::size_t j = 0; j < p; ++j) CHECK(std::abs(fit.beta[j] - ref[j]) <= 1e-10);
  CHECK(!fit.rank_deficient);

  double rss = 0;
  for (std::size_t i = 0; i < n; ++i) {
    double e = y[i];
    for (std::size_t j = 0; j < p; ++j) e -= rows[i][j] * ref[j];
    rss += e * e;
  }
  CHECK(fit.residual_sum_squares == doctest::Approx(rss).epsilon(1e-9));
}

TEST_CASE("backends give the same solution") {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> z(0.0, 1.0);
  std::vector<double> design, y;
  for (int i = 0; i < 500; ++i) {
    const double a = z(rng), b = z(rng);
    design.insert(design.end(), {a, b, 1.0});
    y.push_back(a - b + 0.1 * z(rng));
  }
  const auto start = kernels::active();
  kernels::select(kernels::Backend::scalar);
  const auto s = least_squares(design, 500, 3, y, SingularPolicy::fail);
  kernels::select(start);
  const auto v = least_squares(design, 500, 3, y, SingularPolicy::fail);
  for (int j = 0; j < 3; ++j) CHECK(std::abs(s.beta[j] - v.beta[j]) <= 1e-12);
}

TEST_CASE("collinear designs") {
  // Second column duplicates the first.
  std::vector<double> design, y;
  for (int i = 0; i < 20; ++i) {
    const double x = i * 0.1;
    design.insert(design.end(), {x, x, 1.0});
    y.push_back(4.0 * x + 1.0);
  }
  CHECK_THROWS_AS(least_squares(design, 20, 3, y, SingularPolicy::fail), Error);
  const auto fit = least_squares(design, 20, 3, y, SingularPolicy::min_norm);
  CHECK(fit.rank_deficient);
  // Minimum norm splits the weight evenly.
  CHECK(fit.beta[0] == doctest::Approx(2.0).epsilon(1e-8));
  CHECK(fit.beta[1] == doctest::Approx(2.0).epsilon(1e-8));
  CHECK(fit.beta[2] == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(fit.residual_sum_squares < 1e-16);

  try {
    (void)least_squares(std::span<const double>(design).first(6), 2, 3, std::span<const double>(y).first(2),
                        SingularPolicy::min_norm);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::singular_design);
  }
}

TEST_CASE("spd solve") {
  const std::vector<double> m{4, 1, 1, 3};
  const std::vector<double> b{1, 2};
  std::vector<double> x(2);
  REQUIRE(solve_spd(m, b, 2, x));
  CHECK(x[0] == doctest::Approx(1.0 / 11.0));
  CHECK(x[1] == doctest::Approx(7.0 / 11.0));
  const std::vector<double> indefinite{1, 2, 2, 1};
  CHECK(!solve_spd(indefinite, b, 2, x));
}
