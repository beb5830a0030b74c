#include "pfair/linalg.hpp"

#include <Eigen/Dense>
#include <cmath>

#include "pfair/error.hpp"
#include "pfair/kernels.hpp"

namespace pfair {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

bool all_finite(const Eigen::VectorXd& v) { return v.allFinite(); }

constexpr double kRidge = 1e-10;
constexpr double kConditionFloor = 1e-13;

}  // namespace

void accumulate_normal_equations(std::span<const double> design_row, double target,
                                 std::span<double> gram, std::span<double> xty) {
  const std::size_t p = design_row.size();
  for (std::size_t i = 0; i < p; ++i) {
    const double xi = design_row[i];
    if (xi == 0.0) continue;
    kernels::axpy(xi, design_row, gram.subspan(i * p, p));
    xty[i] += xi * target;
  }
}

std::vector<double> solve_normal_equations(std::span<const double> gram, std::span<const double> xty,
                                           std::size_t p, SingularPolicy policy, bool* rank_deficient) {
  if (gram.size() != p * p || xty.size() != p)
    throw Error(ErrorCode::length_mismatch, "normal equation shapes do not agree");
  if (rank_deficient) *rank_deficient = false;
  if (p == 0) return {};

  Eigen::Map<const RowMatrix> g(gram.data(), static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(p));
  Eigen::Map<const Eigen::VectorXd> b(xty.data(), static_cast<Eigen::Index>(p));

  Eigen::LDLT<Eigen::MatrixXd> ldlt(g);
  bool ok = ldlt.info() == Eigen::Success && ldlt.isPositive() && ldlt.rcond() > kConditionFloor;
  // LDLT quietly pseudo-inverts exact zero pivots; treat those as rank loss.
  if (ok) {
    const Eigen::VectorXd d = ldlt.vectorD();
    ok = d.minCoeff() > kConditionFloor * d.cwiseAbs().maxCoeff();
  }
  if (ok) {
    Eigen::VectorXd beta = ldlt.solve(b);
    if (all_finite(beta)) return {beta.data(), beta.data() + p};
  }

  if (policy == SingularPolicy::fail)
    throw Error(ErrorCode::singular_design, "design matrix is singular or numerically rank deficient");
  if (rank_deficient) *rank_deficient = true;

  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(g);
  cod.setThreshold(1e-12);
  Eigen::VectorXd beta = cod.solve(b);
  if (!all_finite(beta)) {
    Eigen::MatrixXd ridge = g;
    ridge.diagonal().array() += kRidge;
    beta = ridge.ldlt().solve(b);
  }
  if (!all_finite(beta)) throw Error(ErrorCode::singular_design, "ridge fallback did not produce a finite solution");
  return {beta.data(), beta.data() + p};
}

LeastSquaresSolution least_squares(std::span<const double> design, std::size_t rows, std::size_t cols,
                                   std::span<const double> target, SingularPolicy policy) {
  if (design.size() != rows * cols || target.size() != rows)
    throw Error(ErrorCode::length_mismatch, "design and target shapes do not agree");
  if (rows < cols) {
    throw Error(ErrorCode::singular_design, std::to_string(rows) + " rows cannot determine " +
                                                std::to_string(cols) + " coefficients");
  }
  std::vector<double> gram(cols * cols, 0.0), xty(cols, 0.0);
  for (std::size_t r = 0; r < rows; ++r)
    accumulate_normal_equations(design.subspan(r * cols, cols), target[r], gram, xty);
  // accumulate_normal_equations fills full rows, so gram is already symmetric.

  LeastSquaresSolution out;
  out.beta = solve_normal_equations(gram, xty, cols, policy, &out.rank_deficient);
  for (std::size_t r = 0; r < rows; ++r) {
    const double e = target[r] - kernels::dot(design.subspan(r * cols, cols), out.beta);
    out.residual_sum_squares += e * e;
  }
  return out;
}

bool solve_spd(std::span<const double> matrix, std::span<const double> rhs, std::size_t p,
               std::span<double> out) {
  Eigen::Map<const RowMatrix> m(matrix.data(), static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(p));
  Eigen::Map<const Eigen::VectorXd> b(rhs.data(), static_cast<Eigen::Index>(p));
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() != Eigen::Success) return false;
  Eigen::VectorXd x = llt.solve(b);
  if (!x.allFinite()) return false;
  for (std::size_t i = 0; i < p; ++i) out[i] = x[static_cast<Eigen::Index>(i)];
  return true;
}

}  // namespace pfair
