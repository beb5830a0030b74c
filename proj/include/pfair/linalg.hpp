#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace pfair {

enum class SingularPolicy {
  fail,      // throw singular-design-matrix
  min_norm,  // minimum-norm solution, ridge 1e-10 if that is not finite
};

struct LeastSquaresSolution {
  std::vector<double> beta;
  double residual_sum_squares = 0.0;
  bool rank_deficient = false;
};

// Accumulates X^T X and X^T y for a row-major design. gram is p*p row-major,
// xty has p entries; both are added to, not overwritten.
void accumulate_normal_equations(std::span<const double> design_row, double target,
                                 std::span<double> gram, std::span<double> xty);

// Solves gram * beta = xty.
std::vector<double> solve_normal_equations(std::span<const double> gram, std::span<const double> xty,
                                           std::size_t p, SingularPolicy policy, bool* rank_deficient = nullptr);

// Ordinary least squares on a row-major rows x cols design.
LeastSquaresSolution least_squares(std::span<const double> design, std::size_t rows, std::size_t cols,
                                   std::span<const double> target, SingularPolicy policy);

// Dense symmetric solve used by the constrained fitters; returns false when
// the system is not positive definite.
bool solve_spd(std::span<const double> matrix, std::span<const double> rhs, std::size_t p,
               std::span<double> out);

}  // namespace pfair
