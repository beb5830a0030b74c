#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pfair/dataset.hpp"
#include "pfair/simulate.hpp"

namespace pfair {

// Coefficient slots of the five-variable linear SCM, in this order.
enum class Slot : std::size_t { a_m, c_m, m0, a_l, c_l, m_l, l0, a_y, c_y, m_y, l_y, y0 };
inline constexpr std::size_t kSlotCount = 12;

// "A->M", ..., "1->M" for intercepts.
std::string_view slot_name(Slot slot);
Slot slot_from_name(std::string_view name);
// Edge slots (not intercepts) whose edge is not objectionable in the SCM graph.
bool is_neutral_slot(Slot slot);
bool is_intercept_slot(Slot slot);
std::array<double, kSlotCount> slots_of(const LinearScmParams& params);

struct LinearFit {
  std::array<double, kSlotCount> theta{};
  std::string constraint = "none";  // none | nabi | kilbertus
  std::optional<std::uint64_t> seed;
  double objective = 0.0;           // mean squared residual summed over M, L, Y
  double residual_direct = 0.0;     // |theta_A^Y|
  double residual_indirect = 0.0;   // |theta_M^Y + theta_L^Y theta_M^L|
  std::size_t iterations = 0;

  double operator[](Slot s) const { return theta[static_cast<std::size_t>(s)]; }
  double& operator[](Slot s) { return theta[static_cast<std::size_t>(s)]; }
};

// Column names expected by the fitters.
struct ScmColumns {
  std::string a = "A", c = "C", m = "M", l = "L", y = "Y";
};

LinearFit fit_unconstrained_ols(const Dataset& dataset, const ScmColumns& columns = {});
// theta_A^Y = theta_A^M = 0; the rest by restricted least squares.
LinearFit fit_constrained_nabi(const Dataset& dataset, const ScmColumns& columns = {});
// theta_A^Y = 0 and theta_M^Y + theta_L^Y theta_M^L = 0 by an augmented
// Lagrangian with geometrically increasing penalty, from a seed-dependent
// random start. Throws nonconvergence when the constraints are not met to
// 1e-6.
LinearFit fit_constrained_kilbertus(const Dataset& dataset, std::uint64_t seed, const ScmColumns& columns = {});

double compute_pse(const LinearFit& fit);

struct DeviationCell {
  Slot slot{};
  double fitted = 0.0;
  double truth = 0.0;
  double deviation = 0.0;   // relative, or absolute when truth is 0
  bool zero_truth = false;
};

struct DeviationMatrix {
  std::vector<DeviationCell> cells;  // every slot, in Slot order

  const DeviationCell& at(Slot s) const { return cells[static_cast<std::size_t>(s)]; }
  // Largest |relative deviation| over edge slots with nonzero truth.
  double max_abs_edge_deviation() const;
  // Largest |relative deviation| over neutral edge slots.
  double max_abs_neutral_deviation() const;
};

DeviationMatrix deviation_matrix(const LinearFit& fit, const LinearScmParams& truth);

struct ScmRow {
  double a = 0.0, c = 0.0, m = 0.0, l = 0.0;
};

struct NoiseScales {
  std::optional<double> sigma_m, sigma_l, sigma_y;
};

struct PlugIn {};
struct MonteCarlo {
  std::size_t samples = 100000;
  std::uint64_t seed = 0;
  NoiseScales noise;
};

double predict_constrained(const LinearFit& fit, const ScmRow& row, const PlugIn& mode);
// Mean of Y over (M, L) drawn from the fitted structural equations given
// (A, C). Throws missing-sigma.
double predict_constrained(const LinearFit& fit, const ScmRow& row, const MonteCarlo& mode);

struct NamedPolicy {
  std::string name;
  std::vector<double> predictions;
};

struct SweepRow {
  double threshold = 0.0;
  std::vector<double> approval_rates;    // per policy
  std::size_t rejected = 0;              // rows every policy rejects
  std::size_t accepted = 0;              // rows every policy accepts
  std::vector<double> rejected_shares;   // per group, within the rejected cell
  std::vector<double> accepted_shares;
};

struct SweepTable {
  std::vector<std::string> policies;
  std::vector<std::string> groups;       // sorted
  std::vector<double> marginal_shares;   // per group over all rows
  std::vector<SweepRow> rows;
};

// Row is always-rejected iff every policy predicts <= threshold, and
// always-accepted iff every policy predicts > threshold. Shares of an empty
// cell are all zero. Throws length-mismatch or invalid-argument.
SweepTable threshold_sweep(const std::vector<NamedPolicy>& policies, const std::vector<double>& thresholds,
                           const std::vector<std::string>& groups);

// 1.0, 0.9, ..., 0.0
std::vector<double> default_thresholds();

struct RateCell {
  std::string policy, group, stratum;
  std::size_t count = 0;
  double rate = 0.0;   // share of predictions > threshold
  double delta = 0.0;  // rate minus the baseline policy's rate in the same cell
};

struct RateTable {
  std::string baseline;
  std::vector<RateCell> cells;

  // Throws invalid-argument.
  const RateCell& at(const std::string& policy, const std::string& group, const std::string& stratum = "all") const;
};

// Cells per policy, group and stratum, plus a pooled "all" stratum per group.
RateTable approval_rates(const std::vector<NamedPolicy>& policies, double threshold,
                         const std::vector<std::string>& groups, const std::vector<std::string>* strata,
                         const std::string& baseline);

}  // namespace pfair
