#include "pfair/audit.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>

#include "pfair/error.hpp"
#include "pfair/linalg.hpp"

namespace pfair {

namespace {

constexpr std::array<std::string_view, kSlotCount> kSlotNames = {
    "A->M", "C->M", "1->M", "A->L", "C->L", "M->L", "1->L", "A->Y", "C->Y", "M->Y", "L->Y", "1->Y"};

constexpr std::size_t idx(Slot s) { return static_cast<std::size_t>(s); }

// Moment-matrix layout: z = (A, C, M, L, Y, 1).
enum Z : std::size_t { zA, zC, zM, zL, zY, z1, kZ };

struct Block {
  std::vector<std::size_t> regressors;  // z indices
  std::vector<Slot> slots;              // matching theta slots
  std::size_t target;
};

const std::array<Block, 3>& full_blocks() {
  static const std::array<Block, 3> blocks = {
      Block{{zA, zC, z1}, {Slot::a_m, Slot::c_m, Slot::m0}, zM},
      Block{{zA, zC, zM, z1}, {Slot::a_l, Slot::c_l, Slot::m_l, Slot::l0}, zL},
      Block{{zA, zC, zM, zL, z1}, {Slot::a_y, Slot::c_y, Slot::m_y, Slot::l_y, Slot::y0}, zY},
  };
  return blocks;
}

struct ScmData {
  std::size_t n = 0;
  std::array<std::span<const double>, 5> cols;
};

ScmData scm_columns(const Dataset& d, const ScmColumns& c) {
  if (d.empty()) throw Error(ErrorCode::empty_dataset, "cannot fit on zero rows");
  ScmData out;
  out.n = d.rows();
  out.cols = {d.column(c.a), d.column(c.c), d.column(c.m), d.column(c.l), d.column(c.y)};
  return out;
}

double z_value(const ScmData& d, std::size_t z, std::size_t r) { return z == z1 ? 1.0 : d.cols[z][r]; }

// Least squares of one block's target on a subset of its regressors. Slots
// left out stay 0.
void fit_block(const ScmData& d, const Block& b, const std::vector<bool>& keep, LinearFit& fit) {
  std::vector<std::size_t> use;
  for (std::size_t i = 0; i < b.regressors.size(); ++i)
    if (keep[i]) use.push_back(i);
  const std::size_t p = use.size();
  std::vector<double> x(d.n * p), y(d.n);
  for (std::size_t r = 0; r < d.n; ++r) {
    for (std::size_t j = 0; j < p; ++j) x[r * p + j] = z_value(d, b.regressors[use[j]], r);
    y[r] = d.cols[b.target][r];
  }
  const auto sol = least_squares(x, d.n, p, y, SingularPolicy::fail);
  for (std::size_t i = 0; i < b.slots.size(); ++i) fit[b.slots[i]] = 0.0;
  for (std::size_t j = 0; j < p; ++j) fit[b.slots[use[j]]] = sol.beta[j];
}

using Moments = Eigen::Matrix<double, kZ, kZ>;

Moments moments(const ScmData& d) {
  Moments s = Moments::Zero();
  Eigen::Matrix<double, kZ, 1> z;
  for (std::size_t r = 0; r < d.n; ++r) {
    for (std::size_t k = 0; k < kZ; ++k) z[static_cast<Eigen::Index>(k)] = z_value(d, k, r);
    s.noalias() += z * z.transpose();
  }
  return s / static_cast<double>(d.n);
}

// Mean squared residual of the three equations, with gradient and Hessian.
double sse(const Moments& s, const Eigen::VectorXd& theta, Eigen::VectorXd* grad, Eigen::MatrixXd* hess) {
  double f = 0.0;
  if (grad) grad->setZero(kSlotCount);
  if (hess) hess->setZero(kSlotCount, kSlotCount);
  for (const Block& b : full_blocks()) {
    const std::size_t p = b.regressors.size();
    const auto t = static_cast<Eigen::Index>(b.target);
    f += s(t, t);
    for (std::size_t i = 0; i < p; ++i) {
      const auto ri = static_cast<Eigen::Index>(b.regressors[i]);
      const auto si = static_cast<Eigen::Index>(idx(b.slots[i]));
      const double bi = theta[si];
      f -= 2.0 * bi * s(ri, t);
      double g = -2.0 * s(ri, t);
      for (std::size_t j = 0; j < p; ++j) {
        const auto rj = static_cast<Eigen::Index>(b.regressors[j]);
        const auto sj = static_cast<Eigen::Index>(idx(b.slots[j]));
        f += bi * theta[sj] * s(ri, rj);
        g += 2.0 * s(ri, rj) * theta[sj];
        if (hess) (*hess)(si, sj) += 2.0 * s(ri, rj);
      }
      if (grad) (*grad)[si] += g;
    }
  }
  return f;
}

void fill_residuals(LinearFit& fit) {
  fit.residual_direct = std::abs(fit[Slot::a_y]);
  fit.residual_indirect = std::abs(fit[Slot::m_y] + fit[Slot::l_y] * fit[Slot::m_l]);
}

}  // namespace

std::string_view slot_name(Slot slot) { return kSlotNames[idx(slot)]; }

Slot slot_from_name(std::string_view name) {
  for (std::size_t i = 0; i < kSlotCount; ++i)
    if (kSlotNames[i] == name) return static_cast<Slot>(i);
  throw Error(ErrorCode::invalid_argument, "unknown coefficient slot '" + std::string(name) + "'");
}

bool is_intercept_slot(Slot slot) { return slot == Slot::m0 || slot == Slot::l0 || slot == Slot::y0; }

bool is_neutral_slot(Slot slot) {
  return slot == Slot::c_m || slot == Slot::a_l || slot == Slot::c_l || slot == Slot::c_y;
}

std::array<double, kSlotCount> slots_of(const LinearScmParams& p) {
  return {p.a_m, p.c_m, p.m0, p.a_l, p.c_l, p.m_l, p.l0, p.a_y, p.c_y, p.m_y, p.l_y, p.y0};
}

LinearFit fit_unconstrained_ols(const Dataset& dataset, const ScmColumns& columns) {
  const ScmData d = scm_columns(dataset, columns);
  LinearFit fit;
  for (const Block& b : full_blocks()) fit_block(d, b, std::vector<bool>(b.regressors.size(), true), fit);
  Eigen::VectorXd theta = Eigen::Map<const Eigen::VectorXd>(fit.theta.data(), kSlotCount);
  fit.objective = sse(moments(d), theta, nullptr, nullptr);
  fill_residuals(fit);
  return fit;
}

LinearFit fit_constrained_nabi(const Dataset& dataset, const ScmColumns& columns) {
  const ScmData d = scm_columns(dataset, columns);
  const auto& b = full_blocks();
  LinearFit fit;
  fit.constraint = "nabi";
  fit_block(d, b[0], {false, true, true}, fit);              // M on C, 1
  fit_block(d, b[1], {true, true, true, true}, fit);         // L on A, C, M, 1
  fit_block(d, b[2], {false, true, true, true, true}, fit);  // Y on C, M, L, 1
  Eigen::VectorXd theta = Eigen::Map<const Eigen::VectorXd>(fit.theta.data(), kSlotCount);
  fit.objective = sse(moments(d), theta, nullptr, nullptr);
  fill_residuals(fit);
  return fit;
}

LinearFit fit_constrained_kilbertus(const Dataset& dataset, std::uint64_t seed, const ScmColumns& columns) {
  const ScmData d = scm_columns(dataset, columns);
  const Moments s = moments(d);

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> init(-3.0, 3.0);
  Eigen::VectorXd theta(kSlotCount);
  for (Eigen::Index i = 0; i < theta.size(); ++i) theta[i] = init(rng);

  const auto ay = static_cast<Eigen::Index>(idx(Slot::a_y));
  const auto my = static_cast<Eigen::Index>(idx(Slot::m_y));
  const auto ly = static_cast<Eigen::Index>(idx(Slot::l_y));
  const auto ml = static_cast<Eigen::Index>(idx(Slot::m_l));

  double lambda1 = 0.0, lambda2 = 0.0, mu = 10.0;
  auto constraints = [&](const Eigen::VectorXd& t) { return std::pair{t[ay], t[my] + t[ly] * t[ml]}; };
  auto merit = [&](const Eigen::VectorXd& t) {
    const auto [c1, c2] = constraints(t);
    return sse(s, t, nullptr, nullptr) + lambda1 * c1 + lambda2 * c2 + 0.5 * mu * (c1 * c1 + c2 * c2);
  };

  std::size_t total_iterations = 0;
  double prev_violation = std::numeric_limits<double>::infinity();
  constexpr std::size_t kOuter = 80, kInner = 400;
  constexpr double kTarget = 1e-10;
  bool done = false;

  for (std::size_t outer = 0; outer < kOuter && !done; ++outer) {
    for (std::size_t inner = 0; inner < kInner; ++inner) {
      ++total_iterations;
      Eigen::VectorXd g;
      Eigen::MatrixXd h;
      sse(s, theta, &g, &h);
      const auto [c1, c2] = constraints(theta);
      const double w1 = lambda1 + mu * c1, w2 = lambda2 + mu * c2;
      Eigen::VectorXd dc1 = Eigen::VectorXd::Zero(kSlotCount), dc2 = Eigen::VectorXd::Zero(kSlotCount);
      dc1[ay] = 1.0;
      dc2[my] = 1.0;
      dc2[ly] = theta[ml];
      dc2[ml] = theta[ly];
      g += w1 * dc1 + w2 * dc2;
      h += mu * (dc1 * dc1.transpose() + dc2 * dc2.transpose());
      h(ly, ml) += w2;
      h(ml, ly) += w2;
      if (g.lpNorm<Eigen::Infinity>() < 1e-13 * std::max(1.0, mu)) break;

      // Damped Newton step; damping grows until the system is positive definite.
      Eigen::VectorXd step;
      double tau = 0.0;
      for (int attempt = 0; attempt < 40; ++attempt) {
        Eigen::MatrixXd hd = h;
        hd.diagonal().array() += tau;
        Eigen::LLT<Eigen::MatrixXd> llt(hd);
        if (llt.info() == Eigen::Success) {
          step = -llt.solve(g);
          if (step.allFinite()) break;
        }
        tau = tau == 0.0 ? 1e-8 * std::max(1.0, h.diagonal().cwiseAbs().maxCoeff()) : tau * 10.0;
        step.resize(0);
      }
      if (step.size() == 0) break;
      const double f0 = merit(theta);
      const double slope = g.dot(step);
      double alpha = 1.0;
      Eigen::VectorXd next = theta + step;
      while (merit(next) > f0 + 1e-4 * alpha * slope && alpha > 1e-12) {
        alpha *= 0.5;
        next = theta + alpha * step;
      }
      const double moved = (next - theta).lpNorm<Eigen::Infinity>();
      theta = next;
      if (moved < 1e-15 * std::max(1.0, theta.lpNorm<Eigen::Infinity>())) break;
    }
    const auto [c1, c2] = constraints(theta);
    const double violation = std::max(std::abs(c1), std::abs(c2));
    if (violation <= kTarget) {
      done = true;
      break;
    }
    lambda1 += mu * c1;
    lambda2 += mu * c2;
    if (violation > 0.25 * prev_violation) mu = std::min(mu * 10.0, 1e12);
    prev_violation = violation;
  }

  LinearFit fit;
  fit.constraint = "kilbertus";
  fit.seed = seed;
  for (std::size_t i = 0; i < kSlotCount; ++i) fit.theta[i] = theta[static_cast<Eigen::Index>(i)];
  fit.objective = sse(s, theta, nullptr, nullptr);
  fit.iterations = total_iterations;
  fill_residuals(fit);
  if (!std::isfinite(fit.objective) || fit.residual_direct > 1e-6 || fit.residual_indirect > 1e-6) {
    throw Error(ErrorCode::nonconvergence, "constraint residuals " + std::to_string(fit.residual_direct) + ", " +
                                               std::to_string(fit.residual_indirect) + " after " +
                                               std::to_string(total_iterations) + " iterations");
  }
  return fit;
}

double compute_pse(const LinearFit& fit) {
  return fit[Slot::a_y] + fit[Slot::a_m] * (fit[Slot::m_y] + fit[Slot::l_y] * fit[Slot::m_l]);
}

double DeviationMatrix::max_abs_edge_deviation() const {
  double m = 0.0;
  for (const auto& c : cells)
    if (!is_intercept_slot(c.slot) && !c.zero_truth) m = std::max(m, std::abs(c.deviation));
  return m;
}

double DeviationMatrix::max_abs_neutral_deviation() const {
  double m = 0.0;
  for (const auto& c : cells)
    if (is_neutral_slot(c.slot) && !c.zero_truth) m = std::max(m, std::abs(c.deviation));
  return m;
}

DeviationMatrix deviation_matrix(const LinearFit& fit, const LinearScmParams& truth) {
  const auto t = slots_of(truth);
  DeviationMatrix out;
  for (std::size_t i = 0; i < kSlotCount; ++i) {
    DeviationCell c;
    c.slot = static_cast<Slot>(i);
    c.fitted = fit.theta[i];
    c.truth = t[i];
    c.zero_truth = t[i] == 0.0;
    c.deviation = c.zero_truth ? c.fitted - c.truth : (c.fitted - c.truth) / std::abs(c.truth);
    out.cells.push_back(c);
  }
  return out;
}

double predict_constrained(const LinearFit& f, const ScmRow& row, const PlugIn&) {
  return f[Slot::a_y] * row.a + f[Slot::c_y] * row.c + f[Slot::m_y] * row.m + f[Slot::l_y] * row.l + f[Slot::y0];
}

double predict_constrained(const LinearFit& f, const ScmRow& row, const MonteCarlo& mode) {
  if (!mode.noise.sigma_m || !mode.noise.sigma_l)
    throw Error(ErrorCode::missing_sigma, "monte-carlo prediction needs noise scales for M and L");
  if (mode.samples == 0) throw Error(ErrorCode::invalid_argument, "monte-carlo prediction needs samples");
  const double sm = *mode.noise.sigma_m, sl = *mode.noise.sigma_l, sy = mode.noise.sigma_y.value_or(0.0);
  if (sm < 0.0 || sl < 0.0 || sy < 0.0) throw Error(ErrorCode::invalid_argument, "noise scales must be non-negative");
  std::mt19937_64 rng(mode.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double mean_m = f[Slot::a_m] * row.a + f[Slot::c_m] * row.c + f[Slot::m0];
  double sum = 0.0;
  for (std::size_t i = 0; i < mode.samples; ++i) {
    const double m = mean_m + sm * normal(rng);
    const double l = f[Slot::a_l] * row.a + f[Slot::c_l] * row.c + f[Slot::m_l] * m + f[Slot::l0] + sl * normal(rng);
    double y = predict_constrained(f, ScmRow{row.a, row.c, m, l}, PlugIn{});
    if (sy > 0.0) y += sy * normal(rng);
    sum += y;
  }
  return sum / static_cast<double>(mode.samples);
}

std::vector<double> default_thresholds() {
  std::vector<double> t;
  for (int i = 10; i >= 0; --i) t.push_back(i / 10.0);
  return t;
}

SweepTable threshold_sweep(const std::vector<NamedPolicy>& policies, const std::vector<double>& thresholds,
                           const std::vector<std::string>& groups) {
  if (policies.size() < 2) throw Error(ErrorCode::invalid_argument, "a sweep needs at least two policies");
  const std::size_t n = groups.size();
  for (const auto& p : policies) {
    if (p.predictions.size() != n)
      throw Error(ErrorCode::length_mismatch, "policy '" + p.name + "' has " + std::to_string(p.predictions.size()) +
                                                  " predictions for " + std::to_string(n) + " rows");
  }
  for (std::size_t i = 1; i < thresholds.size(); ++i) {
    if (!(thresholds[i] < thresholds[i - 1]))
      throw Error(ErrorCode::invalid_argument, "thresholds must be strictly decreasing");
  }
  SweepTable table;
  for (const auto& p : policies) table.policies.push_back(p.name);
  const std::set<std::string> uniq(groups.begin(), groups.end());
  table.groups.assign(uniq.begin(), uniq.end());
  std::vector<std::size_t> gid(n);
  std::vector<double> marginal(table.groups.size(), 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    gid[r] = static_cast<std::size_t>(std::lower_bound(table.groups.begin(), table.groups.end(), groups[r]) -
                                      table.groups.begin());
    marginal[gid[r]] += 1.0;
  }
  for (auto& m : marginal) m = n ? m / static_cast<double>(n) : 0.0;
  table.marginal_shares = marginal;

  for (double t : thresholds) {
    SweepRow row;
    row.threshold = t;
    std::vector<double> rej(table.groups.size(), 0.0), acc(table.groups.size(), 0.0);
    std::vector<std::size_t> approved(policies.size(), 0);
    for (std::size_t r = 0; r < n; ++r) {
      bool all_rej = true, all_acc = true;
      for (std::size_t p = 0; p < policies.size(); ++p) {
        const bool yes = policies[p].predictions[r] > t;
        approved[p] += yes ? 1 : 0;
        all_rej = all_rej && !yes;
        all_acc = all_acc && yes;
      }
      if (all_rej) {
        ++row.rejected;
        rej[gid[r]] += 1.0;
      }
      if (all_acc) {
        ++row.accepted;
        acc[gid[r]] += 1.0;
      }
    }
    for (std::size_t p = 0; p < policies.size(); ++p)
      row.approval_rates.push_back(n ? static_cast<double>(approved[p]) / static_cast<double>(n) : 0.0);
    for (auto& v : rej) v = row.rejected ? v / static_cast<double>(row.rejected) : 0.0;
    for (auto& v : acc) v = row.accepted ? v / static_cast<double>(row.accepted) : 0.0;
    row.rejected_shares = std::move(rej);
    row.accepted_shares = std::move(acc);
    table.rows.push_back(std::move(row));
  }
  return table;
}

const RateCell& RateTable::at(const std::string& policy, const std::string& group, const std::string& stratum) const {
  for (const auto& c : cells)
    if (c.policy == policy && c.group == group && c.stratum == stratum) return c;
  throw Error(ErrorCode::invalid_argument, "no rate cell for " + policy + "/" + group + "/" + stratum);
}

RateTable approval_rates(const std::vector<NamedPolicy>& policies, double threshold,
                         const std::vector<std::string>& groups, const std::vector<std::string>* strata,
                         const std::string& baseline) {
  const std::size_t n = groups.size();
  if (strata && strata->size() != n) throw Error(ErrorCode::length_mismatch, "strata and groups differ in length");
  const NamedPolicy* base = nullptr;
  for (const auto& p : policies) {
    if (p.predictions.size() != n)
      throw Error(ErrorCode::length_mismatch, "policy '" + p.name + "' does not cover every row");
    if (p.name == baseline) base = &p;
  }
  if (!base) throw Error(ErrorCode::invalid_argument, "baseline policy '" + baseline + "' not supplied");

  const std::set<std::string> gset(groups.begin(), groups.end());
  std::set<std::string> sset;
  if (strata) sset.insert(strata->begin(), strata->end());
  sset.insert("all");

  auto rates = [&](const NamedPolicy& p) {
    std::map<std::pair<std::string, std::string>, std::pair<std::size_t, std::size_t>> cell;
    for (std::size_t r = 0; r < n; ++r) {
      const std::size_t hit = p.predictions[r] > threshold ? 1 : 0;
      auto& pooled = cell[{groups[r], std::string("all")}];
      ++pooled.first;
      pooled.second += hit;
      if (strata && (*strata)[r] != "all") {
        auto& c = cell[{groups[r], (*strata)[r]}];
        ++c.first;
        c.second += hit;
      }
    }
    return cell;
  };
  const auto base_rates = rates(*base);
  RateTable table;
  table.baseline = baseline;
  for (const auto& p : policies) {
    const auto pr = rates(p);
    for (const auto& g : gset) {
      for (const auto& s : sset) {
        RateCell c{p.name, g, s};
        const auto it = pr.find({g, s});
        if (it != pr.end()) {
          c.count = it->second.first;
          c.rate = static_cast<double>(it->second.second) / static_cast<double>(it->second.first);
          const auto& b = base_rates.at({g, s});
          c.delta = c.rate - static_cast<double>(b.second) / static_cast<double>(b.first);
        }
        table.cells.push_back(std::move(c));
      }
    }
  }
  return table;
}

}  // namespace pfair
