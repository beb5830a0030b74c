#pragma once

#include <cstddef>
#include <cstdint>

#include "pfair/dataset.hpp"
#include "pfair/graph.hpp"

namespace pfair {

// Coefficients of the five-variable linear SCM
//   A ~ Bernoulli(p_A),  C = e_C,
//   M = a_m A + c_m C + m0 + e_M,
//   L = a_l A + c_l C + m_l M + l0 + e_L,
//   Y = a_y A + c_y C + m_y M + l_y L + y0 + e_Y,
// with independent zero-mean Gaussian noise terms.
struct LinearScmParams {
  double p_a = 0.5;
  double a_m = 0.0, c_m = 0.0, m0 = 0.0;
  double a_l = 0.0, c_l = 0.0, m_l = 0.0, l0 = 0.0;
  double a_y = 0.0, c_y = 0.0, m_y = 0.0, l_y = 0.0, y0 = 0.0;
  double sigma_c = 0.0, sigma_m = 0.0, sigma_l = 0.0, sigma_y = 0.0;

  // Throws invalid-argument on p_A outside [0,1] or a negative sigma.
  void validate() const;
};

// Schema with one column per node: A binary, C/M/L/Y continuous.
Schema linear_scm_schema();

// The five-node graph of the linear SCM. Objectionable edges: A->M, M->L,
// A->Y, M->Y, L->Y.
CausalGraph linear_scm_graph();

Dataset simulate_linear_scm(const LinearScmParams& params, std::size_t n, std::uint64_t seed);

}  // namespace pfair
