#pragma once

// Shared fixtures: the linear SCM coefficients used throughout, the seven-node
// worked-example graph and a synthetic census-shaped dataset.

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>

#include "pfair/dataset.hpp"
#include "pfair/graph.hpp"
#include "pfair/local_models.hpp"
#include "pfair/simulate.hpp"
#include "oracles.hpp"

namespace fixture {

// Same values as configs/linear_fixture.json.
pfair::LinearScmParams linear_params();

// The fixture with every mediator and outcome noise term switched off.
pfair::LinearScmParams noiseless_params();

// A, C, X1..X4, Y with A->X1, C->X1, A->X2, C->X2, X1->X2, C->X3, X2->X3,
// X1->X4, X2->X4, A->Y, X1->Y, X2->Y, X3->Y, X4->Y. Objectionable: A->X2,
// X1->X4, A->Y, X1->Y, X2->Y.
pfair::CausalGraph worked_graph();
pfair::Dataset simulate_worked(std::size_t n, std::uint64_t seed);

// sex -> marital, education, work, income; (age, country) -> same;
// marital -> education, work, income; education -> work, income;
// work -> income. Objectionable: sex->income, marital->income.
pfair::CausalGraph census_graph();
pfair::Schema census_schema();
pfair::Dataset synthetic_census(std::size_t n, std::uint64_t seed);

// Small all-binary instance: A, B -> M; A, B, M, C -> Y with an A x M
// interaction in Y. Objectionable: A->M, A->Y, M->Y (eight reference
// configurations).
pfair::CausalGraph binary_graph();
pfair::Dataset simulate_binary(std::size_t n, std::uint64_t seed);

// Reads the linear coefficients of a fitted all-linear bundle.
oracle::LinearSystem linear_system(const pfair::CausalGraph& g, const pfair::ModelBundle& bundle);

std::map<std::string, pfair::HypothesisSpec> uniform_hypotheses(const pfair::CausalGraph& g,
                                                                pfair::HypothesisSpec spec);

}  // namespace fixture
