#include "pfair/error.hpp"

namespace pfair {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_argument: return "invalid-argument";
    case ErrorCode::unknown_node: return "unknown-node";
    case ErrorCode::unknown_edge: return "unknown-edge";
    case ErrorCode::cycle_detected: return "cycle-detected";
    case ErrorCode::infeasible_degree: return "infeasible-degree";
    case ErrorCode::missing_column: return "missing-column";
    case ErrorCode::unparseable_value: return "unparseable-value";
    case ErrorCode::unknown_categorical_level: return "unknown-categorical-level";
    case ErrorCode::missing_value: return "missing-value";
    case ErrorCode::empty_dataset: return "empty-dataset";
    case ErrorCode::counts_exceed_n: return "counts-exceed-n";
    case ErrorCode::singular_design: return "singular-design-matrix";
    case ErrorCode::non_finite_loss: return "non-finite-loss";
    case ErrorCode::arity_mismatch: return "arity-mismatch";
    case ErrorCode::kind_mismatch: return "kind-mismatch";
    case ErrorCode::fingerprint_mismatch: return "fingerprint-mismatch";
    case ErrorCode::empty_subpopulation: return "empty-subpopulation";
    case ErrorCode::space_too_large: return "space-too-large";
    case ErrorCode::nonconvergence: return "nonconvergence";
    case ErrorCode::missing_sigma: return "missing-sigma";
    case ErrorCode::length_mismatch: return "length-mismatch";
    case ErrorCode::config_error: return "config-error";
    case ErrorCode::io_error: return "io-error";
  }
  return "unknown";
}

}  // namespace pfair
