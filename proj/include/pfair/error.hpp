#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace pfair {

enum class ErrorCode {
  invalid_argument,
  unknown_node,
  unknown_edge,
  cycle_detected,
  infeasible_degree,
  missing_column,
  unparseable_value,
  unknown_categorical_level,
  missing_value,
  empty_dataset,
  counts_exceed_n,
  singular_design,
  non_finite_loss,
  arity_mismatch,
  kind_mismatch,
  fingerprint_mismatch,
  empty_subpopulation,
  space_too_large,
  nonconvergence,
  missing_sigma,
  length_mismatch,
  config_error,
  io_error,
};

std::string_view to_string(ErrorCode code);

// Every failure raised by the library carries a machine-checkable code.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code), detail_(message) {}

  ErrorCode code() const noexcept { return code_; }
  // Message without the code prefix.
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

}  // namespace pfair
