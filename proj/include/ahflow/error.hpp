#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace ahflow {

enum class ErrorKind {
  invalid_parameter,
  stencil_underflow,
  nonpositive_metric,
  chart_degenerate,
  out_of_range,
  gauge_failure,
  dimension_unsupported,
  cutoff_overlap,
  invalid_recipe,
  quadrature_underresolved,
  step_rejected,
  nan_detected,
  mode_mismatch,
  insufficient_snapshots,
  iteration_stall,
  parse_error,
  validation_error,
  io_error,
  unknown_subcommand,
  missing_input,
};

const char* error_kind_name(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(error_kind_name(kind)) + ": " + what), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

// Carries every violation found while validating a config, not just the first.
class ConfigError : public Error {
 public:
  ConfigError(ErrorKind kind, std::vector<std::string> issues);
  const std::vector<std::string>& issues() const { return issues_; }

 private:
  std::vector<std::string> issues_;
};

}  // namespace ahflow
