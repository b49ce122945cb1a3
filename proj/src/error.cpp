#include "ahflow/error.hpp"

namespace ahflow {

const char* error_kind_name(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::invalid_parameter: return "invalid-parameter";
    case ErrorKind::stencil_underflow: return "stencil-underflow";
    case ErrorKind::nonpositive_metric: return "nonpositive-metric";
    case ErrorKind::chart_degenerate: return "chart-degenerate";
    case ErrorKind::out_of_range: return "out-of-range";
    case ErrorKind::gauge_failure: return "gauge-failure";
    case ErrorKind::dimension_unsupported: return "dimension-unsupported";
    case ErrorKind::cutoff_overlap: return "cutoff-overlap";
    case ErrorKind::invalid_recipe: return "invalid-recipe";
    case ErrorKind::quadrature_underresolved: return "quadrature-underresolved";
    case ErrorKind::step_rejected: return "step-rejected";
    case ErrorKind::nan_detected: return "nan-detected";
    case ErrorKind::mode_mismatch: return "mode-mismatch";
    case ErrorKind::insufficient_snapshots: return "insufficient-snapshots";
    case ErrorKind::iteration_stall: return "iteration-stall";
    case ErrorKind::parse_error: return "parse-error";
    case ErrorKind::validation_error: return "validation-error";
    case ErrorKind::io_error: return "io-error";
    case ErrorKind::unknown_subcommand: return "unknown-subcommand";
    case ErrorKind::missing_input: return "missing-input";
  }
  return "error";
}

namespace {
std::string join_issues(const std::vector<std::string>& issues) {
  std::string out;
  for (std::size_t i = 0; i < issues.size(); ++i) {
    if (i) out += "; ";
    out += issues[i];
  }
  return out;
}
}  // namespace

ConfigError::ConfigError(ErrorKind kind, std::vector<std::string> issues)
    : Error(kind, join_issues(issues)), issues_(std::move(issues)) {}

}  // namespace ahflow
