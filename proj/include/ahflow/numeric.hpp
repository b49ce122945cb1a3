#pragma once

#include <string>
#include <vector>

namespace ahflow {

// Fixed 17-significant-digit text so that emitted files round-trip exactly.
std::string format_double(double v);

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double residual = 0.0;      // rms of the fit residuals
  double slope_stderr = 0.0;  // standard error of the slope
  std::size_t count = 0;
};

LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y);

// Least-squares slope of log y against log x.
LineFit fit_power_law(const std::vector<double>& x, const std::vector<double>& y);

double sup_abs(const std::vector<double>& v);

}  // namespace ahflow
