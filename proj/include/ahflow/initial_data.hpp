#pragma once

#include <optional>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "ahflow/fits.hpp"
#include "ahflow/geometry.hpp"

namespace ahflow {

// g2 = -(Ric - R/(2(n-2)) ghat)/(n-3), componentwise in any basis.
// Throws dimension-unsupported for n = 3.
Eigen::MatrixXd fg_second_coefficient(const Eigen::MatrixXd& ric_hat, double r_hat,
                                      const Eigen::MatrixXd& g_hat, int n);
// Same for ghat = c sigma with sigma a space form; returns the coefficient of
// sigma. It does not depend on c.
double fg_second_coefficient(CrossSection cs, double scale, int n);

struct BoundaryData {
  CrossSection cross_section = CrossSection::sphere;
  double scale = 1.0;  // ghat = scale * sigma
  // Optional raw curvature inputs.
  std::optional<Eigen::MatrixXd> ric_hat;
  std::optional<double> r_hat;
  // Hoelder samples for the mollifier path.
  std::vector<double> chart_points, chart_values;
  double alpha = 0.5;

  void validate() const;
};

struct GlueRecipe {
  int k = 2;
  double nu1 = 0.1;
  double nu2() const { return 2.0 * nu1; }
  // Override for nu2, only meant to exercise validation.
  std::optional<double> nu2_override;

  double outer() const { return nu2_override ? *nu2_override : nu2(); }
  // invalid-recipe on broken invariants, cutoff-overlap when nu2 leaves the grid.
  void validate(int n, double x_max) const;
  nlohmann::json to_json() const;
};

// 1 below nu1, 0 above nu2, smooth in between.
double glue_cutoff(double r, double nu1, double nu2);

// b = b_base + phi(r) (c - b0): the truncated expansion about the new boundary
// metric has the same r^2 coefficient as the base because g2 does not scale.
WarpedMetric build_glued_candidate(const WarpedMetric& base, const BoundaryData& boundary,
                                   const GlueRecipe& recipe);

struct MollifiedValues {
  std::vector<double> u;
  std::vector<double> du_tangential, du_normal;  // by central differencing
  std::vector<double> grad_norm;
};

// u(x', x_n) = int tau(z) phi(x' - x_n z) dz on a 1-d chart; phi is linearly
// interpolated from strictly increasing samples.
MollifiedValues mollifier_extend(const std::vector<double>& chart_points,
                                 const std::vector<double>& chart_values, double alpha,
                                 const std::vector<double>& x_tangential,
                                 const std::vector<double>& x_normal);
double mollifier_bump(double z);  // unit mass on (-1, 1)

struct ValidationOptions {
  double lambda0 = 4.0;
  int accuracy = 4;
  // Window for the spatial slope of ||h||; defaults to the outer quarter of the grid.
  double fit_lo = 0.0, fit_hi = 0.0;
};

struct ValidationReport {
  bool pass = false;
  double gamma = 0.0, epsilon = 0.0;
  double measured_epsilon = 0.0;  // sup ||h|| e^{gamma d}
  double power_bound = 0.0;       // sup ||h|| x^-gamma
  double grad_h_bound = 0.0;      // sup ||grad h|| e^{gamma d}
  double window_lo = 0.0, window_hi = 0.0;
  bool gamma_admissible = false;
  SpaceFit slope;

  nlohmann::json to_json() const;
};

// Admissible gamma interval, including gamma > 2.
std::pair<double, double> gamma_window(int n, double lambda0);

ValidationReport validate_initial(const WarpedMetric& m, double gamma, double epsilon,
                                  const ValidationOptions& opt = {});

}  // namespace ahflow
