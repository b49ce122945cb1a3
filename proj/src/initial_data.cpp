#include "ahflow/initial_data.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "ahflow/error.hpp"
#include "ahflow/normal_form.hpp"
#include "ahflow/numeric.hpp"

namespace ahflow {

Eigen::MatrixXd fg_second_coefficient(const Eigen::MatrixXd& ric_hat, double r_hat,
                                      const Eigen::MatrixXd& g_hat, int n) {
  if (n == 3) throw Error(ErrorKind::dimension_unsupported, "g2 has a pole at n = 3");
  if (n < 3) throw Error(ErrorKind::dimension_unsupported, "n must be at least 4");
  if (ric_hat.rows() != ric_hat.cols() || ric_hat.rows() != g_hat.rows() ||
      g_hat.rows() != g_hat.cols())
    throw Error(ErrorKind::invalid_parameter, "Ric and ghat must be square of equal size");
  if (!ric_hat.allFinite() || !g_hat.allFinite() || !std::isfinite(r_hat))
    throw Error(ErrorKind::invalid_parameter, "curvature inputs must be finite");
  return -(ric_hat - r_hat / (2.0 * (n - 2)) * g_hat) / double(n - 3);
}

double fg_second_coefficient(CrossSection cs, double scale, int n) {
  if (!(scale > 0)) throw Error(ErrorKind::invalid_parameter, "boundary scale must be positive");
  const double kappa = cross_section_kappa(cs);
  // Components along sigma: Ric(c sigma) = kappa (n-2) sigma, R = kappa (n-1)(n-2)/c.
  Eigen::MatrixXd ric(1, 1), g(1, 1);
  ric(0, 0) = kappa * (n - 2);
  g(0, 0) = scale;
  const double r = kappa * (n - 1) * (n - 2) / scale;
  return fg_second_coefficient(ric, r, g, n)(0, 0);
}

void BoundaryData::validate() const {
  if (!(scale > 0) || !std::isfinite(scale))
    throw Error(ErrorKind::invalid_parameter, "boundary scale must be positive");
  if (!(alpha > 0 && alpha < 1)) throw Error(ErrorKind::invalid_parameter, "alpha must lie in (0, 1)");
  if (chart_points.size() != chart_values.size())
    throw Error(ErrorKind::invalid_parameter, "chart samples and points differ in length");
  for (double v : chart_values)
    if (!std::isfinite(v)) throw Error(ErrorKind::invalid_parameter, "chart samples must be finite");
}

void GlueRecipe::validate(int n, double x_max) const {
  std::ostringstream os;
  if (k != 0 && k != 2) os << "k must be 0 or 2 (got " << k << ")";
  else if (k > n - 3) os << "k = " << k << " exceeds n - 3 = " << n - 3;
  else if (!(nu1 > 0)) os << "nu1 must be positive";
  else if (!(nu1 < outer())) os << "nu1 = " << nu1 << " must be below nu2 = " << outer();
  if (!os.str().empty()) throw Error(ErrorKind::invalid_recipe, os.str());
  if (outer() > x_max) {
    os << "nu2 = " << outer() << " lies outside the grid (x_max = " << x_max << ")";
    throw Error(ErrorKind::cutoff_overlap, os.str());
  }
  if (outer() > 0.5 * x_max) {
    os << "nu2 = " << outer() << " exceeds x_max/2 = " << 0.5 * x_max;
    throw Error(ErrorKind::invalid_recipe, os.str());
  }
}

nlohmann::json GlueRecipe::to_json() const {
  return {{"k", k}, {"nu1", nu1}, {"nu2", outer()}, {"cutoff", "exp(-1/t) step"}};
}

double glue_cutoff(double r, double nu1, double nu2) {
  if (r <= nu1) return 1.0;
  if (r >= nu2) return 0.0;
  const double t = (nu2 - r) / (nu2 - nu1);
  const double a = std::exp(-1.0 / t), b = std::exp(-1.0 / (1.0 - t));
  return a / (a + b);
}

WarpedMetric build_glued_candidate(const WarpedMetric& base, const BoundaryData& boundary,
                                   const GlueRecipe& recipe) {
  base.validate();
  boundary.validate();
  const auto& x = base.grid()->points();
  recipe.validate(base.n, x.back());
  if (boundary.cross_section != base.cross_section)
    throw Error(ErrorKind::invalid_parameter, "boundary cross-section differs from the base");
  for (std::size_t i = 0; i < x.size(); ++i)
    if (std::abs(base.A[i] - 1.0) > 1e-12)
      throw Error(ErrorKind::invalid_parameter, "base must be in geodesic gauge (A = 1)");
  CurvatureOptions co;
  co.accuracy = 4;
  co.first_derivatives = co.second_derivatives = false;
  const auto bundle = curvature_closed_form(base, co);
  double hmax = 0.0;
  for (std::size_t i = bundle.edge_rows; i + bundle.edge_rows < x.size(); ++i)
    hmax = std::max(hmax, bundle.norm_h[i]);
  if (hmax > 1e-6) {
    std::ostringstream os;
    os << "base is not Einstein: sup |h| = " << hmax;
    throw Error(ErrorKind::invalid_parameter, os.str());
  }
  const double b0 = to_normal_form(base).b0;

  // Truncation of order k about the new boundary metric:
  //   k = 0: c + (b_base - b0)
  //   k = 2: c + g2_c r^2 + (b_base - b0 - g2_b0 r^2)
  // and g2 is the same for both scales, so the two agree here.
  const double g2_new = fg_second_coefficient(boundary.cross_section, boundary.scale, base.n);
  const double g2_old = fg_second_coefficient(base.cross_section, b0, base.n);
  WarpedMetric out = base;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = x[i];
    double trunc = boundary.scale + (base.B[i] - b0);
    if (recipe.k == 2) trunc += (g2_new - g2_old) * r * r;
    const double phi = glue_cutoff(r, recipe.nu1, recipe.outer());
    out.B.values[i] = (1.0 - phi) * base.B[i] + phi * trunc;
  }
  out.validate();
  return out;
}

double mollifier_bump(double z) {
  if (!(std::abs(z) < 1.0)) return 0.0;
  return std::exp(-1.0 / (1.0 - z * z));
}

namespace {

struct BumpRule {
  std::vector<double> z, w;
};

// Trapezoid nodes on (-1, 1); every derivative of the bump vanishes at the
// ends, so the rule converges faster than any power.
const BumpRule& bump_rule() {
  static const BumpRule rule = [] {
    BumpRule r;
    const int k = 4096;
    double mass = 0.0;
    for (int i = 1; i < k; ++i) {
      const double z = -1.0 + 2.0 * i / k;
      r.z.push_back(z);
      r.w.push_back(mollifier_bump(z));
      mass += r.w.back();
    }
    for (double& w : r.w) w /= mass;
    return r;
  }();
  return rule;
}

double linear_sample(const std::vector<double>& xs, const std::vector<double>& fs, double y) {
  if (y < xs.front() || y > xs.back()) {
    std::ostringstream os;
    os << "mollifier support reaches " << y << ", outside the chart samples";
    throw Error(ErrorKind::out_of_range, os.str());
  }
  auto it = std::upper_bound(xs.begin(), xs.end(), y);
  std::size_t j = it == xs.end() ? xs.size() - 1 : std::size_t(it - xs.begin());
  if (j == 0) j = 1;
  const double t = (y - xs[j - 1]) / (xs[j] - xs[j - 1]);
  return (1.0 - t) * fs[j - 1] + t * fs[j];
}

double mollify(const std::vector<double>& xs, const std::vector<double>& fs, double xt, double xn) {
  const auto& rule = bump_rule();
  double acc = 0.0;
  for (std::size_t k = 0; k < rule.z.size(); ++k)
    acc += rule.w[k] * linear_sample(xs, fs, xt - xn * rule.z[k]);
  return acc;
}

}  // namespace

MollifiedValues mollifier_extend(const std::vector<double>& chart_points,
                                 const std::vector<double>& chart_values, double alpha,
                                 const std::vector<double>& x_tangential,
                                 const std::vector<double>& x_normal) {
  BoundaryData bd;
  bd.alpha = alpha;
  bd.chart_points = chart_points;
  bd.chart_values = chart_values;
  bd.validate();
  if (chart_points.size() < 2) throw Error(ErrorKind::invalid_parameter, "need at least two chart samples");
  if (x_tangential.size() != x_normal.size())
    throw Error(ErrorKind::invalid_parameter, "evaluation coordinates differ in length");
  double spacing = 0.0;
  for (std::size_t i = 1; i < chart_points.size(); ++i) {
    const double d = chart_points[i] - chart_points[i - 1];
    if (!(d > 0)) throw Error(ErrorKind::invalid_parameter, "chart points must increase strictly");
    spacing = std::max(spacing, d);
  }
  MollifiedValues out;
  for (std::size_t p = 0; p < x_normal.size(); ++p) {
    const double xt = x_tangential[p], xn = x_normal[p];
    if (!(xn > 0)) throw Error(ErrorKind::invalid_parameter, "x_n must be positive");
    if (spacing > 0.25 * xn) {
      std::ostringstream os;
      os << "sample spacing " << spacing << " exceeds x_n/4 = " << 0.25 * xn;
      throw Error(ErrorKind::quadrature_underresolved, os.str());
    }
    const double d = 1e-3 * xn;
    const double u = mollify(chart_points, chart_values, xt, xn);
    const double ut = (mollify(chart_points, chart_values, xt + d, xn) -
                       mollify(chart_points, chart_values, xt - d, xn)) / (2 * d);
    const double un = (mollify(chart_points, chart_values, xt, xn + d) -
                       mollify(chart_points, chart_values, xt, xn - d)) / (2 * d);
    out.u.push_back(u);
    out.du_tangential.push_back(ut);
    out.du_normal.push_back(un);
    out.grad_norm.push_back(std::hypot(ut, un));
  }
  return out;
}

std::pair<double, double> gamma_window(int n, double lambda0) {
  const double half = 0.5 * (n - 1);
  const double s2 = half * half - 2.0;
  if (s2 < 0) return {2.0, 2.0};
  const double s = std::sqrt(s2);
  const double lo = half - std::min(s, std::sqrt(std::max(lambda0, 0.0)));
  return {std::max(lo, 2.0), half + s};
}

ValidationReport validate_initial(const WarpedMetric& m, double gamma, double epsilon,
                                  const ValidationOptions& opt) {
  m.validate();
  if (!(gamma > 0)) throw Error(ErrorKind::invalid_parameter, "gamma must be positive");
  ValidationReport rep;
  rep.gamma = gamma;
  rep.epsilon = epsilon;
  std::tie(rep.window_lo, rep.window_hi) = gamma_window(m.n, opt.lambda0);
  rep.gamma_admissible = gamma > rep.window_lo && gamma < rep.window_hi;

  CurvatureOptions co;
  co.accuracy = opt.accuracy;
  co.second_derivatives = false;
  const auto b = curvature_closed_form(m, co);
  co.accuracy = opt.accuracy == 2 ? 4 : 2;
  co.first_derivatives = false;
  const auto b_alt = curvature_closed_form(m, co);
  const auto d = depth_profile(m);
  const auto& x = m.grid()->points();
  const std::size_t np = x.size(), skip = b.edge_rows;
  for (std::size_t i = skip; i + skip < np; ++i) {
    const double w = std::exp(gamma * d[i]);
    rep.measured_epsilon = std::max(rep.measured_epsilon, b.norm_h[i] * w);
    rep.power_bound = std::max(rep.power_bound, b.norm_h[i] * std::pow(x[i], -gamma));
    rep.grad_h_bound = std::max(rep.grad_h_bound, b.norm_grad_h[i] * w);
  }
  rep.pass = rep.measured_epsilon <= epsilon;

  // Slope of ||h|| with the accuracy-2 / accuracy-4 gap as the per-point noise floor.
  std::vector<double> noise(np);
  for (std::size_t i = 0; i < np; ++i) noise[i] = std::abs(b.norm_h[i] - b_alt.norm_h[i]);
  const double lo = opt.fit_lo > 0 ? opt.fit_lo : x[skip];
  const double hi = opt.fit_hi > 0 ? opt.fit_hi : 0.25 * x.back();
  rep.slope = decay_fit_space(x, b.norm_h, lo, hi, noise);
  return rep;
}

nlohmann::json ValidationReport::to_json() const {
  return {{"pass", pass},
          {"gamma", gamma},
          {"epsilon", epsilon},
          {"measured_epsilon", measured_epsilon},
          {"power_bound", power_bound},
          {"grad_h_bound", grad_h_bound},
          {"gamma_window", {window_lo, window_hi}},
          {"gamma_admissible", gamma_admissible},
          {"slope", ahflow::to_json(slope)}};
}

}  // namespace ahflow
