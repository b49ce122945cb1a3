#pragma once

// Geodesic-gauge form g = r^-2 (dr^2 + b(r) sigma) of a warped metric, and the
// Fermi-coordinate curvature formulas specialised to g_r = b(r) sigma:
//   gbar^{ab} gbar'_ab            -> m b'/b
//   gbar^{ab} gbar^{cd} g'_ad g'_cb -> m b'^2/b^2
//   gbar^{ab} gbar''_ab           -> m b''/b
//   Ric(g_r)                      -> kappa (n-2) sigma  (scale invariant)
// The trace term of h_ab multiplies the barred metric gbar_ab = b sigma; that
// is the reading under which hyperbolic space has h = 0.

#include <json.hpp>

#include "ahflow/geometry.hpp"

namespace ahflow {

struct NormalFormMetric {
  int n = 5;
  CrossSection cross_section = CrossSection::sphere;
  GridPtr x_grid;
  GridPtr r_grid;
  std::vector<double> b, db, d2b;  // derivatives with respect to r
  double b0 = 0.0;                 // boundary value, extrapolated from the three smallest radii
  double gauge_residual = 0.0;     // sup | |grad r|_gbar - 1 |

  int m() const { return n - 1; }
  double kappa() const { return cross_section_kappa(cross_section); }
  const std::vector<double>& r() const { return r_grid->points(); }
};

NormalFormMetric to_normal_form(const WarpedMetric& m, int accuracy = 4);

// Coordinate components in (r, sigma): h_nn, the sigma coefficient of h_ab,
// and the tangential h_na (identically zero for radial data).
struct NormalFormPinching {
  std::vector<double> h_nn, h_na, h_ab;
  // Orthonormal-frame values r^2 h_nn and r^2 h_ab / b, and the norm of h.
  std::vector<double> h_rad, h_tan, norm_h;
};
NormalFormPinching pinching_normal_form(const NormalFormMetric& nf);

// R_nanb = c_nn sigma_ab, R_agbd = c_tt (sigma_ab sigma_gd - sigma_ad sigma_gb),
// R_ngad (zero here); plus the sectional curvatures they imply.
struct NormalFormRiemann {
  std::vector<double> c_nn, c_tt, r_nt;
  std::vector<double> K_rad, K_tan, ric_nn, ric_ab, R, norm_rm;
};
NormalFormRiemann riemann_normal_form(const NormalFormMetric& nf);

nlohmann::json normal_form_table(const NormalFormMetric& nf);

}  // namespace ahflow
