#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "ahflow/frame_tensor.hpp"
#include "ahflow/grid.hpp"

namespace ahflow {

enum class CrossSection { sphere, torus, hyperbolic };

double cross_section_kappa(CrossSection cs);
const char* cross_section_name(CrossSection cs);
CrossSection parse_cross_section(const std::string& name);

// g = x^-2 (A dx^2 + B sigma), with sigma a space form of dimension n - 1
// and Ric(sigma) = kappa (n - 2) sigma.
struct WarpedMetric {
  int n = 5;
  CrossSection cross_section = CrossSection::sphere;
  ScalarField A;
  ScalarField B;
  double time = 0.0;

  const GridPtr& grid() const { return A.grid; }
  std::size_t size() const { return A.size(); }
  int m() const { return n - 1; }
  double kappa() const { return cross_section_kappa(cross_section); }
  // Throws nonpositive-metric or invalid-parameter.
  void validate() const;
};

// The Einstein model x^-2 (dx^2 + (1 - kappa x^2/4)^2 sigma); hyperbolic space for the sphere.
WarpedMetric einstein_model(const GridPtr& grid, int n, CrossSection cs);

struct CurvatureOptions {
  int accuracy = 2;
  bool first_derivatives = true;   // ||grad h||, ||grad Rm||
  bool second_derivatives = true;  // ||grad^2 h||, ||grad^2 Rm||
};

// Components are given in coordinates (x, sigma) and in the orthonormal frame
// (e0 radial, e_a tangential). Empty vectors mean "not computed".
struct CurvatureBundle {
  GridPtr grid;
  int n = 0;
  // Gamma^x_xx, the sigma coefficient of Gamma^x_ab, and the delta coefficient of Gamma^a_xb.
  std::vector<double> gamma_x_xx, gamma_x_ss, gamma_s_xs;
  std::vector<double> H;  // mean curvature of the level sets per tangential direction
  std::vector<double> K_rad, K_tan;
  std::vector<double> ric_rad, ric_tan;  // frame
  // Coordinate blocks multiplied by x^2, i.e. the coefficients of dx^2 and
  // sigma inside the bracket of x^-2 (...). The flow moves A by -2 h_xx.
  std::vector<double> ric_xx, ric_ss;
  std::vector<double> R;
  std::vector<double> h_rad, h_tan;  // frame
  std::vector<double> h_xx, h_ss;
  std::vector<double> norm_rm, norm_h, norm_grad_h, norm_grad_rm, norm_grad2_h, norm_grad2_rm;
  std::size_t edge_rows = 0;  // rows at each end touched by one-sided stencils

  std::vector<std::pair<std::string, const std::vector<double>*>> fields() const;
};

CurvatureBundle curvature_closed_form(const WarpedMetric& m, const CurvatureOptions& opt = {});

// Orthonormal-frame view used by the tensor identities.
struct WarpedFrame {
  FrameContext ctx;
  std::vector<double> K_rad, K_tan;
  FrameTensor g, h, ric, rm;
};
WarpedFrame warped_frame(const WarpedMetric& m, int accuracy = 2);

struct OracleOptions {
  double chart_resolution = 0.0;  // step in (ln x, theta); 0 picks 0.005
  bool derivatives = true;        // ||grad h||, ||grad Rm|| by nested differencing
  std::size_t chart_check_stride = 16;  // every k-th row is re-evaluated off the chart origin
  double chart_check_tolerance = 1e-6;
};

// Builds the full n x n metric on a (ln x, theta) product chart and applies the
// textbook coordinate formulas by finite differences. Second-derivative norms
// are left empty.
CurvatureBundle curvature_fd_oracle(const WarpedMetric& m, const OracleOptions& opt = {});

double radial_distance(const WarpedMetric& m, double x_a, double x_b);
// Distance of every grid point from the innermost point x_max.
std::vector<double> depth_profile(const WarpedMetric& m);

struct WeightedVolume {
  double value = 0.0;
  double tail_estimate = 0.0;
  bool divergence_warning = false;
  double deepening_growth = 0.0;  // relative growth when the collar is made shallower -> deeper
  double collar_depth = 0.0;
};

struct WeightedVolumeOptions {
  int angles = 48;
  double step = 0.01;
  double shallow_fraction = 0.7;  // comparison collar keeps this fraction of the depth
};

// Integral of exp(-alpha d(p, .)) over the collar in geodesic polar coordinates
// about a point p at radius x0. For non-compact cross-sections the value refers
// to the universal cover.
WeightedVolume weighted_volume(const WarpedMetric& m, double alpha, double x0,
                               const WeightedVolumeOptions& opt = {});

// Lower bound for the volume of unit balls: a tube of proper half-length 1/2
// times a cross-section cap whose radius is bounded by the largest warping on
// the tube. Minimised over basepoints where the tube fits in the collar.
double unit_ball_volume_lower_bound(const WarpedMetric& m);

void write_bundle_csv(const CurvatureBundle& b, const std::string& path);
nlohmann::json bundle_summary(const CurvatureBundle& b);

// Relative sup difference over rows not flagged lower-confidence; the
// denominator is max(sup |reference|, 1).
double relative_sup_difference(const std::vector<double>& a, const std::vector<double>& ref,
                               std::size_t skip);

}  // namespace ahflow
