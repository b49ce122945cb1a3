#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ahflow/flow.hpp"
#include "ahflow/geometry.hpp"

namespace ahflow {

struct ResidualReport {
  std::string name;
  std::vector<double> x, residual;  // per point, window only
  double sup = 0.0, l2 = 0.0;
  double time = 0.0;
  std::size_t resolution = 0;
  // Filled by refine(): sup residual per resolution and the fitted order.
  std::vector<std::size_t> resolutions;
  std::vector<double> sups;
  std::optional<double> slope;
  double expected_order = 2.0;
  bool passed = false;
  std::string note;

  nlohmann::json to_json() const;
};

// Combines one report per resolution (same identity, increasing N) into a
// refinement study. Passes when the fitted order lies in [lo, hi].
ResidualReport refine(const std::vector<ResidualReport>& levels, double lo = 1.6, double hi = 2.4);

// Laplacian of a tensor field, the trace of the second covariant derivative.
FrameTensor rough_laplacian(const FrameTensor& t, const FrameContext& ctx);

// Delta_L u = -Delta u - 2 R_ipjq u^pq + R_iq u^q_j + R_jq u^q_i.
FrameTensor lichnerowicz_apply(const FrameTensor& u, const WarpedFrame& f);

// Per unit cross-section volume: dv = x^-n sqrt(A) B^{(n-1)/2} dx.
std::vector<double> volume_density(const WarpedMetric& m);
double integrate(const RadialGrid& grid, const std::vector<double>& f, const std::vector<double>& density);

// Both sides of the integration by parts identity for a symmetric 2-tensor
// with frame parts (u0, u1) that vanishes near both ends of the grid.
struct QuadraticFormCheck {
  double operator_form = 0.0;  // int <(Delta_L + 2(n-1)) u, u>
  double expanded_form = 0.0;  // int |grad u|^2 - 2 R(u, u) + 2 h(u, u)
  double relative_gap = 0.0;
};
QuadraticFormCheck quadratic_form_check(const WarpedMetric& m, const std::vector<double>& u0,
                                        const std::vector<double>& u1, int accuracy = 4);

struct ResidualWindow {
  double x_lo = 0.05, x_hi = 0.5;
  int accuracy = 2;
  // Centre snapshot: the one nearest time when it is non-negative, else the
  // middle one.
  double time = -1.0;
};

// Residuals of the evolution of h, of |h|^2 and of the Christoffel symbols
// along a pure NRF trajectory, with time derivatives from the neighbouring
// snapshots. Throws mode-mismatch for RF or DeTurck trajectories.
std::vector<ResidualReport> evolution_residuals(const FlowTrajectory& traj,
                                                const ResidualWindow& window = {});

// One-sided monitors for the evolution inequalities with unspecified constants:
// the excess of d/dt |T|^2 - Delta |T|^2 + 2 |grad T|^2 over the listed lower
// order terms, reported as the smallest constant C that bounds it.
struct MonitorReport {
  std::string name;
  double fitted_constant = 0.0;
  double time = 0.0;
  nlohmann::json to_json() const;
};
std::vector<MonitorReport> evolution_monitors(const FlowTrajectory& traj,
                                              const ResidualWindow& window = {});

struct SpectralTruncation {
  double x_lo = 0.0;  // 0 means the innermost grid point
  double x_hi = 0.0;  // 0 means x_max
  double tolerance = 1e-8;
  int max_iterations = 20000;
};

struct SectorEstimate {
  std::string sector;
  double lambda = 0.0;
  std::vector<double> history;
  int iterations = 0;
};

struct SpectralEstimate {
  double lambda = 0.0;  // smallest sector value
  std::vector<double> history;  // Rayleigh quotients of the minimising sector
  std::vector<SectorEstimate> sectors;
  std::string subspace;
  double x_lo = 0.0, x_hi = 0.0, collar_depth = 0.0;
  std::size_t interior_points = 0;
  double shift = 0.0;
  nlohmann::json to_json() const;
};

// Smallest Rayleigh quotient of Q(u, g) / int |u|^2 over two separated classes
// of symmetric 2-tensors, each vanishing at both ends of the truncated collar:
//   invariant:  u = a(x) dx^2 + b(x) x^-2 B sigma
//   tangential: u = c(x) x^-2 B T with T a trace-free divergence-free tensor
//               in the lowest eigenspace of the cross-section.
// P1 elements in log x and inverse iteration with a sparse LDLT solve.
SpectralEstimate nondegeneracy_rayleigh(const WarpedMetric& m, const SpectralTruncation& trunc = {});

// Same assembled forms, smallest generalised eigenvalue by a dense solve.
SpectralEstimate nondegeneracy_dense(const WarpedMetric& m, const SpectralTruncation& trunc = {});

// Lowest eigenvalue of the rough Laplacian on trace-free divergence-free
// tensors of the unit cross-section; 0 is used where it is not known in
// closed form, which only lowers the estimate.
double cross_section_tt_floor(CrossSection cs, int dim);

struct ConditionB {
  double k0 = 0.0, k1 = 0.0, v0 = 0.0, lambda = 0.0;
  nlohmann::json provenance;
  nlohmann::json to_json() const;
};
ConditionB condition_b_report(const WarpedMetric& m, const SpectralTruncation& trunc = {});

// |Delta x - (2 - n) x| / x and |  |grad x|^2 - x^2 | / x^2 on x <= x_small for
// every snapshot, with the constant C in residual <= C (delta + x), where delta
// is the integral of sup ||h|| up to that time.
struct DefiningFunctionSlice {
  double t = 0.0, delta = 0.0;
  double sup_laplace = 0.0, sup_gradient = 0.0;
  double c_laplace = 0.0, c_gradient = 0.0;
  std::optional<double> laplace_slope;  // log-log slope of the Laplacian residual / x
};
struct DefiningFunctionReport {
  double x_small = 0.1;
  std::vector<DefiningFunctionSlice> slices;
  double max_c_laplace = 0.0, max_c_gradient = 0.0;
  nlohmann::json to_json() const;
};
DefiningFunctionReport defining_function_checks(const FlowTrajectory& traj, double x_small = 0.1,
                                                int accuracy = 4);
// Per-point residual fields of a single metric.
void defining_function_fields(const WarpedMetric& m, int accuracy, std::vector<double>& laplace,
                              std::vector<double>& gradient);

}  // namespace ahflow
