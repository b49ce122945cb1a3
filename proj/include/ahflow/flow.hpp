#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ahflow/geometry.hpp"

namespace ahflow {

enum class FlowMode { nrf, rf, nrf_deturck };
enum class DtPolicy { fixed, cfl };
enum class InnerBoundary { frozen, hyperbolic };
enum class OuterBoundary { frozen, open };
enum class Termination { reached_T, converged, blow_up, instability };

const char* flow_mode_name(FlowMode m);
FlowMode parse_flow_mode(const std::string& s);
const char* termination_name(Termination t);
const char* inner_boundary_name(InnerBoundary b);
InnerBoundary parse_inner_boundary(const std::string& s);
const char* outer_boundary_name(OuterBoundary b);
OuterBoundary parse_outer_boundary(const std::string& s);

struct FlowConfig {
  FlowMode mode = FlowMode::nrf_deturck;
  double T_final = 1.0;
  DtPolicy dt_policy = DtPolicy::cfl;
  double dt = 0.0;       // used by DtPolicy::fixed
  double safety = 0.5;   // CFL safety factor
  InnerBoundary inner = InnerBoundary::frozen;
  // Rows next to x = 0. open evolves them with one-sided stencils.
  OuterBoundary outer = OuterBoundary::frozen;
  int accuracy = 4;
  std::size_t record_every = 100;    // steps between diagnostics records
  std::size_t snapshot_every = 10;   // records between stored snapshots
  double converge_tol = 0.0;         // stop once sup ||h|| falls below; 0 disables
  double blowup_threshold = 1e3;     // sup ||h|| beyond this ends the run
  int max_halvings = 8;
  // Kreiss-Oliger dissipation strength. The term is invariant under constant
  // rescaling of (A, B), so RF and NRF stay exact reparameterisations.
  double dissipation = 0.1;
  // Subtract the discrete h of the Einstein model with the same cross-section,
  // so that model is an exact fixed point of the scheme.
  bool reference_subtraction = true;
  // NRF-DeTurck only. When positive the gauge term is switched off below this
  // radius and blended in up to twice it, so the region next to conformal
  // infinity follows pure NRF. Zero applies the gauge term everywhere.
  double gauge_onset = 0.0;
  // DeTurck background; the initial metric when unset.
  std::optional<WarpedMetric> background;

  void validate() const;
  nlohmann::json to_json() const;
};

struct DiagnosticsSpec {
  double gamma = 2.5;
  std::size_t probe_count = 5;  // drift is measured over this many smallest radii
  // Curvature sups and integrals cover x <= window only; 0 means the whole
  // grid. Used to leave out a gauge-fixed band next to the wall.
  double window = 0.0;
};

struct DiagnosticsRecord {
  double t = 0.0;
  double sup_h = 0.0;
  double int_h2 = 0.0;        // per unit cross-section volume
  double weighted_sup_h = 0.0;  // sup x^-gamma ||h||
  double drift = 0.0;         // sup over probe radii of ||x^2 g(t) - x^2 g(0)|| in gbar(0)
  double sup_grad_rm = 0.0;
  double sqrt_t_grad2_rm = 0.0;
  double k_min = 0.0, k_max = 0.0;
  double dt = 0.0;
  double max_rel_change = 0.0;  // sup |A/A0 - 1|, |B/B0 - 1|
  double a_boundary = 0.0, b_boundary = 0.0;  // extrapolated to x = 0

  static std::vector<std::string> columns();
  std::vector<double> values() const;
};

DiagnosticsRecord diagnose(const WarpedMetric& m, const WarpedMetric& initial,
                           const DiagnosticsSpec& spec, int accuracy, double dt);

// Drift field ||x^2 g(t) - x^2 g(0)||_{gbar(0)} per grid point.
std::vector<double> conformal_drift(const WarpedMetric& m, const WarpedMetric& initial);

struct Snapshot {
  WarpedMetric metric;
  std::size_t step = 0;
};

struct FlowTrajectory {
  FlowMode mode = FlowMode::nrf;
  std::vector<Snapshot> snapshots;
  std::vector<DiagnosticsRecord> records;
  double dt_min = 0.0, dt_max = 0.0;  // over accepted steps
  Termination termination = Termination::reached_T;
  std::string termination_detail;
  std::size_t steps = 0, rejected = 0;

  const WarpedMetric& initial() const { return snapshots.front().metric; }
  const WarpedMetric& final() const { return snapshots.back().metric; }
  nlohmann::json manifest() const;
};

// Lie-derivative term along the DeTurck field W = w d/dx; dA and dB are the
// contributions to the time derivatives of A and B.
struct DeturckTerm {
  std::vector<double> w, dA, dB;
};
DeturckTerm deturck_correction(const WarpedMetric& state, const WarpedMetric& background,
                               int accuracy = 4);

class FlowStepper {
 public:
  FlowStepper(const WarpedMetric& initial, const FlowConfig& config);

  // One RK4 step. Throws step-rejected on lost positivity and nan-detected on
  // non-finite values.
  WarpedMetric step(const WarpedMetric& state, double dt) const;
  double cfl_dt(const WarpedMetric& state) const;
  // Time derivative of (A, B) packed as [A; B].
  void rhs(const double* AB, double* out) const;
  std::size_t frozen_rows() const { return ghosts_; }
  // Applies the inner boundary condition to a state.
  WarpedMetric prepare(const WarpedMetric& state) const;

 private:
  void evaluate(const double* AB, double* out, bool gauge) const;

  FlowConfig cfg_;
  GridPtr grid_;
  int n_;
  double kappa_;
  std::size_t np_, ghosts_;
  std::vector<double> alpha_bg_, beta_bg_, dalpha_bg_, dbeta_bg_;
  std::vector<double> gauge_f_, gauge_df_, d2b_direct_;
  std::vector<double> edge_rate_;  // per packed row, for rows held by the boundary condition
  double stencil_constant_;
  std::vector<double> ko_coeff_;  // x / (dx * 2^{2r}) per row, zero where the stencil does not fit
  std::vector<double> ref_rate_;  // reference residual per unit metric, packed like rhs
  mutable std::vector<double> work_;
};

WarpedMetric step(const WarpedMetric& state, double dt, const FlowConfig& config);

FlowTrajectory run(const WarpedMetric& initial, const FlowConfig& config,
                   const DiagnosticsSpec& diag = {});

// s(t) = (e^{2(n-1)t} - 1) / (2(n-1))
double rf_time(int n, double t);

// Metric at time t by cubic interpolation in time between stored snapshots.
// Throws insufficient-snapshots when t falls outside the stored range or the
// bracketing snapshots are more than max_gap apart.
WarpedMetric interpolate_snapshots(const FlowTrajectory& traj, double t, double max_gap = 1e-2);

struct ReparamCheck {
  std::vector<double> probe_times, rf_times, differences;
  double sup_difference = 0.0;
};
ReparamCheck rf_nrf_reparam_check(const FlowTrajectory& nrf, const FlowTrajectory& rf,
                                  const std::vector<double>& probe_times, double max_gap = 1e-2);

void write_metric_csv(const WarpedMetric& m, const std::string& path);
WarpedMetric read_metric_csv(const std::string& path, int n, CrossSection cs);

}  // namespace ahflow
