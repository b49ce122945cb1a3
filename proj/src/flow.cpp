#include "ahflow/flow.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "ahflow/error.hpp"
#include "ahflow/initial_data.hpp"
#include "ahflow/kernels.hpp"
#include "ahflow/numeric.hpp"

namespace ahflow {

const char* flow_mode_name(FlowMode m) {
  switch (m) {
    case FlowMode::nrf: return "nrf";
    case FlowMode::rf: return "rf";
    case FlowMode::nrf_deturck: return "nrf-deturck";
  }
  return "?";
}

FlowMode parse_flow_mode(const std::string& s) {
  if (s == "nrf" || s == "NRF") return FlowMode::nrf;
  if (s == "rf" || s == "RF") return FlowMode::rf;
  if (s == "nrf-deturck" || s == "NRF-DeTurck") return FlowMode::nrf_deturck;
  throw Error(ErrorKind::invalid_parameter, "unknown flow mode '" + s + "'");
}

const char* termination_name(Termination t) {
  switch (t) {
    case Termination::reached_T: return "reached-T";
    case Termination::converged: return "converged";
    case Termination::blow_up: return "blow-up";
    case Termination::instability: return "instability";
  }
  return "?";
}

const char* inner_boundary_name(InnerBoundary b) {
  return b == InnerBoundary::frozen ? "dirichlet-frozen" : "dirichlet-hyperbolic";
}

InnerBoundary parse_inner_boundary(const std::string& s) {
  if (s == "dirichlet-frozen" || s == "frozen") return InnerBoundary::frozen;
  if (s == "dirichlet-hyperbolic" || s == "hyperbolic") return InnerBoundary::hyperbolic;
  throw Error(ErrorKind::invalid_parameter, "unknown inner boundary condition '" + s + "'");
}

const char* outer_boundary_name(OuterBoundary b) {
  return b == OuterBoundary::frozen ? "barred-components-frozen" : "open";
}

OuterBoundary parse_outer_boundary(const std::string& s) {
  if (s == "barred-components-frozen" || s == "frozen") return OuterBoundary::frozen;
  if (s == "open") return OuterBoundary::open;
  throw Error(ErrorKind::invalid_parameter, "unknown outer boundary condition '" + s + "'");
}

void FlowConfig::validate() const {
  std::vector<std::string> issues;
  if (!(T_final > 0) || !std::isfinite(T_final)) issues.push_back("flow.T must be positive");
  if (!(safety > 0 && safety <= 1)) issues.push_back("flow.safety must lie in (0, 1]");
  if (dt_policy == DtPolicy::fixed && !(dt > 0)) issues.push_back("flow.dt must be positive for a fixed step");
  if (accuracy != 2 && accuracy != 4) issues.push_back("flow.accuracy must be 2 or 4");
  if (record_every < 1) issues.push_back("flow.record_every must be at least 1");
  if (snapshot_every < 1) issues.push_back("flow.snapshot_every must be at least 1");
  if (!(blowup_threshold > 0)) issues.push_back("flow.blowup_threshold must be positive");
  if (!(dissipation >= 0)) issues.push_back("flow.dissipation must be non-negative");
  if (!(gauge_onset >= 0)) issues.push_back("flow.gauge_onset must be non-negative");
  if (!issues.empty()) throw ConfigError(ErrorKind::invalid_parameter, issues);
}

nlohmann::json FlowConfig::to_json() const {
  return {{"mode", flow_mode_name(mode)},
          {"T", T_final},
          {"dt_policy", dt_policy == DtPolicy::fixed ? "fixed" : "cfl"},
          {"dt", dt},
          {"safety", safety},
          {"inner_boundary", inner_boundary_name(inner)},
          {"outer_boundary", outer_boundary_name(outer)},
          {"accuracy", accuracy},
          {"record_every", record_every},
          {"snapshot_every", snapshot_every},
          {"converge_tol", converge_tol},
          {"blowup_threshold", blowup_threshold},
          {"dissipation", dissipation},
          {"reference_subtraction", reference_subtraction},
          {"gauge_onset", gauge_onset}};
}

// ---------------------------------------------------------------------------

namespace {

inline double blend(double w, double direct, double composed) {
  return w == 1.0 ? direct : w == 0.0 ? composed : w * direct + (1.0 - w) * composed;
}

struct Background {
  std::vector<double> alpha, beta, dalpha, dbeta;
};

// direct: per-row weight of the direct B'' stencil against D1(D1 B), as on the
// state side.
Background background_terms(const WarpedMetric& bg, int accuracy, const std::vector<double>& direct) {
  const auto& g = *bg.grid();
  const std::size_t np = g.size();
  Background out;
  auto dA = derivative(g, bg.A.values, 1, accuracy);
  auto dB = derivative(g, bg.B.values, 1, accuracy);
  out.alpha.resize(np);
  out.beta.resize(np);
  for (std::size_t i = 0; i < np; ++i) {
    out.alpha[i] = dA[i] / bg.A[i];
    out.beta[i] = dB[i] / bg.B[i];
  }
  // Same form as the state side of deturck_point, so the field vanishes
  // identically when the state equals the background.
  auto d2A = derivative(g, bg.A.values, 2, accuracy);
  auto d2B = derivative(g, bg.B.values, 2, accuracy);
  const auto d2Bc = derivative(g, dB, 1, accuracy);
  for (std::size_t i = 0; i < np; ++i) d2B[i] = blend(direct[i], d2B[i], d2Bc[i]);
  out.dalpha.resize(np);
  out.dbeta.resize(np);
  for (std::size_t i = 0; i < np; ++i) {
    out.dalpha[i] = d2A[i] / bg.A[i] - out.alpha[i] * out.alpha[i];
    out.dbeta[i] = d2B[i] / bg.B[i] - out.beta[i] * out.beta[i];
  }
  return out;
}

// W = w d/dx with w = x^2/(2A) [(alpha - alpha_bg) - m (beta - beta_bg)]. This
// cancels the B'' term of the A equation and adds x^2 A''/A, which makes the
// radial system strictly parabolic.
// f, df: weight applied to W and its derivative.
inline void deturck_point(double x, double A, double dA, double d2A, double B, double dB, double d2B,
                          double ab, double bb, double dab, double dbb, int m, double f, double df,
                          double& w, double& outA, double& outB) {
  const double al = dA / A, be = dB / B;
  const double S = (al - ab) - m * (be - bb);
  const double dS = (d2A / A - al * al - dab) - m * (d2B / B - be * be - dbb);
  const double c = x * x / (2.0 * A);
  const double dc = x / A - x * x * dA / (2.0 * A * A);
  w = f * c * S;
  const double dw = df * c * S + f * (dc * S + c * dS);
  outA = w * (dA - 2.0 * A / x) + 2.0 * A * dw;
  outB = w * (dB - 2.0 * B / x);
}

double extrapolate_to_zero(const double* x, const double* f) {
  double acc = 0.0;
  for (int a = 0; a < 3; ++a) {
    double l = 1.0;
    for (int b = 0; b < 3; ++b)
      if (b != a) l *= -x[b] / (x[a] - x[b]);
    acc += l * f[a];
  }
  return acc;
}

}  // namespace

DeturckTerm deturck_correction(const WarpedMetric& state, const WarpedMetric& background,
                               int accuracy) {
  state.validate();
  background.validate();
  if (state.grid() != background.grid() && state.grid()->points() != background.grid()->points())
    throw Error(ErrorKind::invalid_parameter, "state and background live on different grids");
  const auto& g = *state.grid();
  const std::size_t np = g.size();
  const auto bg = background_terms(background, accuracy, std::vector<double>(np, 1.0));
  auto dA = derivative(g, state.A.values, 1, accuracy);
  auto d2A = derivative(g, state.A.values, 2, accuracy);
  auto dB = derivative(g, state.B.values, 1, accuracy);
  auto d2B = derivative(g, state.B.values, 2, accuracy);
  DeturckTerm out;
  out.w.resize(np);
  out.dA.resize(np);
  out.dB.resize(np);
  for (std::size_t i = 0; i < np; ++i)
    deturck_point(g[i], state.A[i], dA[i], d2A[i], state.B[i], dB[i], d2B[i], bg.alpha[i], bg.beta[i],
                  bg.dalpha[i], bg.dbeta[i], state.m(), 1.0, 0.0, out.w[i], out.dA[i], out.dB[i]);
  return out;
}

// ---------------------------------------------------------------------------

FlowStepper::FlowStepper(const WarpedMetric& initial, const FlowConfig& config)
    : cfg_(config), grid_(initial.grid()), n_(initial.n), kappa_(initial.kappa()) {
  cfg_.validate();
  initial.validate();
  np_ = grid_->size();
  ghosts_ = std::size_t(RadialGrid::boundary_ghosts(cfg_.accuracy));
  stencil_constant_ = cfg_.accuracy == 2 ? 1.0 : 4.0 / 3.0;
  grid_->plan(1, cfg_.accuracy);
  grid_->plan(2, cfg_.accuracy);
  // Weight of the direct B'' stencil; the rest is D1(D1 B). Rows without the
  // gauge term need the composed form (see evaluate), rows with it the direct
  // one, which also sees the grid-scale part of B.
  d2b_direct_.assign(np_, 0.0);
  if (cfg_.mode == FlowMode::nrf_deturck) {
    gauge_f_.assign(np_, 1.0);
    gauge_df_.assign(np_, 0.0);
    if (cfg_.gauge_onset > 0) {
      const auto& x = grid_->points();
      const double lo = cfg_.gauge_onset, hi = 2.0 * cfg_.gauge_onset;
      if (!(hi < x.back())) throw Error(ErrorKind::invalid_parameter, "flow.gauge_onset must be below x_max / 2");
      const double eps = 1e-6 * lo;
      for (std::size_t i = 0; i < np_; ++i) {
        gauge_f_[i] = 1.0 - glue_cutoff(x[i], lo, hi);
        gauge_df_[i] = (glue_cutoff(x[i] - eps, lo, hi) - glue_cutoff(x[i] + eps, lo, hi)) / (2 * eps);
      }
    }
    d2b_direct_ = gauge_f_;
    const WarpedMetric& bg = cfg_.background ? *cfg_.background : initial;
    if (bg.grid()->points() != grid_->points())
      throw Error(ErrorKind::invalid_parameter, "DeTurck background lives on a different grid");
    auto b = background_terms(bg, cfg_.accuracy, d2b_direct_);
    alpha_bg_ = std::move(b.alpha);
    beta_bg_ = std::move(b.beta);
    dalpha_bg_ = std::move(b.dalpha);
    dbeta_bg_ = std::move(b.dbeta);
  }
  const auto start = prepare(initial);
  edge_rate_.assign(2 * np_, 0.0);
  if (cfg_.mode == FlowMode::rf) {
    // Held rows follow the RF image of a frozen NRF row: A(s) = (1 + 2(n-1)s) A(0).
    for (std::size_t i = 0; i < np_; ++i) {
      edge_rate_[i] = 2.0 * (n_ - 1) * start.A[i];
      edge_rate_[np_ + i] = 2.0 * (n_ - 1) * start.B[i];
    }
  }
  work_.resize(10 * np_);
  const int r = cfg_.accuracy / 2 + 1;
  ko_coeff_.assign(np_, 0.0);
  const auto& x = grid_->points();
  for (std::size_t i = std::size_t(r); i + std::size_t(r) < np_; ++i) {
    const double h = 0.5 * (x[i + 1] - x[i - 1]);
    ko_coeff_[i] = cfg_.dissipation * x[i] / (h * std::ldexp(1.0, 2 * r));
  }
  if (cfg_.reference_subtraction) {
    const auto ref = einstein_model(grid_, n_, initial.cross_section);
    std::vector<double> y(2 * np_), f(2 * np_);
    std::copy(ref.A.values.begin(), ref.A.values.end(), y.begin());
    std::copy(ref.B.values.begin(), ref.B.values.end(), y.begin() + np_);
    evaluate(y.data(), f.data(), false);
    const double shift = cfg_.mode == FlowMode::rf ? 2.0 * (n_ - 1) : 0.0;
    ref_rate_.resize(2 * np_);
    for (std::size_t i = 0; i < 2 * np_; ++i) ref_rate_[i] = f[i] / y[i] - shift;
  }
}

WarpedMetric FlowStepper::prepare(const WarpedMetric& state) const {
  if (cfg_.inner != InnerBoundary::hyperbolic) return state;
  WarpedMetric out = state;
  const auto model = einstein_model(grid_, n_, state.cross_section);
  for (std::size_t i = np_ - ghosts_; i < np_; ++i) {
    out.A.values[i] = model.A[i];
    out.B.values[i] = model.B[i];
  }
  return out;
}

double FlowStepper::cfl_dt(const WarpedMetric& state) const {
  const auto& x = grid_->points();
  double dt = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < np_; ++i) {
    double h = std::numeric_limits<double>::infinity();
    if (i > 0) h = std::min(h, x[i] - x[i - 1]);
    if (i + 1 < np_) h = std::min(h, x[i + 1] - x[i]);
    dt = std::min(dt, h * h * state.A[i] / (2.0 * x[i] * x[i] * stencil_constant_));
  }
  return cfg_.safety * dt;
}

void FlowStepper::rhs(const double* AB, double* out) const {
  evaluate(AB, out, true);
  if (!ref_rate_.empty()) {
    const double* A = AB;
    const double* B = AB + np_;
    for (std::size_t i = 0; i < np_; ++i) {
      out[i] -= ref_rate_[i] * A[i];
      out[np_ + i] -= ref_rate_[np_ + i] * B[i];
    }
  }
  const bool hold_outer = cfg_.outer == OuterBoundary::frozen;
  for (std::size_t k = 0; k < ghosts_; ++k) {
    for (std::size_t i : {k, np_ - 1 - k}) {
      if (i == k && !hold_outer) continue;
      out[i] = edge_rate_[i];
      out[np_ + i] = edge_rate_[np_ + i];
    }
  }
}

void FlowStepper::evaluate(const double* AB, double* out, bool gauge) const {
  const double* A = AB;
  const double* B = AB + np_;
  double* dA = work_.data();
  double* d2A = dA + np_;
  double* dB = d2A + np_;
  double* d2B = dB + np_;
  double* kr = d2B + np_;
  double* kt = kr + np_;
  double* hr = kt + np_;
  double* ht = hr + np_;
  double* d2Bc = ht + np_;
  const auto& p1 = grid_->plan(1, cfg_.accuracy);
  const auto& p2 = grid_->plan(2, cfg_.accuracy);
  kernels::apply_stencil(p1, A, dA);
  kernels::apply_stencil(p1, B, dB);
  // Without the gauge term the direct second-derivative stencil lets A - mB
  // grow at every wavenumber; composing D1 twice keeps the two equations in
  // step there.
  kernels::apply_stencil(p2, B, d2B);
  kernels::apply_stencil(p1, dB, d2Bc);
  for (std::size_t i = 0; i < np_; ++i) d2B[i] = blend(d2b_direct_[i], d2B[i], d2Bc[i]);
  const double* x = grid_->points().data();
  kernels::warped_curvature(np_, {x, A, dA, B, dB, d2B, kappa_, n_ - 1}, {kr, kt, hr, ht});
  const double shift = cfg_.mode == FlowMode::rf ? 2.0 * (n_ - 1) : 0.0;
  double* oA = out;
  double* oB = out + np_;
  for (std::size_t i = 0; i < np_; ++i) {
    oA[i] = (shift - 2.0 * hr[i]) * A[i];
    oB[i] = (shift - 2.0 * ht[i]) * B[i];
  }
  if (gauge && cfg_.mode == FlowMode::nrf_deturck) {
    kernels::apply_stencil(p2, A, d2A);
    for (std::size_t i = 0; i < np_; ++i) {
      if (gauge_f_[i] == 0.0 && gauge_df_[i] == 0.0) continue;
      double w, ca, cb;
      deturck_point(x[i], A[i], dA[i], d2A[i], B[i], dB[i], d2B[i], alpha_bg_[i], beta_bg_[i],
                    dalpha_bg_[i], dbeta_bg_[i], n_ - 1, gauge_f_[i], gauge_df_[i], w, ca, cb);
      oA[i] += ca;
      oB[i] += cb;
    }
  }
  if (cfg_.dissipation > 0) {
    // -(-1)^r delta^{2r} in index space, r = accuracy/2 + 1; scaled by x/(A dx).
    const int r = cfg_.accuracy / 2 + 1;
    static const double c2[] = {1, -4, 6, -4, 1};
    static const double c3[] = {1, -6, 15, -20, 15, -6, 1};
    const double* c = r == 2 ? c2 : c3;
    const double sign = r % 2 == 0 ? -1.0 : 1.0;
    for (std::size_t i = std::size_t(r); i + std::size_t(r) < np_; ++i) {
      double da = 0.0, db = 0.0;
      for (int k = -r; k <= r; ++k) {
        da += c[k + r] * A[i + k];
        db += c[k + r] * B[i + k];
      }
      const double s = sign * ko_coeff_[i] / A[i];
      oA[i] += s * da;
      oB[i] += s * db;
    }
  }
}

WarpedMetric FlowStepper::step(const WarpedMetric& state, double dt) const {
  if (!(dt >= 0)) throw Error(ErrorKind::invalid_parameter, "dt must be non-negative");
  if (state.grid()->points() != grid_->points())
    throw Error(ErrorKind::invalid_parameter, "state lives on a different grid");
  if (dt == 0) return state;
  const std::size_t n2 = 2 * np_;
  std::vector<double> y(n2), k1(n2), k2(n2), k3(n2), k4(n2), tmp(n2);
  std::copy(state.A.values.begin(), state.A.values.end(), y.begin());
  std::copy(state.B.values.begin(), state.B.values.end(), y.begin() + np_);
  rhs(y.data(), k1.data());
  kernels::axpy(n2, 0.5 * dt, k1.data(), y.data(), tmp.data());
  rhs(tmp.data(), k2.data());
  kernels::axpy(n2, 0.5 * dt, k2.data(), y.data(), tmp.data());
  rhs(tmp.data(), k3.data());
  kernels::axpy(n2, dt, k3.data(), y.data(), tmp.data());
  rhs(tmp.data(), k4.data());
  kernels::rk4_combine(n2, dt, y.data(), k1.data(), k2.data(), k3.data(), k4.data(), tmp.data());
  for (std::size_t i = 0; i < n2; ++i)
    if (!std::isfinite(tmp[i])) throw Error(ErrorKind::nan_detected, "non-finite metric after step");
  for (std::size_t i = 0; i < n2; ++i)
    if (!(tmp[i] > 0)) {
      std::ostringstream os;
      os << (i < np_ ? "A" : "B") << " lost positivity at x = " << (*grid_)[i % np_];
      throw Error(ErrorKind::step_rejected, os.str());
    }
  WarpedMetric out = state;
  out.A.values.assign(tmp.begin(), tmp.begin() + np_);
  out.B.values.assign(tmp.begin() + np_, tmp.end());
  out.time = state.time + dt;
  return out;
}

WarpedMetric step(const WarpedMetric& state, double dt, const FlowConfig& config) {
  FlowStepper s(state, config);
  return s.step(s.prepare(state), dt);
}

// ---------------------------------------------------------------------------

std::vector<std::string> DiagnosticsRecord::columns() {
  return {"t", "sup_h", "int_h2", "weighted_sup_h", "drift", "sup_grad_rm", "sqrt_t_grad2_rm",
          "k_min", "k_max", "dt", "max_rel_change", "a_boundary", "b_boundary"};
}

std::vector<double> DiagnosticsRecord::values() const {
  return {t,     sup_h, int_h2, weighted_sup_h, drift,          sup_grad_rm, sqrt_t_grad2_rm,
          k_min, k_max, dt,     max_rel_change, a_boundary, b_boundary};
}

std::vector<double> conformal_drift(const WarpedMetric& m, const WarpedMetric& initial) {
  std::vector<double> d(m.size());
  const double mm = m.m();
  for (std::size_t i = 0; i < m.size(); ++i) {
    const double a = m.A[i] / initial.A[i] - 1.0, b = m.B[i] / initial.B[i] - 1.0;
    d[i] = std::sqrt(a * a + mm * b * b);
  }
  return d;
}

DiagnosticsRecord diagnose(const WarpedMetric& m, const WarpedMetric& initial,
                           const DiagnosticsSpec& spec, int accuracy, double dt) {
  CurvatureOptions co;
  co.accuracy = accuracy;
  const auto b = curvature_closed_form(m, co);
  const auto& x = m.grid()->points();
  const std::size_t np = x.size(), skip = b.edge_rows;
  DiagnosticsRecord r;
  r.t = m.time;
  r.dt = dt;
  r.k_min = std::numeric_limits<double>::infinity();
  r.k_max = -r.k_min;
  double g2 = 0.0;
  std::size_t end = np - skip;
  if (spec.window > 0)
    while (end > skip && x[end - 1] > spec.window) --end;
  for (std::size_t i = skip; i < end; ++i) {
    r.sup_h = std::max(r.sup_h, b.norm_h[i]);
    r.weighted_sup_h = std::max(r.weighted_sup_h, b.norm_h[i] * std::pow(x[i], -spec.gamma));
    r.sup_grad_rm = std::max(r.sup_grad_rm, b.norm_grad_rm[i]);
    g2 = std::max(g2, b.norm_grad2_rm[i]);
    r.k_min = std::min({r.k_min, b.K_rad[i], b.K_tan[i]});
    r.k_max = std::max({r.k_max, b.K_rad[i], b.K_tan[i]});
  }
  r.sqrt_t_grad2_rm = std::sqrt(std::max(m.time, 0.0)) * g2;
  const double mm = m.m();
  std::vector<double> dens(np);
  for (std::size_t i = 0; i < np; ++i)
    dens[i] = b.norm_h[i] * b.norm_h[i] * std::pow(x[i], -m.n) * std::sqrt(m.A[i]) *
              std::pow(m.B[i], 0.5 * mm);
  for (std::size_t i = 0; i + 1 < np && !(spec.window > 0 && x[i + 1] > spec.window); ++i)
    r.int_h2 += 0.5 * (dens[i] + dens[i + 1]) * (x[i + 1] - x[i]);
  const auto drift = conformal_drift(m, initial);
  for (std::size_t i = 0; i < std::min(spec.probe_count, np); ++i) r.drift = std::max(r.drift, drift[i]);
  for (std::size_t i = 0; i < np; ++i)
    r.max_rel_change = std::max({r.max_rel_change, std::abs(m.A[i] / initial.A[i] - 1.0),
                                 std::abs(m.B[i] / initial.B[i] - 1.0)});
  r.a_boundary = extrapolate_to_zero(x.data(), m.A.values.data());
  r.b_boundary = extrapolate_to_zero(x.data(), m.B.values.data());
  return r;
}

// ---------------------------------------------------------------------------

FlowTrajectory run(const WarpedMetric& initial, const FlowConfig& config, const DiagnosticsSpec& diag) {
  FlowStepper stepper(initial, config);
  FlowTrajectory traj;
  traj.mode = config.mode;
  WarpedMetric state = stepper.prepare(initial);
  const WarpedMetric start = state;
  traj.snapshots.push_back({state, 0});
  traj.records.push_back(diagnose(state, start, diag, config.accuracy, 0.0));
  traj.dt_min = std::numeric_limits<double>::infinity();

  const double t0 = state.time, T = t0 + config.T_final;
  double scale = 1.0;
  int halvings = 0;
  bool done = false;
  while (!done) {
    double dt = config.dt_policy == DtPolicy::fixed ? config.dt : stepper.cfl_dt(state);
    dt *= scale;
    const bool last = state.time + dt >= T - 1e-12 * std::max(1.0, std::abs(T));
    if (last) dt = T - state.time;
    WarpedMetric next;
    try {
      next = stepper.step(state, dt);
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::nan_detected) {
        traj.termination = Termination::blow_up;
        traj.termination_detail = e.what();
        break;
      }
      if (e.kind() != ErrorKind::step_rejected) throw;
      ++traj.rejected;
      if (++halvings > config.max_halvings) {
        traj.termination = Termination::instability;
        traj.termination_detail = e.what();
        break;
      }
      scale *= 0.5;
      continue;
    }
    if (last) next.time = T;
    state = std::move(next);
    ++traj.steps;
    traj.dt_min = std::min(traj.dt_min, dt);
    traj.dt_max = std::max(traj.dt_max, dt);
    if (traj.steps % config.record_every != 0 && !last) continue;

    auto rec = diagnose(state, start, diag, config.accuracy, dt);
    traj.records.push_back(rec);
    const bool snap = traj.records.size() % config.snapshot_every == 0;
    if (snap || last) traj.snapshots.push_back({state, traj.steps});
    if (!std::isfinite(rec.sup_h) || rec.sup_h > config.blowup_threshold) {
      traj.termination = Termination::blow_up;
      traj.termination_detail = "sup |h| = " + format_double(rec.sup_h);
      done = true;
    } else if (config.converge_tol > 0 && rec.sup_h < config.converge_tol) {
      traj.termination = Termination::converged;
      done = true;
    } else if (last) {
      traj.termination = Termination::reached_T;
      done = true;
    }
    if (done && !(snap || last)) traj.snapshots.push_back({state, traj.steps});
  }
  if (traj.termination != Termination::reached_T && traj.termination != Termination::converged &&
      traj.snapshots.back().step != traj.steps)
    traj.snapshots.push_back({state, traj.steps});
  if (traj.steps == 0) traj.dt_min = 0.0;
  return traj;
}

nlohmann::json FlowTrajectory::manifest() const {
  nlohmann::json snaps = nlohmann::json::array();
  for (const auto& s : snapshots) snaps.push_back({{"t", s.metric.time}, {"step", s.step}});
  nlohmann::json dts = nlohmann::json::array();
  for (const auto& r : records) dts.push_back({r.t, r.dt});
  return {{"t", snapshots.back().metric.time},
          {"mode", flow_mode_name(mode)},
          {"steps", steps},
          {"rejected_steps", rejected},
          {"dt_min", dt_min},
          {"dt_max", dt_max},
          {"dt_history", dts},
          {"snapshots", snaps},
          {"termination", termination_name(termination)},
          {"termination_detail", termination_detail}};
}

// ---------------------------------------------------------------------------

double rf_time(int n, double t) {
  const double c = 2.0 * (n - 1);
  return std::expm1(c * t) / c;
}

WarpedMetric interpolate_snapshots(const FlowTrajectory& traj, double t, double max_gap) {
  const auto& s = traj.snapshots;
  if (s.empty()) throw Error(ErrorKind::insufficient_snapshots, "trajectory has no snapshots");
  const double eps = 1e-12 * std::max(1.0, std::abs(t));
  if (t < s.front().metric.time - eps || t > s.back().metric.time + eps) {
    std::ostringstream os;
    os << "t = " << t << " lies outside the stored snapshots [" << s.front().metric.time << ", "
       << s.back().metric.time << "]";
    throw Error(ErrorKind::insufficient_snapshots, os.str());
  }
  for (const auto& snap : s)
    if (std::abs(snap.metric.time - t) <= eps) return snap.metric;
  if (s.size() < 2) throw Error(ErrorKind::insufficient_snapshots, "need at least two snapshots");
  std::size_t j = 1;
  while (j + 1 < s.size() && s[j].metric.time < t) ++j;
  const double gap = s[j].metric.time - s[j - 1].metric.time;
  if (gap > max_gap) {
    std::ostringstream os;
    os << "snapshot gap " << gap << " around t = " << t << " exceeds " << max_gap;
    throw Error(ErrorKind::insufficient_snapshots, os.str());
  }
  const std::size_t count = std::min<std::size_t>(4, s.size());
  std::size_t lo = j >= 2 ? j - 2 : 0;
  lo = std::min(lo, s.size() - count);
  WarpedMetric out = s[j].metric;
  std::fill(out.A.values.begin(), out.A.values.end(), 0.0);
  std::fill(out.B.values.begin(), out.B.values.end(), 0.0);
  for (std::size_t a = lo; a < lo + count; ++a) {
    double l = 1.0;
    for (std::size_t b = lo; b < lo + count; ++b)
      if (b != a) l *= (t - s[b].metric.time) / (s[a].metric.time - s[b].metric.time);
    for (std::size_t i = 0; i < out.size(); ++i) {
      out.A.values[i] += l * s[a].metric.A[i];
      out.B.values[i] += l * s[a].metric.B[i];
    }
  }
  out.time = t;
  return out;
}

ReparamCheck rf_nrf_reparam_check(const FlowTrajectory& nrf, const FlowTrajectory& rf,
                                  const std::vector<double>& probe_times, double max_gap) {
  if (nrf.mode != FlowMode::nrf || rf.mode != FlowMode::rf)
    throw Error(ErrorKind::mode_mismatch, "expected an NRF and an RF trajectory");
  ReparamCheck out;
  const int n = nrf.initial().n;
  const double c = 2.0 * (n - 1);
  for (double t : probe_times) {
    const double s = rf_time(n, t);
    const auto gn = interpolate_snapshots(nrf, t, max_gap);
    const auto gr = interpolate_snapshots(rf, s, max_gap);
    const double f = std::exp(-c * t);
    double d = 0.0;
    for (std::size_t i = 0; i < gn.size(); ++i) {
      const double a = (f * gr.A[i] - gn.A[i]) / gn.A[i];
      const double b = (f * gr.B[i] - gn.B[i]) / gn.B[i];
      d = std::max(d, std::sqrt(a * a + gn.m() * b * b));
    }
    out.probe_times.push_back(t);
    out.rf_times.push_back(s);
    out.differences.push_back(d);
    out.sup_difference = std::max(out.sup_difference, d);
  }
  return out;
}

// ---------------------------------------------------------------------------

void write_metric_csv(const WarpedMetric& m, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw Error(ErrorKind::io_error, "cannot write " + path);
  f << "x,A,B\n";
  const auto& x = m.grid()->points();
  for (std::size_t i = 0; i < x.size(); ++i)
    f << format_double(x[i]) << ',' << format_double(m.A[i]) << ',' << format_double(m.B[i]) << '\n';
  if (!f) throw Error(ErrorKind::io_error, "write failed for " + path);
}

WarpedMetric read_metric_csv(const std::string& path, int n, CrossSection cs) {
  std::ifstream f(path);
  if (!f) throw Error(ErrorKind::io_error, "cannot read " + path);
  std::string line;
  if (!std::getline(f, line)) throw Error(ErrorKind::parse_error, path + ": empty file");
  std::vector<double> x, A, B;
  std::size_t lineno = 1;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream is(line);
    std::string a, b, c;
    if (!std::getline(is, a, ',') || !std::getline(is, b, ',') || !std::getline(is, c))
      throw Error(ErrorKind::parse_error, path + ":" + std::to_string(lineno) + ": expected x,A,B");
    try {
      x.push_back(std::stod(a));
      A.push_back(std::stod(b));
      B.push_back(std::stod(c));
    } catch (const std::exception&) {
      throw Error(ErrorKind::parse_error, path + ":" + std::to_string(lineno) + ": bad number");
    }
  }
  auto g = grid_from_points(std::move(x));
  WarpedMetric m{n, cs, ScalarField(g, std::move(A)), ScalarField(g, std::move(B)), 0.0};
  m.validate();
  return m;
}

}  // namespace ahflow
