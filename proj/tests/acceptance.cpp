// Acceptance checks: one PASS/FAIL line per criterion, non-zero exit if any fail.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "ahflow/error.hpp"
#include "ahflow/fits.hpp"
#include "ahflow/flow.hpp"
#include "ahflow/geometry.hpp"
#include "ahflow/initial_data.hpp"
#include "ahflow/normal_form.hpp"
#include "ahflow/numeric.hpp"
#include "ahflow/runner.hpp"
#include "ahflow/verify.hpp"

using namespace ahflow;

namespace {

int failures = 0;

void report(int id, const std::string& name, bool pass, const std::string& detail) {
  std::printf("%s %2d %s: %s\n", pass ? "PASS" : "FAIL", id, name.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

bool within(double v, double lo, double hi) { return v >= lo && v <= hi; }

// Guards each criterion so that an exception is a FAIL line, not an abort.
void criterion(int id, const std::string& name, const std::function<void()>& body) {
  try {
    body();
  } catch (const std::exception& e) {
    report(id, name, false, std::string("threw ") + e.what());
  }
}

WarpedMetric perturbed(std::size_t N, int n, CrossSection cs, double eps, double x_max) {
  auto g = build_grid(N, x_max, 4.0);
  auto base = einstein_model(g, n, cs);
  std::vector<double> A = base.A.values, B = base.B.values;
  for (std::size_t i = 0; i < N; ++i) {
    const double x = (*g)[i];
    A[i] *= 1 + eps * x * x * std::cos(2 * x);
    B[i] *= 1 + eps * x * x * std::sin(3 * x);
  }
  return WarpedMetric{n, cs, ScalarField(g, A), ScalarField(g, B), 0.0};
}

WarpedMetric glued(std::size_t N, double x_max, double stretch, double scale, int k = 2) {
  auto base = einstein_model(build_grid(N, x_max, stretch), 5, CrossSection::sphere);
  BoundaryData bd;
  bd.scale = scale;
  return build_glued_candidate(base, bd, GlueRecipe{k, 0.1});
}

struct CorpusEntry {
  std::string name;
  std::function<WarpedMetric(std::size_t)> make;
};

std::vector<CorpusEntry> corpus() {
  return {
      {"sphere n=5", [](std::size_t N) { return perturbed(N, 5, CrossSection::sphere, 0.01, 0.5); }},
      {"torus n=5", [](std::size_t N) { return perturbed(N, 5, CrossSection::torus, 0.01, 0.5); }},
      {"hyperbolic n=5", [](std::size_t N) { return perturbed(N, 5, CrossSection::hyperbolic, 0.01, 0.5); }},
      {"sphere n=7", [](std::size_t N) { return perturbed(N, 7, CrossSection::sphere, 0.01, 0.5); }},
      {"sphere n=4 large", [](std::size_t N) { return perturbed(N, 4, CrossSection::sphere, 0.2, 0.5); }},
  };
}

// The glued candidate's cutoff has large high derivatives; both schemes carry
// truncation error well above 1e-5 at N = 512, so it is reported, not gated.
CorpusEntry glued_entry() {
  return {"glued k=2", [](std::size_t N) { return glued(N, 0.5, 4.0, 1.01); }};
}

double oracle_gap(const WarpedMetric& m) {
  auto a = curvature_closed_form(m, {2, true, false});
  auto o = curvature_fd_oracle(m);
  const auto fa = a.fields(), fo = o.fields();
  double worst = 0;
  for (std::size_t k = 0; k < fa.size(); ++k) {
    if (fa[k].second->empty() || fo[k].second->empty()) continue;
    worst = std::max(worst, relative_sup_difference(*fa[k].second, *fo[k].second, a.edge_rows));
  }
  return worst;
}

void c1() {
  const auto t0 = std::chrono::steady_clock::now();
  auto m = einstein_model(build_grid(512, 1.0, 4.0), 5, CrossSection::sphere);
  FlowConfig c;
  c.mode = FlowMode::nrf;
  c.T_final = 1.0;
  auto tr = run(m, c);
  const double secs = seconds_since(t0);
  double h = 0, change = 0;
  for (const auto& r : tr.records) {
    h = std::max(h, r.sup_h);
    change = std::max(change, r.max_rel_change);
  }
  const bool pass = tr.termination == Termination::reached_T && h < 1e-6 && change < 1e-6 && secs < 60;
  report(1, "hyperbolic fixed point", pass,
         "sup|h| " + fmt("%.2e", h) + ", sup rel change " + fmt("%.2e", change) + ", " + fmt("%.1f", secs) +
             " s (limits 1e-6, 1e-6, 60 s)");
}

void c2() {
  bool pass = true;
  std::string detail;
  for (const auto& e : corpus()) {
    std::vector<double> Ns, errs;
    for (std::size_t N : {128, 256, 512}) {
      Ns.push_back(double(N));
      errs.push_back(oracle_gap(e.make(N)));
    }
    const auto conv = fit_convergence(Ns, errs);
    const bool ok = errs.back() <= 1e-5 && within(conv.order, 1.8, 2.2);
    pass = pass && ok;
    detail += e.name + " " + fmt("%.2e", errs.back()) + " order " + fmt("%.2f", conv.order) + "; ";
  }
  detail += "(limits 1e-5, order in [1.8, 2.2]); not gated: glued k=2 " +
            fmt("%.2e", oracle_gap(glued_entry().make(512)));
  report(2, "curvature oracle equivalence", pass, detail);
}

void c3() {
  bool pass = true;
  std::string detail;
  auto entries = corpus();
  entries.push_back(glued_entry());
  for (const auto& e : entries) {
    auto m = e.make(512);
    auto p = pinching_normal_form(to_normal_form(m));
    auto o = curvature_fd_oracle(m);
    const std::size_t skip = std::max<std::size_t>(o.edge_rows, 2);
    const double d = std::max({relative_sup_difference(p.h_rad, o.h_rad, skip),
                               relative_sup_difference(p.h_tan, o.h_tan, skip),
                               relative_sup_difference(p.norm_h, o.norm_h, skip)});
    pass = pass && d <= 1e-4;
    detail += e.name + " " + fmt("%.2e", d) + "; ";
  }
  report(3, "normal-form pinching formulas", pass, detail + "(limit 1e-4)");
}

void c4() {
  std::vector<std::vector<ResidualReport>> levels;
  for (std::size_t N : {256, 512}) {
    FlowConfig c;
    c.mode = FlowMode::nrf;
    c.T_final = 0.002;
    c.record_every = 40;
    c.snapshot_every = 1;
    auto tr = run(glued(N, 1.0, 4.0, 1.001), c);
    ResidualWindow w;
    w.time = 0.001;
    levels.push_back(evolution_residuals(tr, w));
  }
  bool pass = true;
  std::string detail;
  for (std::size_t k = 0; k < levels[0].size(); ++k) {
    const auto r = refine({levels[0][k], levels[1][k]});
    pass = pass && r.slope && within(*r.slope, 1.6, 2.4);
    detail += r.name + " order " + fmt("%.2f", r.slope.value_or(NAN)) + "; ";
  }
  report(4, "evolution-equation residuals", pass, detail + "(limits [1.6, 2.4])");
}

void c5() {
  auto m = glued(512, 1.0, 4.0, 1.01);
  FlowConfig c;
  c.mode = FlowMode::nrf;
  c.T_final = 0.1;
  c.record_every = 100;
  c.snapshot_every = 2;
  auto nrf = run(m, c);
  c.mode = FlowMode::rf;
  c.T_final = rf_time(5, 0.1) * 1.001;
  auto rf = run(m, c);
  auto chk = rf_nrf_reparam_check(nrf, rf, {0.02, 0.05, 0.1});
  std::string detail;
  for (std::size_t k = 0; k < chk.differences.size(); ++k)
    detail += "t=" + fmt("%.2f", chk.probe_times[k]) + " " + fmt("%.2e", chk.differences[k]) + "; ";
  report(5, "RF/NRF reparameterisation", chk.sup_difference < 1e-6, detail + "(limit 1e-6)");
}

void c6() {
  ValidationOptions inner{4.0, 4, 0.0, 0.1}, annulus{4.0, 4, 0.1, 0.2};
  auto m2 = glued(512, 1.0, 20.0, 1.01, 2);
  auto m0 = glued(512, 1.0, 20.0, 1.01, 0);
  const auto s2 = validate_initial(m2, 2.5, 100.0, inner).slope;
  const auto s0 = validate_initial(m0, 2.5, 100.0, annulus).slope;
  const auto s0_inner = validate_initial(m0, 2.5, 100.0, inner).slope;
  const bool pass = !s2.refused && within(s2.gamma, 3.6, 4.4) && !s0.refused && within(s0.gamma, 1.6, 2.4);
  report(6, "glued candidate decay", pass,
         "k=2 slope " + fmt("%.3f", s2.gamma) + " (limits [3.6, 4.4]); k=0 annulus slope " + fmt("%.3f", s0.gamma) +
             " (limits [1.6, 2.4]); k=0 slope below nu1 " + fmt("%.3f", s0_inner.gamma));
}

void c7_8_12() {
  const std::string text =
      "n = 5\n"
      "grid.N = 512\n"
      "grid.stretch = 4\n"
      "initial.recipe = glued\n"
      "initial.k = 2\n"
      "initial.nu1 = 0.1\n"
      "initial.scale = 1.01\n"
      "flow.mode = nrf-deturck\n"
      "flow.T = 20\n"
      "flow.gauge_onset = 0.4\n"
      "flow.outer = open\n"
      "flow.record_every = 500\n"
      "flow.snapshot_every = 100000\n"
      "flow.converge_relative = 1e-3\n"
      "diagnostics.gamma = 2.5\n"
      "diagnostics.window = 0.4\n"
      "fit.t_lo = 0.1\n"
      "fit.drift_x_hi = 0.05\n";
  const auto cfg = parse_config(text);
  const auto t0 = std::chrono::steady_clock::now();
  const auto r = simulate(cfg);
  const double secs = seconds_since(t0);
  const auto dir = std::filesystem::temp_directory_path() / "ahflow_acceptance_run";
  emit_outputs(r, cfg, dir.string());
  const auto s = report_run(dir.string());
  const auto& f = s["acceptance_flags"];

  DiagnosticsSpec whole;
  whole.gamma = cfg.diagnostics.gamma;
  const auto d0 = diagnose(r.traj.initial(), r.traj.initial(), whole, 4, 0.0);
  const auto d1 = diagnose(r.traj.final(), r.traj.initial(), whole, 4, 0.0);

  const bool mono = f["monotone_after_transient"]["pass"].get<bool>();
  const double ratio = f["decay_ratio"]["value"].get<double>();
  const double lambda1 = s["lambda1_fit"]["lambda1"].get<double>();
  const bool pass7 = mono && f["decay_ratio"]["pass"].get<bool>() && f["lambda1_positive"]["pass"].get<bool>() &&
                     r.traj.final().time <= 20.0 && secs < 600;
  report(7, "convergence under small perturbation", pass7,
         std::string("monotone after t=0.1 ") + (mono ? "yes" : "no") + ", ratio " + fmt("%.2e", ratio) + " at t=" +
             fmt("%.3f", r.traj.final().time) + ", lambda1 " + fmt("%.3f", lambda1) + " +- " +
             fmt("%.3f", s["lambda1_fit"]["confidence"].get<double>()) + ", " + fmt("%.1f", secs) +
             " s, termination " + s["termination"]["reason"].get<std::string>() +
             " (limits 0.1, T <= 20, lambda1 > 0, 600 s); whole-grid ratio " + fmt("%.2e", d1.sup_h / d0.sup_h));

  const double slope = s["drift_slope"]["gamma"].get<double>();
  const double motion = f["boundary_motion"]["value"].get<double>();
  const bool pass8 = f["drift_slope"]["pass"].get<bool>() && f["boundary_motion"]["pass"].get<bool>();
  report(8, "conformal-infinity preservation", pass8,
         "drift slope " + fmt("%.3f", slope) + " (limit >= " + fmt("%.1f", cfg.diagnostics.gamma - 0.3) +
             "), boundary motion " + fmt("%.2e", motion) + " (limit 1e-6)");

  const double w = f["weighted_monitor"]["value"].get<double>();
  report(12, "weighted maximum-principle monitor", f["weighted_monitor"]["pass"].get<bool>(),
         "max e^{lambda1 t} sup x^-gamma |h| / initial " + fmt("%.3f", w) + " (limit 2)");
  std::filesystem::remove_all(dir);
}

void c9() {
  auto h = einstein_model(build_grid(512, 1.0, 4.0), 5, CrossSection::sphere);
  const double lam = nondegeneracy_rayleigh(h).lambda;
  bool tightening = true;
  double prev = std::numeric_limits<double>::infinity(), prev_gap = prev;
  std::string sweep;
  for (double lo : {0.05, 0.02, 0.005, 0.0}) {
    SpectralTruncation t;
    t.x_lo = lo;
    const double l = nondegeneracy_rayleigh(h, t).lambda;
    tightening = tightening && l < prev && std::abs(l - 4.0) < prev_gap;
    prev = l;
    prev_gap = std::abs(l - 4.0);
    sweep += fmt("%.3f ", l);
  }
  auto coarse = einstein_model(build_grid(96, 1.0, 4.0), 5, CrossSection::sphere);
  const auto a = nondegeneracy_rayleigh(coarse), b = nondegeneracy_dense(coarse);
  double gap = 0;
  for (std::size_t k = 0; k < a.sectors.size(); ++k)
    gap = std::max(gap, std::abs(a.sectors[k].lambda - b.sectors[k].lambda) / std::abs(b.sectors[k].lambda));
  const bool pass = within(lam, 3.6, 4.6) && tightening && gap < 1e-6;
  report(9, "non-degeneracy estimator", pass,
         "lambda " + fmt("%.4f", lam) + " (limits [3.6, 4.6]); collar sweep " + sweep + "; dense gap " +
             fmt("%.2e", gap) + " (limit 1e-6)");
}

void c10() {
  const double alpha = 0.5, spacing = 1e-5;
  const int n = int(std::lround(2.0 / spacing));
  std::vector<double> x, f;
  for (int i = 0; i <= n; ++i) {
    x.push_back(i == n / 2 ? 0.0 : -1.0 + i * spacing);
    f.push_back(std::pow(std::abs(x.back()), alpha));
  }
  std::vector<double> xt, xn;
  for (int i = 0; i < 12; ++i) {
    xn.push_back(1e-3 * std::pow(10.0, 2.0 * i / 11.0));
    xt.push_back(0.0);
  }
  auto u = mollifier_extend(x, f, alpha, xt, xn);
  const auto approach = fit_power_law(xn, u.u);
  const auto deriv = fit_power_law(xn, u.grad_norm);
  const bool pass = within(approach.slope, 0.4, 0.6) && within(deriv.slope, -0.6, -0.4);
  report(10, "mollifier lemma", pass,
         "approach slope " + fmt("%.3f", approach.slope) + " (limits [0.4, 0.6]), derivative slope " +
             fmt("%.3f", deriv.slope) + " (limits [-0.6, -0.4])");
}

void c11() {
  auto m = einstein_model(build_grid(512, 1.9, 4.0), 5, CrossSection::sphere);
  double lo = INFINITY, hi = 0;
  bool finite = true, warned = true;
  for (double x0 : {0.1, 0.3, 0.6}) {
    const auto w = weighted_volume(m, 4.5, x0);
    finite = finite && std::isfinite(w.value) && !w.divergence_warning;
    lo = std::min(lo, w.value);
    hi = std::max(hi, w.value);
    warned = warned && weighted_volume(m, 4.0, x0).divergence_warning;
  }
  const bool pass = finite && hi / lo < 3 && warned;
  report(11, "uniform weighted volume", pass,
         "alpha 4.5 max/min " + fmt("%.3f", hi / lo) + " (limit 3); alpha 4 divergence warning " +
             (warned ? "raised" : "missing"));
}

}  // namespace

int main() {
  const auto t0 = std::chrono::steady_clock::now();
  criterion(1, "hyperbolic fixed point", c1);
  criterion(2, "curvature oracle equivalence", c2);
  criterion(3, "normal-form pinching formulas", c3);
  criterion(4, "evolution-equation residuals", c4);
  criterion(5, "RF/NRF reparameterisation", c5);
  criterion(6, "glued candidate decay", c6);
  criterion(7, "convergence, drift and weighted monitor run", c7_8_12);
  criterion(9, "non-degeneracy estimator", c9);
  criterion(10, "mollifier lemma", c10);
  criterion(11, "uniform weighted volume", c11);
  std::printf("%d failing, %.0f s total\n", failures, seconds_since(t0));
  return failures == 0 ? 0 : 1;
}
