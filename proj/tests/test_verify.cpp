#include <doctest.h>

#include <cmath>
#include <functional>

#include "ahflow/error.hpp"
#include "ahflow/initial_data.hpp"
#include "ahflow/numeric.hpp"
#include "ahflow/verify.hpp"

using namespace ahflow;

namespace {

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("no error thrown");
  return ErrorKind::invalid_parameter;
}

WarpedMetric hyperbolic(std::size_t N, double stretch = 4.0) {
  return einstein_model(build_grid(N, 1.0, stretch), 5, CrossSection::sphere);
}

WarpedMetric glued(std::size_t N, double scale) {
  BoundaryData bd;
  bd.scale = scale;
  return build_glued_candidate(hyperbolic(N), bd, GlueRecipe{2, 0.1});
}

// Smooth bump supported well inside [lo, hi] in log x.
std::vector<double> bump(const RadialGrid& g, double lo, double hi) {
  std::vector<double> v(g.size(), 0.0);
  const double a = std::log(lo), b = std::log(hi);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double s = (std::log(g[i]) - a) / (b - a);
    if (s > 0 && s < 1) v[i] = std::pow(std::sin(M_PI * s), 4);
  }
  return v;
}

double sup_rows(const std::vector<double>& v, std::size_t skip) {
  double s = 0;
  for (std::size_t i = skip; i + skip < v.size(); ++i) s = std::max(s, std::abs(v[i]));
  return s;
}

}  // namespace

TEST_CASE("Lichnerowicz Laplacian of the metric vanishes") {
  auto m = glued(256, 1.01);
  auto f = warped_frame(m, 4);
  auto lg = lichnerowicz_apply(f.g, f);
  for (int k = 0; k < int(lg.layout().tuples.size()); ++k) CHECK(sup_rows(lg[k], 4) < 1e-9);
}

TEST_CASE("Lichnerowicz Laplacian of v g is minus the Laplacian of v times g") {
  auto m = glued(256, 1.01);
  auto f = warped_frame(m, 2);
  const auto& g = *m.grid();
  std::vector<double> v(g.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::sin(3 * g[i]) * g[i] * g[i];
  auto lu = lichnerowicz_apply(symmetric_two_tensor(m.m(), v, v), f);
  auto lap = rough_laplacian(scalar_tensor(m.m(), v), f.ctx)[0];
  CHECK(lu.get({0, 1}) == nullptr);
  const double scale = sup_abs(lap);
  for (std::size_t i = 0; i < v.size(); ++i) {
    CHECK(std::abs(lu.at({0, 0})[i] + lap[i]) < 1e-12 * scale);
    CHECK(std::abs(lu.at({1, 1})[i] + lap[i]) < 1e-12 * scale);
  }
}

TEST_CASE("quadratic form agrees with its expanded form") {
  auto m = glued(512, 1.01);
  const auto& g = *m.grid();
  auto w = bump(g, 0.02, 0.6);
  std::vector<double> u0(g.size()), u1(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    u0[i] = w[i] * (1 + g[i]);
    u1[i] = -0.5 * w[i];
  }
  auto q = quadratic_form_check(m, u0, u1, 4);
  MESSAGE("operator " << q.operator_form << " expanded " << q.expanded_form);
  CHECK(q.relative_gap < 1e-4);
}

TEST_CASE("Rayleigh estimate on hyperbolic space") {
  auto m = hyperbolic(512);
  auto s = nondegeneracy_rayleigh(m);
  CHECK(s.lambda >= 3.6);
  CHECK(s.lambda <= 4.6);
  REQUIRE(s.sectors.size() == 2);
  // The invariant class alone sits near (n-1)^2/4 + 2(n-1).
  CHECK(s.sectors[0].lambda == doctest::Approx(12.0).epsilon(0.05));
  for (std::size_t k = 1; k < s.history.size(); ++k) CHECK(s.history[k] <= s.history[k - 1] + 1e-12);
  CHECK(s.interior_points == 510);
}

TEST_CASE("Rayleigh estimate decreases as the collar deepens") {
  auto m = hyperbolic(512);
  double prev = std::numeric_limits<double>::infinity();
  for (double lo : {0.05, 0.02, 0.005, 0.0}) {
    SpectralTruncation t;
    t.x_lo = lo;
    const double lam = nondegeneracy_rayleigh(m, t).lambda;
    CHECK(lam < prev);
    prev = lam;
  }
}

TEST_CASE("Rayleigh estimate matches a dense eigensolve") {
  auto m = hyperbolic(96);
  auto a = nondegeneracy_rayleigh(m);
  auto b = nondegeneracy_dense(m);
  for (std::size_t k = 0; k < a.sectors.size(); ++k) {
    CHECK(a.sectors[k].lambda >= b.sectors[k].lambda - 1e-9);
    CHECK(std::abs(a.sectors[k].lambda - b.sectors[k].lambda) < 1e-6 * b.sectors[k].lambda);
  }
  SpectralTruncation t;
  t.x_lo = 0.5;
  CHECK(kind_of([&] { nondegeneracy_rayleigh(m, t); }) == ErrorKind::invalid_parameter);
  t = {};
  t.max_iterations = 2;
  CHECK(kind_of([&] { nondegeneracy_rayleigh(m, t); }) == ErrorKind::iteration_stall);
}

TEST_CASE("condition B report") {
  auto h = hyperbolic(512);
  auto c = condition_b_report(h);
  CHECK(c.k0 == doctest::Approx(std::sqrt(40.0)).epsilon(1e-6));  // |Rm|^2 = 2n(n-1) at curvature -1
  CHECK(c.k1 < 1e-5);
  CHECK(c.v0 > 0);
  CHECK(c.provenance.contains("lambda"));
  auto g = condition_b_report(glued(512, 1.01));
  CHECK(std::isfinite(g.k0));
  CHECK(std::isfinite(g.k1));
  CHECK(std::abs(g.lambda / c.lambda - 1) < 0.1);
}

TEST_CASE("evolution identities hold along pure NRF") {
  std::vector<std::vector<ResidualReport>> levels;
  for (std::size_t N : {256, 512}) {
    FlowConfig c;
    c.mode = FlowMode::nrf;
    c.T_final = 0.002;
    c.record_every = 40;
    c.snapshot_every = 1;
    auto tr = run(glued(N, 1.001), c);
    ResidualWindow w;
    w.time = 0.001;
    levels.push_back(evolution_residuals(tr, w));
  }
  for (std::size_t k = 0; k < levels[0].size(); ++k) {
    auto r = refine({levels[0][k], levels[1][k]});
    MESSAGE(r.name << " order " << *r.slope);
    CHECK(r.passed);
  }
}

TEST_CASE("evolution residuals vanish on the fixed point") {
  FlowConfig c;
  c.mode = FlowMode::nrf;
  c.T_final = 0.001;
  c.record_every = 20;
  c.snapshot_every = 1;
  auto tr = run(hyperbolic(128), c);
  ResidualWindow w;
  w.accuracy = 4;
  for (const auto& r : evolution_residuals(tr, w)) CHECK(r.sup < 1e-6);
}

TEST_CASE("evolution residuals refuse gauged trajectories") {
  FlowConfig c;
  c.T_final = 0.001;
  c.record_every = 20;
  c.snapshot_every = 1;
  auto tr = run(glued(64, 1.001), c);
  CHECK(kind_of([&] { evolution_residuals(tr); }) == ErrorKind::mode_mismatch);
  FlowTrajectory short_traj;
  short_traj.mode = FlowMode::nrf;
  CHECK(kind_of([&] { evolution_residuals(short_traj); }) == ErrorKind::insufficient_snapshots);
}

TEST_CASE("defining function behaves like x") {
  FlowConfig c;
  c.mode = FlowMode::nrf;
  c.T_final = 0.01;
  c.record_every = 20;
  c.snapshot_every = 5;
  auto init = glued(256, 1.01);
  auto tr = run(init, c);
  auto rep = defining_function_checks(tr);
  REQUIRE(rep.slices.size() >= 2);
  CHECK(rep.slices[0].delta == 0.0);
  std::vector<double> l0, g0;
  defining_function_fields(init, 4, l0, g0);
  double sup0 = 0;
  for (std::size_t i = 2; i < l0.size() && (*init.grid())[i] <= rep.x_small; ++i) sup0 = std::max(sup0, l0[i]);
  CHECK(rep.slices[0].sup_laplace == sup0);
  CHECK(rep.max_c_laplace < 10);
  CHECK(rep.max_c_gradient < 10);

  FlowTrajectory h;
  h.snapshots.push_back({hyperbolic(512), 0});
  auto hr = defining_function_checks(h);
  REQUIRE(hr.slices[0].laplace_slope.has_value());
  MESSAGE("hyperbolic Laplacian residual slope " << *hr.slices[0].laplace_slope);
  CHECK(*hr.slices[0].laplace_slope > 0.9);
  CHECK(hr.slices[0].sup_gradient < 1e-12);
}
