#include <doctest.h>

#include <cmath>

#include "ahflow/error.hpp"
#include "ahflow/normal_form.hpp"
#include "ahflow/numeric.hpp"

using namespace ahflow;

TEST_CASE("hyperbolic metric is already in normal form") {
  auto g = build_grid(256, 0.5, 4.0);
  auto m = einstein_model(g, 5, CrossSection::sphere);
  auto nf = to_normal_form(m);
  for (std::size_t i = 0; i < g->size(); ++i) {
    CHECK(nf.r()[i] == doctest::Approx((*g)[i]).epsilon(1e-14));
    double u = 1 - nf.r()[i] * nf.r()[i] / 4;
    CHECK(nf.b[i] == doctest::Approx(u * u).epsilon(1e-14));
  }
  CHECK(nf.b0 == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(nf.gauge_residual < 1e-6);
  auto p = pinching_normal_form(nf);
  CHECK(sup_abs(p.norm_h) < 1e-8);
  CHECK(sup_abs(p.h_na) == 0.0);
  auto R = riemann_normal_form(nf);
  for (std::size_t i = 0; i < g->size(); ++i) {
    CHECK(R.K_rad[i] == doctest::Approx(-1.0).epsilon(1e-8));
    CHECK(R.K_tan[i] == doctest::Approx(-1.0).epsilon(1e-8));
  }
}

TEST_CASE("radial reparameterisation preserves scalar curvature") {
  auto g = build_grid(512, 0.5, 4.0);
  auto base = einstein_model(g, 5, CrossSection::sphere);
  std::vector<double> A(g->size());
  for (std::size_t i = 0; i < g->size(); ++i) A[i] = 1 + 0.01 * (*g)[i] * (*g)[i];
  WarpedMetric m{5, CrossSection::sphere, ScalarField(g, A), base.B, 0.0};
  auto nf = to_normal_form(m);
  CHECK(nf.gauge_residual < 1e-6);
  CHECK(std::abs(nf.r().back() - g->x_max()) > 1e-4);
  auto R = riemann_normal_form(nf);
  auto b = curvature_closed_form(m, {4, false, false});
  CHECK(relative_sup_difference(R.R, b.R, 2) < 1e-5);
}

TEST_CASE("flat truncation h_ab by hand") {
  // b = 1, kappa = +1, n = 5: h_ab = (n-2) kappa = 3 and h_nn = 0.
  auto g = build_grid(64, 0.5, 1.0);
  NormalFormMetric nf;
  nf.n = 5;
  nf.x_grid = g;
  nf.r_grid = g;
  nf.b.assign(64, 1.0);
  nf.db.assign(64, 0.0);
  nf.d2b.assign(64, 0.0);
  auto p = pinching_normal_form(nf);
  for (std::size_t i = 0; i < 64; ++i) {
    CHECK(p.h_ab[i] == doctest::Approx(3.0));
    CHECK(p.h_nn[i] == 0.0);
    // frame value: Ric(e_a,e_a) + 4 = r^2 * 3
    CHECK(p.h_tan[i] == doctest::Approx(3.0 * (*g)[i] * (*g)[i]));
  }
}

TEST_CASE("Riemann contraction reproduces Ricci from the pinching formulas") {
  auto g = build_grid(128, 0.5, 4.0);
  std::vector<double> B(128);
  for (std::size_t i = 0; i < 128; ++i) {
    double r = (*g)[i];
    B[i] = 1 - r * r / 2 + 0.01 * r * r * r * r;
  }
  WarpedMetric m{5, CrossSection::sphere, ScalarField(g, std::vector<double>(128, 1.0)), ScalarField(g, B), 0.0};
  auto nf = to_normal_form(m);
  auto p = pinching_normal_form(nf);
  auto R = riemann_normal_form(nf);
  const double eps = std::numeric_limits<double>::epsilon();
  for (std::size_t i = 0; i < 128; ++i) {
    double r = nf.r()[i], b = nf.b[i];
    double nn = p.h_nn[i] - 4.0 / (r * r);
    double ab = p.h_ab[i] - 4.0 * b / (r * r);
    CHECK(std::abs(R.ric_nn[i] - nn) <= 10 * eps * (4.0 / (r * r)) * 4);
    CHECK(std::abs(R.ric_ab[i] - ab) <= 10 * eps * (4.0 * b / (r * r)) * 4);
  }
}

TEST_CASE("sectional curvatures approach -1 quadratically") {
  auto g = build_grid(512, 0.5, 4.0);
  std::vector<double> B(512);
  for (std::size_t i = 0; i < 512; ++i) {
    double r = (*g)[i];
    B[i] = 1 - 0.6 * r * r + 0.01 * r * r * r * r;  // r^2 coefficient off the Einstein value
  }
  WarpedMetric m{5, CrossSection::sphere, ScalarField(g, std::vector<double>(512, 1.0)), ScalarField(g, B), 0.0};
  auto R = riemann_normal_form(to_normal_form(m));
  std::vector<double> rs, dev;
  for (std::size_t i = 0; i < 512; ++i) {
    double r = (*g)[i];
    if (r > 0.02 && r < 0.1) {
      rs.push_back(r);
      dev.push_back(std::abs(R.K_tan[i] + 1.0));
    }
  }
  auto fit = fit_power_law(rs, dev);
  CHECK(fit.slope >= 1.7);
  CHECK(fit.slope <= 2.3);
}

TEST_CASE("degenerate boundary is rejected") {
  auto g = build_grid(64, 0.5, 4.0);
  std::vector<double> B(64);
  for (std::size_t i = 0; i < 64; ++i) B[i] = (*g)[i];
  WarpedMetric m{5, CrossSection::sphere, ScalarField(g, std::vector<double>(64, 1.0)), ScalarField(g, B), 0.0};
  try {
    to_normal_form(m);
    FAIL("expected gauge failure");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::gauge_failure);
  }
}
