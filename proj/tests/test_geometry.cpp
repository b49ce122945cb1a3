#include <doctest.h>

#include <cmath>

#include "ahflow/error.hpp"
#include "ahflow/geometry.hpp"
#include "ahflow/numeric.hpp"

using namespace ahflow;

namespace {
WarpedMetric perturbed(std::size_t N, int n, CrossSection cs, double eps, double x_max = 1.0) {
  auto g = build_grid(N, x_max, 4.0);
  auto base = einstein_model(g, n, cs);
  std::vector<double> A = base.A.values, B = base.B.values;
  for (std::size_t i = 0; i < N; ++i) {
    double x = (*g)[i];
    A[i] *= 1 + eps * x * x * std::cos(2 * x);
    B[i] *= 1 + eps * x * x * std::sin(3 * x);
  }
  return WarpedMetric{n, cs, ScalarField(g, A), ScalarField(g, B), 0.0};
}
}  // namespace

TEST_CASE("hyperbolic space is an Einstein fixed point") {
  auto g = build_grid(512, 1.0, 4.0);
  auto m = einstein_model(g, 5, CrossSection::sphere);
  auto b = curvature_closed_form(m, {4, true, true});
  for (std::size_t i = 0; i < m.size(); ++i) {
    CHECK(b.K_rad[i] == doctest::Approx(-1.0).epsilon(1e-5));
    CHECK(b.K_tan[i] == doctest::Approx(-1.0).epsilon(1e-5));
    CHECK(b.ric_rad[i] == doctest::Approx(-4.0).epsilon(1e-5));
  }
  CHECK(sup_abs(b.norm_h) < 1e-8);
  CHECK(sup_abs(b.norm_grad_rm) < 1e-6);
  // Second order leaves a visible floor set by the outer spacing.
  auto b2 = curvature_closed_form(m, {2, false, false});
  CHECK(sup_abs(b2.norm_h) < 1e-3);
}

TEST_CASE("constant warping closed form") {
  auto g = build_grid(64, 1.0, 1.0);
  const double c = 2.0;
  WarpedMetric m{5, CrossSection::sphere, ScalarField(g, std::vector<double>(64, 1.0)),
                 ScalarField(g, std::vector<double>(64, c)), 0.0};
  auto b = curvature_closed_form(m);
  for (std::size_t i = 0; i < 64; ++i) {
    double x = (*g)[i];
    CHECK(b.K_rad[i] == doctest::Approx(-1.0));
    CHECK(b.K_tan[i] == doctest::Approx(x * x / c - 1.0));
  }
}

TEST_CASE("nonpositive metric rejected") {
  auto g = build_grid(32, 1.0, 1.0);
  std::vector<double> B(32, 1.0);
  B[5] = 0.0;
  WarpedMetric m{5, CrossSection::sphere, ScalarField(g, std::vector<double>(32, 1.0)), ScalarField(g, B), 0.0};
  CHECK_THROWS_AS(curvature_closed_form(m), Error);
}

TEST_CASE("oracle agrees with closed form") {
  for (auto cs : {CrossSection::sphere, CrossSection::torus}) {
    auto m = perturbed(256, 5, cs, 0.01, 0.5);
    auto a = curvature_closed_form(m, {2, true, false});
    auto o = curvature_fd_oracle(m);
    std::size_t skip = a.edge_rows;
    CHECK(relative_sup_difference(a.K_rad, o.K_rad, skip) < 1e-4);
    CHECK(relative_sup_difference(a.K_tan, o.K_tan, skip) < 1e-4);
    CHECK(relative_sup_difference(a.norm_h, o.norm_h, skip) < 1e-4);
    CHECK(relative_sup_difference(a.norm_grad_rm, o.norm_grad_rm, skip) < 1e-4);
    CHECK(relative_sup_difference(a.gamma_x_xx, o.gamma_x_xx, skip) < 1e-4);
    CHECK(relative_sup_difference(a.H, o.H, skip) < 1e-4);
  }
}

TEST_CASE("radial distance") {
  auto g = build_grid(64, 1.0, 4.0);
  WarpedMetric flat{5, CrossSection::sphere, ScalarField(g, std::vector<double>(64, 1.0)),
                    ScalarField(g, std::vector<double>(64, 1.0)), 0.0};
  CHECK(radial_distance(flat, 0.5, 0.25) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(radial_distance(flat, 0.3, 0.3) == 0.0);
  auto m = perturbed(64, 5, CrossSection::sphere, 0.1);
  CHECK(radial_distance(m, 0.2, 0.7) == radial_distance(m, 0.7, 0.2));
  CHECK_THROWS_AS(radial_distance(m, 0.2, 1.5), Error);
}

TEST_CASE("weighted volume") {
  auto g = build_grid(256, 1.9, 4.0);
  auto m = einstein_model(g, 5, CrossSection::sphere);
  auto v45 = weighted_volume(m, 4.5, 0.3);
  auto v5 = weighted_volume(m, 5.0, 0.3);
  CHECK(std::isfinite(v45.value));
  CHECK(v5.value < v45.value);
  auto small = build_grid(16, 1.0, 1.0);
  auto ms = einstein_model(small, 5, CrossSection::sphere);
  CHECK(std::isfinite(weighted_volume(ms, 4.5, 0.5).value));
}
