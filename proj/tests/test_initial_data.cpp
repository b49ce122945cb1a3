#include <doctest.h>

#include <cmath>
#include <functional>

#include "ahflow/error.hpp"
#include "ahflow/initial_data.hpp"
#include "ahflow/normal_form.hpp"
#include "ahflow/numeric.hpp"

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

struct HolderChart {
  std::vector<double> x, f;
  explicit HolderChart(double alpha, double spacing = 1e-5) {
    const int n = int(std::lround(2.0 / spacing));
    for (int i = 0; i <= n; ++i) {
      x.push_back(-1.0 + i * spacing);
      f.push_back(std::pow(std::abs(x.back()), alpha));
    }
    x[n / 2] = 0.0;
    f[n / 2] = 0.0;
  }
};

}  // namespace

TEST_CASE("second expansion coefficient") {
  Eigen::MatrixXd g = Eigen::MatrixXd::Identity(4, 4);
  auto g2 = fg_second_coefficient(3.0 * g, 12.0, g, 5);
  CHECK((g2 + 0.5 * g).norm() < 1e-15);
  CHECK(fg_second_coefficient(Eigen::MatrixXd::Zero(4, 4), 0.0, g, 5).norm() == 0.0);
  CHECK(kind_of([&] { fg_second_coefficient(g, 2.0, g, 3); }) == ErrorKind::dimension_unsupported);
  CHECK(fg_second_coefficient(CrossSection::sphere, 1.0, 5) == doctest::Approx(-0.5));
  CHECK(fg_second_coefficient(CrossSection::sphere, 3.7, 6) == doctest::Approx(-0.5));
  CHECK(fg_second_coefficient(CrossSection::torus, 2.0, 5) == 0.0);
  CHECK(fg_second_coefficient(CrossSection::hyperbolic, 1.0, 7) == doctest::Approx(0.5));
}

TEST_CASE("glue recipe validation") {
  GlueRecipe r;
  r.nu1 = 0.1;
  CHECK_NOTHROW(r.validate(5, 1.0));
  r.nu2_override = 0.1;
  CHECK(kind_of([&] { r.validate(5, 1.0); }) == ErrorKind::invalid_recipe);
  r.nu2_override.reset();
  r.nu1 = 0.3;
  CHECK(kind_of([&] { r.validate(5, 1.0); }) == ErrorKind::invalid_recipe);
  r.nu1 = 0.6;
  CHECK(kind_of([&] { r.validate(5, 1.0); }) == ErrorKind::cutoff_overlap);
  r.nu1 = 0.1;
  r.k = 1;
  CHECK(kind_of([&] { r.validate(5, 1.0); }) == ErrorKind::invalid_recipe);
  r.k = 2;
  CHECK(kind_of([&] { r.validate(4, 1.0); }) == ErrorKind::invalid_recipe);
}

TEST_CASE("cutoff profile") {
  CHECK(glue_cutoff(0.05, 0.1, 0.2) == 1.0);
  CHECK(glue_cutoff(0.1, 0.1, 0.2) == 1.0);
  CHECK(glue_cutoff(0.2, 0.1, 0.2) == 0.0);
  CHECK(glue_cutoff(0.15, 0.1, 0.2) == doctest::Approx(0.5));
  double prev = 1.0;
  for (int i = 0; i <= 100; ++i) {
    double v = glue_cutoff(0.1 + 0.001 * i, 0.1, 0.2);
    CHECK(v <= prev);
    prev = v;
  }
}

TEST_CASE("gluing a metric to itself is the identity") {
  auto g = build_grid(256, 1.0, 20.0);
  for (auto cs : {CrossSection::sphere, CrossSection::torus, CrossSection::hyperbolic}) {
    auto base = einstein_model(g, 5, cs);
    BoundaryData bd;
    bd.cross_section = cs;
    bd.scale = to_normal_form(base).b0;
    for (int k : {0, 2})
      for (double nu1 : {0.05, 0.2}) {
        GlueRecipe r{k, nu1};
        auto m = build_glued_candidate(base, bd, r);
        double d = 0.0;
        for (std::size_t i = 0; i < g->size(); ++i) d = std::max(d, std::abs(m.B[i] - base.B[i]));
        CHECK(d <= 1e-15);
      }
  }
}

TEST_CASE("glued candidate structure and decay") {
  auto g = build_grid(512, 1.0, 20.0);
  auto base = einstein_model(g, 5, CrossSection::sphere);
  BoundaryData bd;
  bd.scale = 1.01;
  GlueRecipe r{2, 0.1};
  auto m = build_glued_candidate(base, bd, r);
  const auto& x = g->points();
  for (std::size_t i = 0; i < x.size(); ++i) {
    CHECK(m.A[i] == 1.0);
    if (x[i] >= 0.2) CHECK(m.B[i] == base.B[i]);
    if (x[i] <= 0.1) {
      double u = 1 - x[i] * x[i] / 4;
      CHECK(m.B[i] == doctest::Approx(0.01 + u * u).epsilon(1e-14));
    }
  }
  CHECK(to_normal_form(m).b0 == doctest::Approx(1.01).epsilon(1e-9));

  auto v = validate_initial(m, 2.5, 100.0, {4.0, 4, 0.0, 0.1});
  CHECK(v.pass);
  CHECK(!v.slope.refused);
  CHECK(v.slope.gamma > 3.6);
  CHECK(v.slope.gamma < 4.4);
  CHECK(v.gamma_admissible);

  // The two truncation orders coincide because g2 does not depend on the scale.
  auto m0 = build_glued_candidate(base, bd, GlueRecipe{0, 0.1});
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(m0.B[i] == doctest::Approx(m.B[i]).epsilon(1e-14));

}

TEST_CASE("glue errors") {
  auto g = build_grid(256, 1.0, 20.0);
  auto base = einstein_model(g, 5, CrossSection::sphere);
  BoundaryData bd;
  bd.cross_section = CrossSection::torus;
  CHECK(kind_of([&] { build_glued_candidate(base, bd, GlueRecipe{2, 0.1}); }) ==
        ErrorKind::invalid_parameter);
  bd.cross_section = CrossSection::sphere;
  auto bent = base;
  for (std::size_t i = 0; i < g->size(); ++i) bent.B.values[i] *= 1 + 0.01 * (*g)[i] * (*g)[i];
  CHECK(kind_of([&] { build_glued_candidate(bent, bd, GlueRecipe{2, 0.1}); }) ==
        ErrorKind::invalid_parameter);
  GlueRecipe bad{2, 0.1};
  bad.nu2_override = 0.1;
  CHECK(kind_of([&] { build_glued_candidate(base, bd, bad); }) == ErrorKind::invalid_recipe);
}

TEST_CASE("gamma window") {
  auto [lo, hi] = gamma_window(5, 4.0);
  CHECK(lo == doctest::Approx(2.0));
  CHECK(hi == doctest::Approx(2.0 + std::sqrt(2.0)));
  auto [lo2, hi2] = gamma_window(7, 0.25);
  CHECK(lo2 == doctest::Approx(2.5));
  CHECK(hi2 == doctest::Approx(3.0 + std::sqrt(7.0)));
}

TEST_CASE("validation of the hyperbolic metric") {
  auto g = build_grid(512, 1.0, 20.0);
  auto m = einstein_model(g, 5, CrossSection::sphere);
  for (double gamma : {2.1, 2.5, 3.3}) {
    // The weight e^{gamma d} grows like x^-gamma, so the floor is truncation error.
    auto v = validate_initial(m, gamma, 1e-3);
    CHECK(v.pass);
    CHECK(v.power_bound < 1e-3);
  }
}

TEST_CASE("validation is monotone in epsilon") {
  auto g = build_grid(256, 1.0, 20.0);
  auto base = einstein_model(g, 5, CrossSection::sphere);
  BoundaryData bd;
  bd.scale = 1.01;
  auto m = build_glued_candidate(base, bd, GlueRecipe{2, 0.1});
  bool seen_pass = false;
  for (double eps = 1e-3; eps < 1e4; eps *= 3) {
    bool p = validate_initial(m, 2.5, eps).pass;
    if (seen_pass) CHECK(p);
    seen_pass = seen_pass || p;
  }
  CHECK(seen_pass);
}

TEST_CASE("mollifier reproduces constants") {
  std::vector<double> x, f;
  for (int i = 0; i <= 2000; ++i) {
    x.push_back(-1.0 + 0.001 * i);
    f.push_back(3.25);
  }
  auto u = mollifier_extend(x, f, 0.5, {0.0, 0.3, -0.2}, {0.1, 0.05, 0.2});
  for (double v : u.u) CHECK(std::abs(v - 3.25) < 1e-13);
  for (double v : u.grad_norm) CHECK(v < 1e-9);
}

TEST_CASE("mollifier Hoelder exponents") {
  for (double alpha : {0.3, 0.5, 0.8}) {
    HolderChart c(alpha);
    std::vector<double> xt, xn;
    for (int i = 0; i < 12; ++i) {
      xn.push_back(1e-3 * std::pow(10.0, 2.0 * i / 11.0));
      xt.push_back(0.0);
    }
    auto u = mollifier_extend(c.x, c.f, alpha, xt, xn);
    auto approach = fit_power_law(xn, u.u);
    auto blowup = fit_power_law(xn, u.grad_norm);
    CAPTURE(alpha);
    CHECK(std::abs(approach.slope - alpha) < 0.1);
    CHECK(std::abs(blowup.slope - (alpha - 1)) < 0.1);
  }
}

TEST_CASE("mollifier errors") {
  HolderChart c(0.5, 1e-3);
  CHECK(kind_of([&] { mollifier_extend(c.x, c.f, 0.5, {0.0}, {2e-3}); }) ==
        ErrorKind::quadrature_underresolved);
  CHECK(kind_of([&] { mollifier_extend(c.x, c.f, 1.5, {0.0}, {0.1}); }) ==
        ErrorKind::invalid_parameter);
  CHECK(kind_of([&] { mollifier_extend(c.x, c.f, 0.5, {0.95}, {0.1}); }) == ErrorKind::out_of_range);
}
