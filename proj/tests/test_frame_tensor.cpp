#include <doctest.h>

#include <cmath>

#include "ahflow/frame_tensor.hpp"
#include "ahflow/geometry.hpp"
#include "ahflow/numeric.hpp"

using namespace ahflow;

namespace {
WarpedMetric perturbed(std::size_t N, int n, CrossSection cs, double eps) {
  auto g = build_grid(N, 1.0, 4.0);
  auto base = einstein_model(g, n, cs);
  std::vector<double> A = base.A.values, B = base.B.values;
  for (std::size_t i = 0; i < N; ++i) {
    double x = (*g)[i];
    A[i] *= 1 + eps * x * x * std::cos(2 * x);
    B[i] *= 1 + eps * x * x * std::sin(3 * x);
  }
  return WarpedMetric{n, cs, ScalarField(g, A), ScalarField(g, B), 0.0};
}

double sup_interior(const std::vector<double>& v, std::size_t skip) {
  double s = 0;
  for (std::size_t i = skip; i + skip < v.size(); ++i) s = std::max(s, std::abs(v[i]));
  return s;
}
}  // namespace

TEST_CASE("canonical layouts") {
  CHECK(FrameLayout::get(0, 4).tuples.size() == 1);
  CHECK(FrameLayout::get(1, 4).tuples.size() == 1);  // only (0)
  CHECK(FrameLayout::get(2, 4).tuples.size() == 2);  // (0,0), (1,1)
  const auto& l4 = FrameLayout::get(4, 4);
  CHECK(l4.find({0, 2, 0, 2}) == l4.find({0, 1, 0, 1}));
  CHECK(l4.find({3, 1, 3, 1}) == l4.find({1, 2, 1, 2}));
  CHECK(l4.find({0, 1, 0, 0}) == -1);
  CHECK(l4.find({1, 2, 1, 3}) == -1);
  // With m = 1 two distinct tangential labels cannot exist.
  CHECK(FrameLayout::get(4, 1).find({1, 2, 1, 2}) == -1);
}

TEST_CASE("metric is parallel") {
  auto m = perturbed(128, 5, CrossSection::sphere, 0.05);
  auto f = warped_frame(m);
  auto dg = covariant_derivative(f.g, f.ctx);
  CHECK(sup_abs(norm(dg)) < 1e-13);
}

TEST_CASE("contracted curvature matches closed-form blocks") {
  for (auto cs : {CrossSection::sphere, CrossSection::torus, CrossSection::hyperbolic}) {
    auto m = perturbed(128, 6, cs, 0.05);
    auto f = warped_frame(m);
    auto b = curvature_closed_form(m);
    for (std::size_t i = 0; i < m.size(); ++i) {
      CHECK(f.ric.at({0, 0})[i] == doctest::Approx(b.ric_rad[i]).epsilon(1e-12));
      CHECK(f.ric.at({1, 1})[i] == doctest::Approx(b.ric_tan[i]).epsilon(1e-12));
    }
    auto nrm = norm(f.rm);
    auto nh = norm(f.h);
    for (std::size_t i = 0; i < m.size(); ++i) {
      CHECK(nrm[i] == doctest::Approx(b.norm_rm[i]).epsilon(1e-12));
      CHECK(nh[i] == doctest::Approx(b.norm_h[i]).epsilon(1e-12).scale(1e-12));
    }
  }
}

TEST_CASE("gradient norm of a symmetric 2-tensor has the expected closed form") {
  auto m = perturbed(128, 5, CrossSection::sphere, 0.05);
  auto f = warped_frame(m);
  const auto& x = m.grid()->points();
  std::vector<double> u0, u1;
  for (double xi : x) {
    u0.push_back(std::sin(2 * xi) * xi);
    u1.push_back(std::cos(xi) * xi * xi);
  }
  auto u = symmetric_two_tensor(4, u0, u1);
  auto n2 = norm_squared(covariant_derivative(u, f.ctx));
  auto d0 = f.ctx.e0(u0), d1 = f.ctx.e0(u1);
  for (std::size_t i = 0; i < x.size(); ++i) {
    double H = f.ctx.H[i];
    double expect = d0[i] * d0[i] + 4 * d1[i] * d1[i] + 8 * (u0[i] - u1[i]) * (u0[i] - u1[i]) * H * H;
    CHECK(n2[i] == doctest::Approx(expect).epsilon(1e-12).scale(1e-12));
  }
}

TEST_CASE("contracted Bianchi identity") {
  auto m = perturbed(512, 5, CrossSection::sphere, 0.05);
  auto f = warped_frame(m, 4);
  auto div = contract(covariant_derivative(f.ric, f.ctx), 0, 1);
  auto R = contract(f.ric, 0, 1)[0];
  auto dR = f.ctx.e0(R);
  std::vector<double> res(R.size());
  for (std::size_t i = 0; i < R.size(); ++i) res[i] = div[0][i] - 0.5 * dR[i];
  CHECK(sup_interior(res, 8) < 1e-6);
}

TEST_CASE("hyperbolic curvature is parallel") {
  auto g = build_grid(256, 1.0, 4.0);
  auto m = einstein_model(g, 5, CrossSection::sphere);
  auto f = warped_frame(m, 4);
  CHECK(sup_abs(norm(covariant_derivative(f.rm, f.ctx))) < 1e-6);
}
