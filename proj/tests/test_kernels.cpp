#include <doctest.h>

#include <cmath>
#include <random>

#include "ahflow/grid.hpp"
#include "ahflow/kernels.hpp"

using namespace ahflow;

namespace {
std::vector<double> random_vec(std::size_t n, std::mt19937& rng, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}
}  // namespace

TEST_CASE("avx2 kernels match scalar references") {
  if (!kernels::cpu_has_avx2()) {
    MESSAGE("CPU lacks avx2/fma; equivalence test skipped");
    return;
  }
  std::mt19937 rng(7);
  for (std::size_t N : {16u, 17u, 19u, 64u, 513u}) {
    auto g = build_grid(N, 1.3, 4.0);
    auto f = random_vec(N, rng, -1, 1);
    for (int order : {1, 2})
      for (int acc : {2, 4}) {
        const auto& plan = g->plan(order, acc);
        std::vector<double> a(N), b(N);
        kernels::scalar::apply_stencil(plan, f.data(), a.data());
        kernels::avx2::apply_stencil(plan, f.data(), b.data());
        double scale = 0;
        for (double v : a) scale = std::max(scale, std::abs(v));
        for (std::size_t i = 0; i < N; ++i) CHECK(std::abs(a[i] - b[i]) <= 1e-13 * scale);
      }

    auto y = random_vec(N, rng, -1, 1), k1 = random_vec(N, rng, -1, 1), k2 = random_vec(N, rng, -1, 1),
         k3 = random_vec(N, rng, -1, 1), k4 = random_vec(N, rng, -1, 1);
    std::vector<double> a(N), b(N);
    kernels::scalar::rk4_combine(N, 0.1, y.data(), k1.data(), k2.data(), k3.data(), k4.data(), a.data());
    kernels::avx2::rk4_combine(N, 0.1, y.data(), k1.data(), k2.data(), k3.data(), k4.data(), b.data());
    for (std::size_t i = 0; i < N; ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-15).scale(1.0));
    kernels::scalar::axpy(N, -0.3, k1.data(), y.data(), a.data());
    kernels::avx2::axpy(N, -0.3, k1.data(), y.data(), b.data());
    for (std::size_t i = 0; i < N; ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-15).scale(1.0));

    auto A = random_vec(N, rng, 0.5, 2), dA = random_vec(N, rng, -1, 1), B = random_vec(N, rng, 0.5, 2),
         dB = random_vec(N, rng, -1, 1), d2B = random_vec(N, rng, -1, 1);
    for (double kappa : {1.0, 0.0, -1.0}) {
      kernels::WarpedPointwise in{g->points().data(), A.data(), dA.data(), B.data(), dB.data(),
                                  d2B.data(), kappa, 4};
      std::vector<double> o1[4], o2[4];
      for (int q = 0; q < 4; ++q) {
        o1[q].resize(N);
        o2[q].resize(N);
      }
      kernels::scalar::warped_curvature(N, in, {o1[0].data(), o1[1].data(), o1[2].data(), o1[3].data()});
      kernels::avx2::warped_curvature(N, in, {o2[0].data(), o2[1].data(), o2[2].data(), o2[3].data()});
      for (int q = 0; q < 4; ++q)
        for (std::size_t i = 0; i < N; ++i)
          CHECK(o1[q][i] == doctest::Approx(o2[q][i]).epsilon(1e-13).scale(1.0));
    }
  }
}

TEST_CASE("runtime dispatch can be forced to scalar") {
  auto before = kernels::active_isa();
  kernels::force_isa(kernels::Isa::scalar);
  CHECK(kernels::active_isa() == kernels::Isa::scalar);
  auto g = build_grid(32, 1.0, 1.0);
  std::vector<double> f;
  for (double x : g->points()) f.push_back(x);
  auto d = derivative(*g, f, 1, 2);
  for (double v : d) CHECK(v == doctest::Approx(1.0));
  if (kernels::cpu_has_avx2()) kernels::force_isa(before);
}
