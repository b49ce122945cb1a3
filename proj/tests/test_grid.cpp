#include <doctest.h>

#include <cmath>

#include "ahflow/error.hpp"
#include "ahflow/grid.hpp"

using namespace ahflow;

TEST_CASE("uniform grid endpoints") {
  auto g = build_grid(16, 1.0, 1.0);
  CHECK(g->size() == 16);
  CHECK(g->x_min() == doctest::Approx(1.0 / 16).epsilon(1e-14));
  CHECK(g->x_max() == 1.0);
}

TEST_CASE("stretched grid spacing ratio") {
  auto g = build_grid(16, 1.0, 4.0);
  const auto& x = g->points();
  double hmin = 1e9, hmax = 0;
  for (std::size_t i = 1; i < x.size(); ++i) {
    hmin = std::min(hmin, x[i] - x[i - 1]);
    hmax = std::max(hmax, x[i] - x[i - 1]);
  }
  CHECK(hmax / hmin == doctest::Approx(4.0).epsilon(1e-10));
  CHECK(g->x_min() <= 1.0 / 16);
}

TEST_CASE("grid preconditions") {
  CHECK_THROWS_AS(build_grid(8, 1.0, 1.0), Error);
  CHECK_THROWS_AS(build_grid(32, -1.0, 1.0), Error);
  CHECK_THROWS_AS(build_grid(32, 1.0, 25.0), Error);
  try {
    build_grid(8, 1.0, 1.0);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::invalid_parameter);
  }
}

TEST_CASE("derivatives exact on low-degree polynomials") {
  for (double stretch : {1.0, 4.0}) {
    auto g = build_grid(32, 1.0, stretch);
    std::vector<double> f1, f2, f4;
    for (double x : g->points()) {
      f1.push_back(x);
      f2.push_back(x * x);
      f4.push_back(x * x * x * x);
    }
    auto d = derivative(*g, f1, 1, 2);
    for (double v : d) CHECK(v == doctest::Approx(1.0).epsilon(1e-12));
    auto d2 = derivative(*g, f2, 2, 2);
    for (double v : d2) CHECK(v == doctest::Approx(2.0).epsilon(1e-9));
    auto d4 = derivative(*g, f4, 1, 4);
    for (std::size_t i = 0; i < g->size(); ++i)
      CHECK(d4[i] == doctest::Approx(4 * std::pow((*g)[i], 3)).epsilon(1e-9).scale(1.0));
  }
}

TEST_CASE("derivative is linear") {
  auto g = build_grid(64, 2.0, 4.0);
  std::vector<double> f, h, c;
  for (double x : g->points()) {
    f.push_back(std::sin(3 * x));
    h.push_back(std::exp(x));
    c.push_back(2.0 * std::sin(3 * x) - 0.5 * std::exp(x));
  }
  for (int order : {1, 2})
    for (int acc : {2, 4}) {
      auto df = derivative(*g, f, order, acc), dh = derivative(*g, h, order, acc),
           dc = derivative(*g, c, order, acc);
      for (std::size_t i = 0; i < f.size(); ++i)
        CHECK(dc[i] == doctest::Approx(2.0 * df[i] - 0.5 * dh[i]).epsilon(1e-10).scale(10.0));
    }
}

TEST_CASE("refinement study orders") {
  std::vector<GridPtr> levels;
  for (int N : {32, 64, 128, 256}) levels.push_back(build_grid(N, 1.0, 1.0));
  auto sin3 = [](const RadialGrid& g, int acc) {
    std::vector<double> f;
    for (double x : g.points()) f.push_back(std::sin(3 * x));
    return derivative(g, f, 1, acc);
  };
  auto ref = [](double x) { return 3 * std::cos(3 * x); };
  auto r2 = refinement_study([&](const RadialGrid& g) { return sin3(g, 2); }, ref, levels);
  CHECK(r2.order >= 1.8);
  CHECK(r2.order <= 2.2);
  CHECK(r2.monotone);
  auto r4 = refinement_study([&](const RadialGrid& g) { return sin3(g, 4); }, ref, levels);
  CHECK(r4.order >= 3.6);
  CHECK(r4.order <= 4.4);

  // Each doubling shrinks the 2nd-order error by roughly four.
  CHECK(r2.errors[0] / r2.errors[1] == doctest::Approx(4.0).epsilon(0.15));

  auto rc = refinement_study(
      [](const RadialGrid& g) { return derivative(g, std::vector<double>(g.size(), 3.0), 1, 2); },
      [](double) { return 0.0; }, levels);
  CHECK(rc.indeterminate);
}

TEST_CASE("stretched-grid refinement keeps nominal order") {
  std::vector<GridPtr> levels;
  for (int N : {32, 64, 128, 256}) levels.push_back(build_grid(N, 1.0, 4.0));
  for (int acc : {2, 4}) {
    auto r = refinement_study(
        [&](const RadialGrid& g) {
          std::vector<double> f;
          for (double x : g.points()) f.push_back(std::sin(3 * x));
          return derivative(g, f, 2, acc);
        },
        [](double x) { return -9 * std::sin(3 * x); }, levels);
    CHECK(r.order >= acc - 0.3);
  }
}

TEST_CASE("grid json round trip") {
  auto g = build_grid(20, 1.5, 3.0);
  auto j = grid_to_json(*g);
  CHECK(j["N"] == 20);
  auto g2 = grid_from_json(j);
  CHECK(g2->points() == g->points());
}
