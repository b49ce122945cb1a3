#include "ahflow/grid.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ahflow/error.hpp"

namespace ahflow {

RadialGrid::RadialGrid(std::vector<double> points, SpacingPolicy policy, double stretch)
    : x_(std::move(points)), policy_(policy), stretch_(stretch) {
  if (x_.size() < min_points)
    throw Error(ErrorKind::invalid_parameter,
                "grid needs at least 16 points, got " + std::to_string(x_.size()));
  if (!(x_.front() > 0.0)) throw Error(ErrorKind::invalid_parameter, "grid must satisfy x_0 > 0");
  for (std::size_t i = 0; i < x_.size(); ++i) {
    if (!std::isfinite(x_[i])) throw Error(ErrorKind::invalid_parameter, "non-finite grid point");
    if (i && !(x_[i] > x_[i - 1]))
      throw Error(ErrorKind::invalid_parameter, "grid points must be strictly increasing");
  }
}

GridPtr build_grid(std::size_t N, double x_max, double stretch) {
  if (N < RadialGrid::min_points)
    throw Error(ErrorKind::invalid_parameter, "N must be >= 16, got " + std::to_string(N));
  if (!(x_max > 0.0) || !std::isfinite(x_max))
    throw Error(ErrorKind::invalid_parameter, "x_max must be positive");
  if (!(stretch >= 1.0 && stretch <= 20.0))
    throw Error(ErrorKind::invalid_parameter, "stretch must lie in [1, 20]");

  const double q = std::pow(stretch, 1.0 / double(N - 2));
  double total = 1.0;  // x_0 = h_0
  double hk = 1.0;
  for (std::size_t i = 0; i + 1 < N; ++i) {
    total += hk;
    hk *= q;
  }
  const double h0 = x_max / total;
  std::vector<double> x(N);
  x[0] = h0;
  hk = h0;
  for (std::size_t i = 1; i < N; ++i) {
    x[i] = x[i - 1] + hk;
    hk *= q;
  }
  x[N - 1] = x_max;
  auto policy = stretch == 1.0 ? SpacingPolicy::uniform : SpacingPolicy::geometric;
  return std::make_shared<const RadialGrid>(std::move(x), policy, stretch);
}

GridPtr grid_from_points(std::vector<double> points) {
  double smax = 0.0, smin = std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < points.size(); ++i) {
    smax = std::max(smax, points[i] - points[i - 1]);
    smin = std::min(smin, points[i] - points[i - 1]);
  }
  double ratio = points.size() > 1 && smin > 0 ? smax / smin : 1.0;
  return std::make_shared<const RadialGrid>(std::move(points), SpacingPolicy::custom, ratio);
}

std::size_t RadialGrid::locate(double x) const {
  auto it = std::upper_bound(x_.begin(), x_.end(), x);
  std::size_t i = it == x_.begin() ? 0 : std::size_t(it - x_.begin()) - 1;
  return std::min(i, x_.size() - 2);
}

std::vector<std::vector<double>> fd_weights(double z, const double* nodes, int count, int max_order) {
  std::vector<std::vector<double>> c(max_order + 1, std::vector<double>(count, 0.0));
  double c1 = 1.0;
  double c4 = nodes[0] - z;
  c[0][0] = 1.0;
  for (int i = 1; i < count; ++i) {
    const int mn = std::min(i, max_order);
    double c2 = 1.0;
    const double c5 = c4;
    c4 = nodes[i] - z;
    for (int j = 0; j < i; ++j) {
      const double c3 = nodes[i] - nodes[j];
      c2 *= c3;
      if (j == i - 1) {
        for (int k = mn; k >= 1; --k) c[k][i] = c1 * (k * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
        c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
      }
      for (int k = mn; k >= 1; --k) c[k][j] = (c4 * c[k][j] - k * c[k - 1][j]) / c3;
      c[0][j] = c4 * c[0][j] / c3;
    }
    c1 = c2;
  }
  return c;
}

const kernels::StencilPlan& RadialGrid::plan(int order, int accuracy) const {
  if (order != 1 && order != 2)
    throw Error(ErrorKind::invalid_parameter, "derivative order must be 1 or 2");
  if (accuracy != 2 && accuracy != 4)
    throw Error(ErrorKind::invalid_parameter, "accuracy must be 2 or 4");
  const int width = accuracy + 1;
  const int edge = accuracy + order;
  const std::size_t n = x_.size();
  if (n < std::size_t(2 * edge))
    throw Error(ErrorKind::stencil_underflow,
                "grid of " + std::to_string(n) + " points too small for accuracy " +
                    std::to_string(accuracy));
  const int slot = (order - 1) * 2 + (accuracy == 4 ? 1 : 0);
  std::call_once(once_[slot], [&] {
    kernels::StencilPlan p;
    p.n = n;
    p.width = width;
    p.half = accuracy / 2;
    p.lo = std::size_t(p.half);
    p.hi = n - std::size_t(p.half);
    p.w.assign(std::size_t(width) * n, 0.0);
    for (std::size_t i = p.lo; i < p.hi; ++i) {
      auto c = fd_weights(x_[i], &x_[i - p.half], width, order);
      for (int k = 0; k < width; ++k) p.w[k * n + i] = c[order][k];
    }
    for (int r = 0; r < p.half; ++r) {
      kernels::StencilPlan::EdgeRow left;
      left.row = std::size_t(r);
      left.start = 0;
      left.weights = fd_weights(x_[r], &x_[0], edge, order)[order];
      p.edge_rows.push_back(std::move(left));
      kernels::StencilPlan::EdgeRow right;
      right.row = n - 1 - std::size_t(r);
      right.start = n - std::size_t(edge);
      right.weights = fd_weights(x_[right.row], &x_[right.start], edge, order)[order];
      p.edge_rows.push_back(std::move(right));
    }
    plans_[slot] = std::move(p);
  });
  return plans_[slot];
}

ScalarField::ScalarField(GridPtr g, std::vector<double> v) : grid(std::move(g)), values(std::move(v)) {
  if (!grid) throw Error(ErrorKind::invalid_parameter, "field without grid");
  if (values.size() != grid->size())
    throw Error(ErrorKind::invalid_parameter, "field length does not match grid size");
  for (double value : values)
    if (!std::isfinite(value)) throw Error(ErrorKind::invalid_parameter, "non-finite field value");
}

std::vector<double> derivative(const RadialGrid& grid, const std::vector<double>& f, int order,
                               int accuracy) {
  if (f.size() != grid.size())
    throw Error(ErrorKind::invalid_parameter, "field length does not match grid size");
  std::vector<double> out(f.size());
  kernels::apply_stencil(grid.plan(order, accuracy), f.data(), out.data());
  return out;
}

ScalarField derivative(const ScalarField& f, int order, int accuracy) {
  return ScalarField(f.grid, derivative(*f.grid, f.values, order, accuracy));
}

double interpolate(const RadialGrid& grid, const std::vector<double>& f, double x, int nodes) {
  const std::size_t n = grid.size();
  std::size_t i = grid.locate(x);
  long start = long(i) - (nodes / 2 - 1);
  start = std::clamp(start, 0L, long(n) - nodes);
  double acc = 0.0;
  const auto& p = grid.points();
  for (int a = 0; a < nodes; ++a) {
    double l = 1.0;
    for (int b = 0; b < nodes; ++b)
      if (b != a) l *= (x - p[start + b]) / (p[start + a] - p[start + b]);
    acc += l * f[start + a];
  }
  return acc;
}

ConvergenceReport fit_convergence(const std::vector<double>& resolutions,
                                  const std::vector<double>& errors, double floor) {
  ConvergenceReport rep;
  rep.resolutions = resolutions;
  rep.errors = errors;
  const std::size_t k = errors.size();
  if (k < 2 || resolutions.size() != k)
    throw Error(ErrorKind::invalid_parameter, "convergence fit needs at least two levels");
  bool all_floor = true;
  for (std::size_t i = 0; i < k; ++i) {
    if (errors[i] > floor) all_floor = false;
    if (i && !(errors[i] < errors[i - 1])) rep.monotone = false;
  }
  if (all_floor) {
    rep.indeterminate = true;
    rep.monotone = true;
    return rep;
  }
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < k; ++i) {
    double lx = std::log(resolutions[i]);
    double ly = std::log(std::max(errors[i], 1e-300));
    sx += lx; sy += ly; sxx += lx * lx; sxy += lx * ly;
  }
  const double slope = (k * sxy - sx * sy) / (k * sxx - sx * sx);
  const double icept = (sy - slope * sx) / k;
  double ss = 0;
  for (std::size_t i = 0; i < k; ++i) {
    double r = std::log(std::max(errors[i], 1e-300)) - (icept + slope * std::log(resolutions[i]));
    ss += r * r;
  }
  rep.order = -slope;
  rep.residual = std::sqrt(ss / k);
  return rep;
}

ConvergenceReport refinement_study(
    const std::function<std::vector<double>(const RadialGrid&)>& op,
    const std::function<double(double)>& reference, const std::vector<GridPtr>& levels) {
  if (levels.size() < 3) throw Error(ErrorKind::invalid_parameter, "refinement study needs >= 3 levels");
  std::vector<double> res, err;
  double scale = 0.0;
  for (const auto& g : levels) {
    auto v = op(*g);
    double e = 0.0;
    for (std::size_t i = 0; i < g->size(); ++i) {
      double r = reference((*g)[i]);
      scale = std::max(scale, std::abs(r));
      e = std::max(e, std::abs(v[i] - r));
    }
    res.push_back(double(g->size()));
    err.push_back(e);
  }
  return fit_convergence(res, err, 1e-12 * std::max(scale, 1.0));
}

nlohmann::json grid_to_json(const RadialGrid& grid) {
  return {{"N", grid.size()}, {"x_max", grid.x_max()}, {"stretch", grid.stretch()},
          {"points", grid.points()}};
}

GridPtr grid_from_json(const nlohmann::json& j) {
  auto pts = j.at("points").get<std::vector<double>>();
  double stretch = j.value("stretch", 1.0);
  auto policy = stretch == 1.0 ? SpacingPolicy::uniform : SpacingPolicy::geometric;
  return std::make_shared<const RadialGrid>(std::move(pts), policy, stretch);
}

}  // namespace ahflow
