#pragma once

#include <array>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include <json.hpp>

#include "ahflow/kernels.hpp"

namespace ahflow {

enum class SpacingPolicy { uniform, geometric, custom };

class RadialGrid;
using GridPtr = std::shared_ptr<const RadialGrid>;

// Radial points 0 < x_0 < ... < x_{N-1} = x_max. The conformal boundary x = 0
// is approached but never part of the grid.
class RadialGrid {
 public:
  static constexpr std::size_t min_points = 16;

  RadialGrid(std::vector<double> points, SpacingPolicy policy, double stretch);

  std::size_t size() const { return x_.size(); }
  const std::vector<double>& points() const { return x_; }
  double operator[](std::size_t i) const { return x_[i]; }
  double x_min() const { return x_.front(); }
  double x_max() const { return x_.back(); }
  double stretch() const { return stretch_; }
  SpacingPolicy policy() const { return policy_; }

  // Rows at each end served by one-sided stencils for the given accuracy.
  static int boundary_ghosts(int accuracy) { return accuracy / 2; }

  // Differentiation plan for order 1|2 and accuracy 2|4, built on first use.
  const kernels::StencilPlan& plan(int order, int accuracy) const;

  // Index of the last point <= x (clamped to the valid interval range).
  std::size_t locate(double x) const;

 private:
  std::vector<double> x_;
  SpacingPolicy policy_;
  double stretch_;
  mutable std::array<std::once_flag, 4> once_;
  mutable std::array<kernels::StencilPlan, 4> plans_;
};

// Geometric spacing shrinking toward x = 0; stretch is the ratio of the
// largest to the smallest spacing, and x_0 equals the smallest spacing.
GridPtr build_grid(std::size_t N, double x_max, double stretch);
GridPtr grid_from_points(std::vector<double> points);

struct ScalarField {
  GridPtr grid;
  std::vector<double> values;

  ScalarField() = default;
  ScalarField(GridPtr g, std::vector<double> v);  // checks length and finiteness
  std::size_t size() const { return values.size(); }
  double operator[](std::size_t i) const { return values[i]; }
};

ScalarField derivative(const ScalarField& f, int order, int accuracy);
std::vector<double> derivative(const RadialGrid& grid, const std::vector<double>& f, int order,
                               int accuracy);

// Finite-difference weights on arbitrary nodes (Fornberg's recursion).
// Returns weights for derivatives 0..max_order, indexed [order][node].
std::vector<std::vector<double>> fd_weights(double z, const double* nodes, int count, int max_order);

// Local Lagrange interpolation of sampled values with the given number of nodes.
double interpolate(const RadialGrid& grid, const std::vector<double>& f, double x, int nodes = 4);

struct ConvergenceReport {
  std::vector<double> resolutions;
  std::vector<double> errors;
  double order = 0.0;
  double residual = 0.0;
  bool monotone = true;
  bool indeterminate = false;
};

// Least-squares slope of -log(error) against log(resolution). Errors below
// floor count as exact and make the order indeterminate.
ConvergenceReport fit_convergence(const std::vector<double>& resolutions,
                                  const std::vector<double>& errors, double floor = 1e-13);

ConvergenceReport refinement_study(
    const std::function<std::vector<double>(const RadialGrid&)>& op,
    const std::function<double(double)>& reference, const std::vector<GridPtr>& levels);

nlohmann::json grid_to_json(const RadialGrid& grid);
GridPtr grid_from_json(const nlohmann::json& j);

}  // namespace ahflow
