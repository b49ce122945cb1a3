#include "internal.hpp"

namespace ahflow::kernels::scalar {

void apply_edge_rows(const StencilPlan& plan, const double* f, double* out) {
  for (const auto& row : plan.edge_rows) {
    double acc = 0.0;
    for (std::size_t k = 0; k < row.weights.size(); ++k) acc += row.weights[k] * f[row.start + k];
    out[row.row] = acc;
  }
}

void apply_stencil(const StencilPlan& plan, const double* f, double* out) {
  const std::size_t n = plan.n;
  for (std::size_t i = plan.lo; i < plan.hi; ++i) {
    const double* base = f + (i - plan.half);
    double acc = 0.0;
    for (int k = 0; k < plan.width; ++k) acc += plan.w[k * n + i] * base[k];
    out[i] = acc;
  }
  apply_edge_rows(plan, f, out);
}

void axpy(std::size_t n, double a, const double* x, const double* y, double* out) {
  for (std::size_t i = 0; i < n; ++i) out[i] = y[i] + a * x[i];
}

void rk4_combine(std::size_t n, double dt, const double* y, const double* k1, const double* k2,
                 const double* k3, const double* k4, double* out) {
  const double c = dt / 6.0;
  for (std::size_t i = 0; i < n; ++i)
    out[i] = y[i] + c * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
}

void warped_curvature(std::size_t n, const WarpedPointwise& in, const WarpedCurvature& out) {
  const double m = in.m;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = in.x[i];
    const double ia = 1.0 / in.A[i];
    const double ib = 1.0 / in.B[i];
    const double al = in.dA[i] * ia;
    const double be = in.dB[i] * ib;
    const double be2 = in.d2B[i] * ib;
    const double kr = -ia - x * x * ia * (0.5 * (be2 - be * be) + 0.25 * (be - al) * be) +
                      0.5 * x * ia * (be - al);
    const double s = 0.5 * x * be - 1.0;
    const double kt = in.kappa * x * x * ib - s * s * ia;
    out.K_rad[i] = kr;
    out.K_tan[i] = kt;
    out.h_rad[i] = m * (kr + 1.0);
    out.h_tan[i] = kr + (m - 1.0) * kt + m;
  }
}

}  // namespace ahflow::kernels::scalar
