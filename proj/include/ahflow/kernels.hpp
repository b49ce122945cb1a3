#pragma once

// Hot inner loops of the flow: stencil application, Runge-Kutta stage
// combination and the pointwise curvature of a warped metric. Each kernel has
// a scalar reference and an AVX2/FMA variant; the variant is chosen once at
// runtime from CPU features and can be forced with AHFLOW_ISA=scalar|avx2.

#include <cstddef>
#include <vector>

namespace ahflow::kernels {

// Finite-difference operator laid out for vectorised interior rows.
// Row i in [lo, hi) reads points i - half ... i - half + width - 1 with
// weights w[k * n + i]; the remaining rows carry their own weights.
struct StencilPlan {
  struct EdgeRow {
    std::size_t row = 0;
    std::size_t start = 0;
    std::vector<double> weights;
  };
  std::size_t n = 0;
  int width = 0;
  int half = 0;
  std::size_t lo = 0;
  std::size_t hi = 0;
  std::vector<double> w;
  std::vector<EdgeRow> edge_rows;
};

// Inputs of the pointwise warped-product curvature kernel.
struct WarpedPointwise {
  const double* x;
  const double* A;
  const double* dA;
  const double* B;
  const double* dB;
  const double* d2B;
  double kappa;
  int m;  // cross-section dimension n - 1
};

// Outputs: sectional curvatures and the frame components of h = Ric + (n-1)g.
struct WarpedCurvature {
  double* K_rad;
  double* K_tan;
  double* h_rad;
  double* h_tan;
};

enum class Isa { scalar, avx2 };

bool cpu_has_avx2();
Isa active_isa();
void force_isa(Isa isa);  // throws if avx2 is requested on a CPU without it
const char* isa_name(Isa isa);

void apply_stencil(const StencilPlan& plan, const double* f, double* out);
void axpy(std::size_t n, double a, const double* x, const double* y, double* out);
void rk4_combine(std::size_t n, double dt, const double* y, const double* k1, const double* k2,
                 const double* k3, const double* k4, double* out);
void warped_curvature(std::size_t n, const WarpedPointwise& in, const WarpedCurvature& out);

namespace scalar {
void apply_stencil(const StencilPlan& plan, const double* f, double* out);
void axpy(std::size_t n, double a, const double* x, const double* y, double* out);
void rk4_combine(std::size_t n, double dt, const double* y, const double* k1, const double* k2,
                 const double* k3, const double* k4, double* out);
void warped_curvature(std::size_t n, const WarpedPointwise& in, const WarpedCurvature& out);
}  // namespace scalar

namespace avx2 {
void apply_stencil(const StencilPlan& plan, const double* f, double* out);
void axpy(std::size_t n, double a, const double* x, const double* y, double* out);
void rk4_combine(std::size_t n, double dt, const double* y, const double* k1, const double* k2,
                 const double* k3, const double* k4, double* out);
void warped_curvature(std::size_t n, const WarpedPointwise& in, const WarpedCurvature& out);
}  // namespace avx2

}  // namespace ahflow::kernels
