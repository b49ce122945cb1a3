#include <atomic>
#include <cstdlib>
#include <cstring>

#include "ahflow/error.hpp"
#include "ahflow/kernels.hpp"

namespace ahflow::kernels {

namespace {

Isa detect() {
  const char* env = std::getenv("AHFLOW_ISA");
  if (env && std::strcmp(env, "scalar") == 0) return Isa::scalar;
  return cpu_has_avx2() ? Isa::avx2 : Isa::scalar;
}

std::atomic<Isa>& current() {
  static std::atomic<Isa> isa{detect()};
  return isa;
}

}  // namespace

bool cpu_has_avx2() {
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
}

Isa active_isa() { return current().load(std::memory_order_relaxed); }

void force_isa(Isa isa) {
  if (isa == Isa::avx2 && !cpu_has_avx2())
    throw Error(ErrorKind::invalid_parameter, "avx2 kernels requested but CPU lacks avx2/fma");
  current().store(isa);
}

const char* isa_name(Isa isa) { return isa == Isa::avx2 ? "avx2" : "scalar"; }

void apply_stencil(const StencilPlan& plan, const double* f, double* out) {
  if (active_isa() == Isa::avx2) avx2::apply_stencil(plan, f, out);
  else scalar::apply_stencil(plan, f, out);
}

void axpy(std::size_t n, double a, const double* x, const double* y, double* out) {
  if (active_isa() == Isa::avx2) avx2::axpy(n, a, x, y, out);
  else scalar::axpy(n, a, x, y, out);
}

void rk4_combine(std::size_t n, double dt, const double* y, const double* k1, const double* k2,
                 const double* k3, const double* k4, double* out) {
  if (active_isa() == Isa::avx2) avx2::rk4_combine(n, dt, y, k1, k2, k3, k4, out);
  else scalar::rk4_combine(n, dt, y, k1, k2, k3, k4, out);
}

void warped_curvature(std::size_t n, const WarpedPointwise& in, const WarpedCurvature& out) {
  if (active_isa() == Isa::avx2) avx2::warped_curvature(n, in, out);
  else scalar::warped_curvature(n, in, out);
}

}  // namespace ahflow::kernels
