// Compiled with -mavx2 -mfma; only reached after the runtime CPU check.
#include <immintrin.h>

#include "internal.hpp"

namespace ahflow::kernels::avx2 {

void apply_stencil(const StencilPlan& plan, const double* f, double* out) {
  const std::size_t n = plan.n;
  std::size_t i = plan.lo;
  for (; i + 4 <= plan.hi; i += 4) {
    const double* base = f + (i - plan.half);
    __m256d acc = _mm256_setzero_pd();
    for (int k = 0; k < plan.width; ++k) {
      __m256d wk = _mm256_loadu_pd(&plan.w[k * n + i]);
      __m256d fk = _mm256_loadu_pd(base + k);
      acc = _mm256_fmadd_pd(wk, fk, acc);
    }
    _mm256_storeu_pd(out + i, acc);
  }
  for (; i < plan.hi; ++i) {
    const double* base = f + (i - plan.half);
    double acc = 0.0;
    for (int k = 0; k < plan.width; ++k) acc += plan.w[k * n + i] * base[k];
    out[i] = acc;
  }
  scalar::apply_edge_rows(plan, f, out);
}

void axpy(std::size_t n, double a, const double* x, const double* y, double* out) {
  const __m256d va = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d r = _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i));
    _mm256_storeu_pd(out + i, r);
  }
  for (; i < n; ++i) out[i] = y[i] + a * x[i];
}

void rk4_combine(std::size_t n, double dt, const double* y, const double* k1, const double* k2,
                 const double* k3, const double* k4, double* out) {
  const double c = dt / 6.0;
  const __m256d vc = _mm256_set1_pd(c);
  const __m256d two = _mm256_set1_pd(2.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d s = _mm256_add_pd(_mm256_loadu_pd(k2 + i), _mm256_loadu_pd(k3 + i));
    __m256d t = _mm256_add_pd(_mm256_loadu_pd(k1 + i), _mm256_loadu_pd(k4 + i));
    __m256d sum = _mm256_fmadd_pd(two, s, t);
    _mm256_storeu_pd(out + i, _mm256_fmadd_pd(vc, sum, _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) out[i] = y[i] + c * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
}

void warped_curvature(std::size_t n, const WarpedPointwise& in, const WarpedCurvature& out) {
  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d half = _mm256_set1_pd(0.5);
  const __m256d quarter = _mm256_set1_pd(0.25);
  const __m256d kap = _mm256_set1_pd(in.kappa);
  const __m256d vm = _mm256_set1_pd(in.m);
  const __m256d vm1 = _mm256_set1_pd(in.m - 1.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d x = _mm256_loadu_pd(in.x + i);
    __m256d ia = _mm256_div_pd(one, _mm256_loadu_pd(in.A + i));
    __m256d ib = _mm256_div_pd(one, _mm256_loadu_pd(in.B + i));
    __m256d al = _mm256_mul_pd(_mm256_loadu_pd(in.dA + i), ia);
    __m256d be = _mm256_mul_pd(_mm256_loadu_pd(in.dB + i), ib);
    __m256d be2 = _mm256_mul_pd(_mm256_loadu_pd(in.d2B + i), ib);
    __m256d bma = _mm256_sub_pd(be, al);
    // 0.5 (be2 - be^2) + 0.25 (be - al) be
    __m256d br = _mm256_mul_pd(half, _mm256_fnmadd_pd(be, be, be2));
    br = _mm256_fmadd_pd(_mm256_mul_pd(quarter, bma), be, br);
    __m256d xia = _mm256_mul_pd(x, ia);
    __m256d kr = _mm256_sub_pd(_mm256_mul_pd(_mm256_mul_pd(half, xia), bma), ia);
    kr = _mm256_fnmadd_pd(_mm256_mul_pd(x, xia), br, kr);
    __m256d s = _mm256_fmsub_pd(_mm256_mul_pd(half, x), be, one);
    __m256d kt = _mm256_mul_pd(_mm256_mul_pd(kap, _mm256_mul_pd(x, x)), ib);
    kt = _mm256_fnmadd_pd(_mm256_mul_pd(s, s), ia, kt);
    _mm256_storeu_pd(out.K_rad + i, kr);
    _mm256_storeu_pd(out.K_tan + i, kt);
    _mm256_storeu_pd(out.h_rad + i, _mm256_mul_pd(vm, _mm256_add_pd(kr, one)));
    _mm256_storeu_pd(out.h_tan + i, _mm256_add_pd(_mm256_fmadd_pd(vm1, kt, kr), vm));
  }
  if (i < n) {
    WarpedPointwise rest{in.x + i, in.A + i, in.dA + i, in.B + i, in.dB + i, in.d2B + i, in.kappa, in.m};
    WarpedCurvature tail{out.K_rad + i, out.K_tan + i, out.h_rad + i, out.h_tan + i};
    scalar::warped_curvature(n - i, rest, tail);
  }
}

}  // namespace ahflow::kernels::avx2
