#include "ahflow/normal_form.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "ahflow/error.hpp"

namespace ahflow {

namespace {

// Value at 0 of the quadratic through three samples.
double extrapolate_to_zero(const double* x, const double* f) {
  double acc = 0.0;
  for (int a = 0; a < 3; ++a) {
    double l = 1.0;
    for (int b = 0; b < 3; ++b)
      if (b != a) l *= (0.0 - x[b]) / (x[a] - x[b]);
    acc += l * f[a];
  }
  return acc;
}

}  // namespace

NormalFormMetric to_normal_form(const WarpedMetric& m, int accuracy) {
  m.validate();
  const auto& x = m.grid()->points();
  const std::size_t np = x.size();

  const double B0 = extrapolate_to_zero(x.data(), m.B.values.data());
  if (!(B0 > 1e-8)) {
    std::ostringstream os;
    os << "B extrapolates to " << B0 << " at the boundary; metric is not conformally compact";
    throw Error(ErrorKind::gauge_failure, os.str());
  }
  std::vector<double> sa(np);
  for (std::size_t i = 0; i < np; ++i) sa[i] = std::sqrt(m.A[i]);
  const double sa0 = extrapolate_to_zero(x.data(), sa.data());
  if (std::abs(sa0 - 1.0) > 1e-3) {
    std::ostringstream os;
    os << "sqrt(A) extrapolates to " << sa0 << " at the boundary instead of 1";
    throw Error(ErrorKind::gauge_failure, os.str());
  }

  // I(x) = int_0^x (sqrt(A) - 1)/y dy; r = x e^I.
  std::vector<double> q(np);
  for (std::size_t i = 0; i < np; ++i) q[i] = (sa[i] - 1.0) / x[i];
  std::vector<double> I(np);
  {
    // [0, x0]: integrate the quadratic through the first three samples exactly.
    double c[3];
    const double x0 = x[0], x1 = x[1], x2 = x[2];
    double acc = 0.0;
    for (int a = 0; a < 3; ++a) {
      const double xa = x[a];
      const double p = a == 0 ? x1 : x0, r2 = a == 2 ? x1 : x2;
      const double den = (xa - p) * (xa - r2);
      // l_a(y) = (y - p)(y - r2)/den, integral over [0, x0]
      c[a] = (x0 * x0 * x0 / 3.0 - (p + r2) * x0 * x0 / 2.0 + p * r2 * x0) / den;
      acc += c[a] * q[a];
    }
    I[0] = acc;
  }
  static const double gx[3] = {-0.7745966692414834, 0.0, 0.7745966692414834};
  static const double gw[3] = {5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0};
  for (std::size_t i = 0; i + 1 < np; ++i) {
    long s = std::clamp(long(i) - 1, 0L, long(np) - 4);
    const double mid = 0.5 * (x[i] + x[i + 1]), half = 0.5 * (x[i + 1] - x[i]);
    double acc = 0.0;
    for (int k = 0; k < 3; ++k) {
      const double y = mid + half * gx[k];
      double v = 0.0;
      for (int a = 0; a < 4; ++a) {
        double l = 1.0;
        for (int bb = 0; bb < 4; ++bb)
          if (bb != a) l *= (y - x[s + bb]) / (x[s + a] - x[s + bb]);
        v += l * q[s + a];
      }
      acc += gw[k] * v;
    }
    I[i + 1] = I[i] + half * acc;
  }

  std::vector<double> r(np), b(np);
  for (std::size_t i = 0; i < np; ++i) {
    r[i] = x[i] * std::exp(I[i]);
    b[i] = std::exp(2.0 * I[i]) * m.B[i];
    if (!std::isfinite(r[i]) || (i && !(r[i] > r[i - 1])))
      throw Error(ErrorKind::gauge_failure, "geodesic defining function lost monotonicity");
  }

  NormalFormMetric nf;
  nf.n = m.n;
  nf.cross_section = m.cross_section;
  nf.x_grid = m.grid();
  nf.r_grid = grid_from_points(r);
  nf.b = b;
  nf.db = derivative(*nf.r_grid, b, 1, accuracy);
  nf.d2b = derivative(*nf.r_grid, b, 2, accuracy);
  nf.b0 = extrapolate_to_zero(r.data(), b.data());

  auto drdx = derivative(*m.grid(), r, 1, accuracy);
  double res = 0.0;
  for (std::size_t i = 0; i < np; ++i)
    res = std::max(res, std::abs(drdx[i] * x[i] / (r[i] * sa[i]) - 1.0));
  nf.gauge_residual = res;
  return nf;
}

NormalFormPinching pinching_normal_form(const NormalFormMetric& nf) {
  const auto& r = nf.r();
  const std::size_t np = r.size();
  const double m = nf.m(), n = nf.n, kappa = nf.kappa();
  NormalFormPinching p;
  for (auto* v : {&p.h_nn, &p.h_na, &p.h_ab, &p.h_rad, &p.h_tan, &p.norm_h}) v->resize(np);
  // Tangential derivative of gbar' vanishes for radial data; kept explicit so
  // the h_na formula is evaluated rather than assumed.
  const std::vector<double> tangential_db(np, 0.0);
  for (std::size_t i = 0; i < np; ++i) {
    const double ri = r[i], b = nf.b[i], b1 = nf.db[i], b2 = nf.d2b[i];
    const double tr1 = m * b1 / b;            // gbar^{ab} gbar'_ab
    const double tr11 = m * b1 * b1 / (b * b);  // gbar^{ab} gbar^{cd} g'_ad g'_cb
    const double tr2 = m * b2 / b;            // gbar^{ab} gbar''_ab
    p.h_nn[i] = 0.5 * tr1 / ri + 0.25 * tr11 - 0.5 * tr2;
    p.h_na[i] = 0.5 / b * (-m * tangential_db[i] + tangential_db[i]);
    p.h_ab[i] = -0.5 * b2 + (0.5 * n - 1.0) * b1 / ri + 0.5 * tr1 * b / ri - 0.25 * tr1 * b1 +
                0.5 * b1 * b1 / b + kappa * (n - 2.0);
    p.h_rad[i] = ri * ri * p.h_nn[i];
    p.h_tan[i] = ri * ri * p.h_ab[i] / b;
    p.norm_h[i] = std::sqrt(p.h_rad[i] * p.h_rad[i] + m * p.h_tan[i] * p.h_tan[i]);
  }
  return p;
}

NormalFormRiemann riemann_normal_form(const NormalFormMetric& nf) {
  const auto& r = nf.r();
  const std::size_t np = r.size();
  const double m = nf.m(), kappa = nf.kappa();
  NormalFormRiemann R;
  for (auto* v : {&R.c_nn, &R.c_tt, &R.r_nt, &R.K_rad, &R.K_tan, &R.ric_nn, &R.ric_ab, &R.R, &R.norm_rm})
    v->resize(np);
  for (std::size_t i = 0; i < np; ++i) {
    const double ri = r[i], b = nf.b[i], b1 = nf.db[i], b2 = nf.d2b[i];
    const double r2 = ri * ri, r3 = r2 * ri, r4 = r2 * r2;
    R.c_nn[i] = -b / r4 + 0.5 * b1 / r3 + 0.25 * b1 * b1 / (b * r2) - 0.5 * b2 / r2;
    R.r_nt[i] = 0.0;
    R.c_tt[i] = -b * b / r4 - 0.25 * b1 * b1 / r2 + b * b1 / r3 + kappa * b / r2;
    R.K_rad[i] = R.c_nn[i] * r4 / b;
    R.K_tan[i] = R.c_tt[i] * r4 / (b * b);
    // Contractions with g^nn = r^2 and g^ab = r^2/b sigma^ab.
    R.ric_nn[i] = m * (r2 / b) * R.c_nn[i];
    R.ric_ab[i] = r2 * R.c_nn[i] + (m - 1.0) * (r2 / b) * R.c_tt[i];
    R.R[i] = r2 * R.ric_nn[i] + m * (r2 / b) * R.ric_ab[i];
    R.norm_rm[i] = 2.0 * std::sqrt(m * R.K_rad[i] * R.K_rad[i] +
                                   0.5 * m * (m - 1.0) * R.K_tan[i] * R.K_tan[i]);
  }
  return R;
}

nlohmann::json normal_form_table(const NormalFormMetric& nf) {
  return {{"x", nf.x_grid->points()}, {"r", nf.r()}, {"b", nf.b}, {"b0", nf.b0},
          {"gauge_residual", nf.gauge_residual}, {"n", nf.n},
          {"cross_section", cross_section_name(nf.cross_section)}};
}

}  // namespace ahflow
