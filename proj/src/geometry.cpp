#include "ahflow/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "ahflow/error.hpp"
#include "ahflow/kernels.hpp"
#include "ahflow/numeric.hpp"

namespace ahflow {

double cross_section_kappa(CrossSection cs) {
  switch (cs) {
    case CrossSection::sphere: return 1.0;
    case CrossSection::torus: return 0.0;
    case CrossSection::hyperbolic: return -1.0;
  }
  return 1.0;
}

const char* cross_section_name(CrossSection cs) {
  switch (cs) {
    case CrossSection::sphere: return "sphere";
    case CrossSection::torus: return "torus";
    case CrossSection::hyperbolic: return "hyperbolic";
  }
  return "sphere";
}

CrossSection parse_cross_section(const std::string& name) {
  if (name == "sphere") return CrossSection::sphere;
  if (name == "torus") return CrossSection::torus;
  if (name == "hyperbolic") return CrossSection::hyperbolic;
  throw Error(ErrorKind::invalid_parameter, "unknown cross-section '" + name + "'");
}

void WarpedMetric::validate() const {
  if (n < 4 || n > 8)
    throw Error(ErrorKind::invalid_parameter, "dimension must lie in [4, 8], got " + std::to_string(n));
  if (!A.grid || A.grid != B.grid || A.size() != B.size())
    throw Error(ErrorKind::invalid_parameter, "A and B must share one grid");
  for (std::size_t i = 0; i < A.size(); ++i) {
    if (!std::isfinite(A[i]) || !std::isfinite(B[i]))
      throw Error(ErrorKind::nonpositive_metric, "non-finite metric coefficient");
    if (!(A[i] > 0.0) || !(B[i] > 0.0)) {
      std::ostringstream os;
      os << "metric coefficient not positive at x = " << (*A.grid)[i];
      throw Error(ErrorKind::nonpositive_metric, os.str());
    }
  }
}

WarpedMetric einstein_model(const GridPtr& grid, int n, CrossSection cs) {
  const double k = cross_section_kappa(cs);
  std::vector<double> a(grid->size(), 1.0), b(grid->size());
  for (std::size_t i = 0; i < grid->size(); ++i) {
    double u = 1.0 - k * (*grid)[i] * (*grid)[i] / 4.0;
    b[i] = u * u;
  }
  WarpedMetric m{n, cs, ScalarField(grid, a), ScalarField(grid, b), 0.0};
  m.validate();
  return m;
}

std::vector<std::pair<std::string, const std::vector<double>*>> CurvatureBundle::fields() const {
  return {{"gamma_x_xx", &gamma_x_xx}, {"gamma_x_ss", &gamma_x_ss}, {"gamma_s_xs", &gamma_s_xs},
          {"H", &H}, {"K_rad", &K_rad}, {"K_tan", &K_tan}, {"ric_rad", &ric_rad},
          {"ric_tan", &ric_tan}, {"ric_xx", &ric_xx}, {"ric_ss", &ric_ss}, {"R", &R},
          {"h_rad", &h_rad}, {"h_tan", &h_tan}, {"h_xx", &h_xx}, {"h_ss", &h_ss},
          {"norm_rm", &norm_rm}, {"norm_h", &norm_h}, {"norm_grad_h", &norm_grad_h},
          {"norm_grad_rm", &norm_grad_rm}, {"norm_grad2_h", &norm_grad2_h},
          {"norm_grad2_rm", &norm_grad2_rm}};
}

namespace {

struct Pointwise {
  std::vector<double> dA, dB, d2B, K_rad, K_tan, h_rad, h_tan;
};

Pointwise pointwise_curvature(const WarpedMetric& m, int accuracy) {
  const auto& grid = *m.grid();
  const std::size_t np = grid.size();
  Pointwise p;
  p.dA = derivative(grid, m.A.values, 1, accuracy);
  p.dB = derivative(grid, m.B.values, 1, accuracy);
  p.d2B = derivative(grid, m.B.values, 2, accuracy);
  p.K_rad.resize(np);
  p.K_tan.resize(np);
  p.h_rad.resize(np);
  p.h_tan.resize(np);
  kernels::WarpedPointwise in{grid.points().data(), m.A.values.data(), p.dA.data(),
                              m.B.values.data(), p.dB.data(), p.d2B.data(), m.kappa(), m.m()};
  kernels::WarpedCurvature out{p.K_rad.data(), p.K_tan.data(), p.h_rad.data(), p.h_tan.data()};
  kernels::warped_curvature(np, in, out);
  return p;
}

FrameContext make_context(const WarpedMetric& m, const std::vector<double>& dB, int accuracy) {
  const auto& x = m.grid()->points();
  FrameContext ctx;
  ctx.grid = m.grid();
  ctx.m = m.m();
  ctx.accuracy = accuracy;
  ctx.H.resize(x.size());
  ctx.e0_scale.resize(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double sa = std::sqrt(m.A[i]);
    ctx.H[i] = (0.5 * x[i] * dB[i] / m.B[i] - 1.0) / sa;
    ctx.e0_scale[i] = x[i] / sa;
  }
  return ctx;
}

}  // namespace

WarpedFrame warped_frame(const WarpedMetric& m, int accuracy) {
  m.validate();
  auto p = pointwise_curvature(m, accuracy);
  const std::size_t np = m.size();
  const int dim = m.m();
  WarpedFrame f{make_context(m, p.dB, accuracy), p.K_rad, p.K_tan, metric_tensor(dim, np),
                symmetric_two_tensor(dim, p.h_rad, p.h_tan), FrameTensor(2, dim, np),
                riemann_tensor(dim, p.K_rad, p.K_tan)};
  f.ric = contract(f.rm, 1, 3);
  return f;
}

CurvatureBundle curvature_closed_form(const WarpedMetric& m, const CurvatureOptions& opt) {
  m.validate();
  const auto& x = m.grid()->points();
  const std::size_t np = x.size();
  const int dim = m.m();
  auto p = pointwise_curvature(m, opt.accuracy);

  CurvatureBundle b;
  b.grid = m.grid();
  b.n = m.n;
  b.K_rad = p.K_rad;
  b.K_tan = p.K_tan;
  b.h_rad = p.h_rad;
  b.h_tan = p.h_tan;
  for (auto* v : {&b.gamma_x_xx, &b.gamma_x_ss, &b.gamma_s_xs, &b.ric_rad, &b.ric_tan, &b.ric_xx,
                  &b.ric_ss, &b.R, &b.h_xx, &b.h_ss, &b.norm_rm, &b.norm_h})
    v->resize(np);
  for (std::size_t i = 0; i < np; ++i) {
    const double A = m.A[i], B = m.B[i], xi = x[i];
    const double al = p.dA[i] / A, be = p.dB[i] / B;
    b.gamma_x_xx[i] = 0.5 * al - 1.0 / xi;
    b.gamma_x_ss[i] = -0.5 * (B / A) * (be - 2.0 / xi);
    b.gamma_s_xs[i] = 0.5 * (be - 2.0 / xi);
    b.ric_rad[i] = dim * p.K_rad[i];
    b.ric_tan[i] = p.K_rad[i] + (dim - 1) * p.K_tan[i];
    b.R[i] = b.ric_rad[i] + dim * b.ric_tan[i];
    b.ric_xx[i] = b.ric_rad[i] * A;
    b.ric_ss[i] = b.ric_tan[i] * B;
    b.h_xx[i] = p.h_rad[i] * A;
    b.h_ss[i] = p.h_tan[i] * B;
    b.norm_h[i] = std::sqrt(p.h_rad[i] * p.h_rad[i] + dim * p.h_tan[i] * p.h_tan[i]);
    b.norm_rm[i] = 2.0 * std::sqrt(dim * p.K_rad[i] * p.K_rad[i] +
                                   0.5 * dim * (dim - 1) * p.K_tan[i] * p.K_tan[i]);
  }
  auto ctx = make_context(m, p.dB, opt.accuracy);
  b.H = ctx.H;
  const int half = opt.accuracy / 2;
  b.edge_rows = std::size_t(half);
  if (opt.first_derivatives || opt.second_derivatives) {
    auto h = symmetric_two_tensor(dim, p.h_rad, p.h_tan);
    auto rm = riemann_tensor(dim, p.K_rad, p.K_tan);
    auto dh = covariant_derivative(h, ctx);
    auto drm = covariant_derivative(rm, ctx);
    b.norm_grad_h = norm(dh);
    b.norm_grad_rm = norm(drm);
    b.edge_rows = std::size_t(2 * half);
    if (opt.second_derivatives) {
      b.norm_grad2_h = norm(covariant_derivative(dh, ctx));
      b.norm_grad2_rm = norm(covariant_derivative(drm, ctx));
      b.edge_rows = std::size_t(3 * half);
    }
  }
  return b;
}

double relative_sup_difference(const std::vector<double>& a, const std::vector<double>& ref,
                               std::size_t skip) {
  if (a.size() != ref.size()) throw Error(ErrorKind::invalid_parameter, "field length mismatch");
  double scale = 0.0, diff = 0.0;
  for (std::size_t i = skip; i + skip < a.size(); ++i) {
    scale = std::max(scale, std::abs(ref[i]));
    diff = std::max(diff, std::abs(a[i] - ref[i]));
  }
  return diff / std::max(scale, 1.0);
}

// ---------------------------------------------------------------------------
// Finite-difference oracle on the chart (rho = ln x, theta^1..theta^m).

namespace {

constexpr int kMaxDim = 8;

struct ChartGeometry {
  int n = 0;
  std::vector<double> g, gi;  // n^2
  std::vector<double> dg;     // [k][i][j]
  std::vector<double> gam;    // Gamma^p_ij as [p][i][j]
  std::vector<double> R;      // R_ijkl
  std::vector<double> ric;    // R_ik
};

class ChartOracle {
 public:
  ChartOracle(const WarpedMetric& m, double delta)
      : m_(m), n_(m.n), kappa_(m.kappa()), delta_(delta) {}

  int dim() const { return n_; }

  void metric(const double* y, double* g) const {
    const double x = std::exp(y[0]);
    const auto& grid = *m_.grid();
    const double A = interpolate(grid, m_.A.values, x, 6);
    const double B = interpolate(grid, m_.B.values, x, 6);
    double t2 = 0.0;
    for (int a = 1; a < n_; ++a) t2 += y[a] * y[a];
    const double psi = 1.0 / (1.0 + 0.25 * kappa_ * t2);
    std::fill(g, g + n_ * n_, 0.0);
    g[0] = A;
    for (int a = 1; a < n_; ++a) g[a * n_ + a] = B / (x * x) * psi * psi;
  }

  // Metric, its inverse, first and second derivatives, Christoffels and curvature at y.
  ChartGeometry evaluate(const double* y) const {
    static const double c1[5] = {1.0 / 12, -8.0 / 12, 0.0, 8.0 / 12, -1.0 / 12};
    static const double c2[5] = {-1.0 / 12, 16.0 / 12, -30.0 / 12, 16.0 / 12, -1.0 / 12};
    const int n = n_, n2 = n * n;
    const double d = delta_;
    ChartGeometry cg;
    cg.n = n;
    cg.g.assign(n2, 0.0);
    metric(y, cg.g.data());
    std::vector<double> dg(n * n2, 0.0), ddg(n2 * n2, 0.0), tmp(n2);
    double yy[kMaxDim];
    for (int k = 0; k < n; ++k) {
      for (int s = -2; s <= 2; ++s) {
        if (s == 0) continue;
        std::copy(y, y + n, yy);
        yy[k] += s * d;
        metric(yy, tmp.data());
        for (int q = 0; q < n2; ++q) {
          dg[k * n2 + q] += c1[s + 2] * tmp[q] / d;
          ddg[(k * n + k) * n2 + q] += c2[s + 2] * tmp[q] / (d * d);
        }
      }
      for (int q = 0; q < n2; ++q) ddg[(k * n + k) * n2 + q] += c2[2] * cg.g[q] / (d * d);
    }
    for (int k = 0; k < n; ++k)
      for (int l = k + 1; l < n; ++l) {
        for (int s = -2; s <= 2; ++s) {
          if (s == 0) continue;
          for (int t = -2; t <= 2; ++t) {
            if (t == 0) continue;
            std::copy(y, y + n, yy);
            yy[k] += s * d;
            yy[l] += t * d;
            metric(yy, tmp.data());
            const double w = c1[s + 2] * c1[t + 2] / (d * d);
            for (int q = 0; q < n2; ++q) ddg[(k * n + l) * n2 + q] += w * tmp[q];
          }
        }
        for (int q = 0; q < n2; ++q) ddg[(l * n + k) * n2 + q] = ddg[(k * n + l) * n2 + q];
      }
    cg.gi = invert(cg.g);
    cg.dg = dg;
    auto G = [&](int k, int i, int j) { return dg[k * n2 + i * n + j]; };
    auto DD = [&](int a, int b, int i, int j) { return ddg[(a * n + b) * n2 + i * n + j]; };
    // Christoffel symbols of the first kind [ij,k].
    std::vector<double> first(n * n2);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k)
          first[(i * n + j) * n + k] = 0.5 * (G(i, j, k) + G(j, i, k) - G(k, i, j));
    cg.gam.assign(n * n2, 0.0);
    for (int p = 0; p < n; ++p)
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          double acc = 0.0;
          for (int k = 0; k < n; ++k) acc += cg.gi[p * n + k] * first[(i * n + j) * n + k];
          cg.gam[(p * n + i) * n + j] = acc;
        }
    auto F = [&](int i, int j, int k) { return first[(i * n + j) * n + k]; };
    cg.R.assign(n2 * n2, 0.0);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k)
          for (int l = 0; l < n; ++l) {
            double r = 0.5 * (-DD(j, l, i, k) - DD(i, k, j, l) + DD(i, l, j, k) + DD(j, k, i, l));
            double q = 0.0;
            for (int a = 0; a < n; ++a)
              for (int b = 0; b < n; ++b)
                q += cg.gi[a * n + b] * (F(i, k, a) * F(j, l, b) - F(i, l, a) * F(j, k, b));
            cg.R[((i * n + j) * n + k) * n + l] = r - q;
          }
    cg.ric.assign(n2, 0.0);
    for (int i = 0; i < n; ++i)
      for (int k = 0; k < n; ++k) {
        double acc = 0.0;
        for (int j = 0; j < n; ++j)
          for (int l = 0; l < n; ++l) acc += cg.gi[j * n + l] * cg.R[((i * n + j) * n + k) * n + l];
        cg.ric[i * n + k] = acc;
      }
    return cg;
  }

  std::vector<double> invert(const std::vector<double>& a) const {
    const int n = n_;
    std::vector<double> m = a, inv(n * n, 0.0);
    for (int i = 0; i < n; ++i) inv[i * n + i] = 1.0;
    for (int c = 0; c < n; ++c) {
      int piv = c;
      for (int r = c + 1; r < n; ++r)
        if (std::abs(m[r * n + c]) > std::abs(m[piv * n + c])) piv = r;
      if (std::abs(m[piv * n + c]) == 0.0) throw Error(ErrorKind::chart_degenerate, "singular chart metric");
      for (int k = 0; k < n; ++k) {
        std::swap(m[c * n + k], m[piv * n + k]);
        std::swap(inv[c * n + k], inv[piv * n + k]);
      }
      const double p = m[c * n + c];
      for (int k = 0; k < n; ++k) {
        m[c * n + k] /= p;
        inv[c * n + k] /= p;
      }
      for (int r = 0; r < n; ++r) {
        if (r == c) continue;
        const double f = m[r * n + c];
        if (f == 0.0) continue;
        for (int k = 0; k < n; ++k) {
          m[r * n + k] -= f * m[c * n + k];
          inv[r * n + k] -= f * inv[c * n + k];
        }
      }
    }
    return inv;
  }

  // Columns of E form a g-orthonormal frame: E^T g E = I (Cholesky based).
  std::vector<double> frame(const std::vector<double>& g) const {
    const int n = n_;
    std::vector<double> L(n * n, 0.0);
    for (int j = 0; j < n; ++j) {
      double s = g[j * n + j];
      for (int k = 0; k < j; ++k) s -= L[j * n + k] * L[j * n + k];
      if (!(s > 0.0)) throw Error(ErrorKind::chart_degenerate, "chart metric not positive definite");
      L[j * n + j] = std::sqrt(s);
      for (int i = j + 1; i < n; ++i) {
        double t = g[i * n + j];
        for (int k = 0; k < j; ++k) t -= L[i * n + k] * L[j * n + k];
        L[i * n + j] = t / L[j * n + j];
      }
    }
    // E = L^{-T}: solve L^T E = I column by column.
    std::vector<double> E(n * n, 0.0);
    for (int c = 0; c < n; ++c)
      for (int i = n - 1; i >= 0; --i) {
        double s = i == c ? 1.0 : 0.0;
        for (int k = i + 1; k < n; ++k) s -= L[k * n + i] * E[k * n + c];
        E[i * n + c] = s / L[i * n + i];
      }
    return E;
  }

  // Express a covariant tensor of the given order in the frame E, then take its norm.
  static std::vector<double> to_frame(std::vector<double> t, int order, int n, const std::vector<double>& E) {
    std::size_t total = t.size();
    std::vector<double> out(total);
    for (int slot = 0; slot < order; ++slot) {
      std::size_t stride = 1;
      for (int s = slot + 1; s < order; ++s) stride *= std::size_t(n);
      std::fill(out.begin(), out.end(), 0.0);
      for (std::size_t idx = 0; idx < total; ++idx) {
        const int a = int((idx / stride) % std::size_t(n));
        const std::size_t base = idx - std::size_t(a) * stride;
        double acc = 0.0;
        for (int i = 0; i < n; ++i) acc += E[i * n + a] * t[base + std::size_t(i) * stride];
        out[idx] = acc;
      }
      std::swap(t, out);
    }
    return t;
  }

  static double frobenius(const std::vector<double>& t) {
    double s = 0.0;
    for (double v : t) s += v * v;
    return std::sqrt(s);
  }

  double delta() const { return delta_; }

 private:
  const WarpedMetric& m_;
  int n_;
  double kappa_;
  double delta_;
};

// nabla_k T for a covariant tensor of the given order using neighbour evaluations.
std::vector<double> covariant_chart_derivative(const std::vector<std::vector<double>>& plus1,
                                               const std::vector<std::vector<double>>& minus1,
                                               const std::vector<std::vector<double>>& plus2,
                                               const std::vector<std::vector<double>>& minus2,
                                               const std::vector<double>& t, const ChartGeometry& cg,
                                               int order, double d) {
  const int n = cg.n;
  const std::size_t total = t.size();
  std::vector<double> out(total * std::size_t(n), 0.0);
  for (int k = 0; k < n; ++k)
    for (std::size_t idx = 0; idx < total; ++idx) {
      double v = (minus2[k][idx] - 8.0 * minus1[k][idx] + 8.0 * plus1[k][idx] - plus2[k][idx]) / (12.0 * d);
      std::size_t stride = 1;
      for (int slot = order - 1; slot >= 0; --slot) {
        const int a = int((idx / stride) % std::size_t(n));
        const std::size_t base = idx - std::size_t(a) * stride;
        for (int p = 0; p < n; ++p) v -= cg.gam[(p * n + k) * n + a] * t[base + std::size_t(p) * stride];
        stride *= std::size_t(n);
      }
      out[std::size_t(k) * total + idx] = v;
    }
  return out;
}

}  // namespace

CurvatureBundle curvature_fd_oracle(const WarpedMetric& m, const OracleOptions& opt) {
  m.validate();
  const auto& x = m.grid()->points();
  const std::size_t np = x.size();
  const int n = m.n;
  const double delta = opt.chart_resolution > 0 ? opt.chart_resolution : 0.005;
  ChartOracle oracle(m, delta);

  CurvatureBundle b;
  b.grid = m.grid();
  b.n = n;
  b.edge_rows = 3;
  for (auto* v : {&b.gamma_x_xx, &b.gamma_x_ss, &b.gamma_s_xs, &b.H, &b.K_rad, &b.K_tan, &b.ric_rad,
                  &b.ric_tan, &b.ric_xx, &b.ric_ss, &b.R, &b.h_rad, &b.h_tan, &b.h_xx, &b.h_ss,
                  &b.norm_rm, &b.norm_h})
    v->resize(np);
  if (opt.derivatives) {
    b.norm_grad_h.resize(np);
    b.norm_grad_rm.resize(np);
  }
  const int n2 = n * n;
  for (std::size_t i = 0; i < np; ++i) {
    double y[kMaxDim] = {0.0};
    y[0] = std::log(x[i]);
    auto cg = oracle.evaluate(y);
    auto E = oracle.frame(cg.g);
    auto Rf = ChartOracle::to_frame(cg.R, 4, n, E);
    auto Ricf = ChartOracle::to_frame(cg.ric, 2, n, E);
    std::vector<double> hf = Ricf;
    for (int a = 0; a < n; ++a) hf[a * n + a] += double(n - 1);
    auto Rc = [&](int a, int bb, int c, int d) { return Rf[((a * n + bb) * n + c) * n + d]; };
    b.K_rad[i] = Rc(0, 1, 0, 1);
    b.K_tan[i] = Rc(1, 2, 1, 2);
    b.ric_rad[i] = Ricf[0];
    b.ric_tan[i] = Ricf[1 * n + 1];
    double trace = 0.0;
    for (int a = 0; a < n; ++a) trace += Ricf[a * n + a];
    b.R[i] = trace;
    b.h_rad[i] = hf[0];
    b.h_tan[i] = hf[1 * n + 1];
    const double xi = x[i];
    // Coordinate blocks scaled by x^2; on the (ln x, theta) chart at theta = 0
    // the dx^2 block picks up x^2 and the sigma block is unchanged.
    b.ric_xx[i] = cg.ric[0];
    b.ric_ss[i] = xi * xi * cg.ric[1 * n + 1];
    b.h_xx[i] = cg.ric[0] + (n - 1) * cg.g[0];
    b.h_ss[i] = xi * xi * (cg.ric[1 * n + 1] + (n - 1) * cg.g[1 * n + 1]);
    b.norm_rm[i] = ChartOracle::frobenius(Rf);
    b.norm_h[i] = ChartOracle::frobenius(hf);
    b.gamma_x_xx[i] = (cg.gam[0] - 1.0) / xi;
    b.gamma_x_ss[i] = xi * cg.gam[(0 * n + 1) * n + 1];
    b.gamma_s_xs[i] = cg.gam[(1 * n + 1) * n + 0] / xi;
    b.H[i] = cg.gam[(1 * n + 1) * n + 0] / std::sqrt(cg.g[0]);

    if (opt.derivatives) {
      std::vector<std::vector<double>> rp1(n), rm1(n), rp2(n), rm2(n), cp1(n), cm1(n), cp2(n), cm2(n);
      for (int k = 0; k < n; ++k) {
        double yy[kMaxDim];
        auto at = [&](double s, std::vector<double>& R, std::vector<double>& Ric) {
          std::copy(y, y + n, yy);
          yy[k] += s * delta;
          auto o = oracle.evaluate(yy);
          R = std::move(o.R);
          Ric = std::move(o.ric);
          for (int a = 0; a < n; ++a)
            for (int c = 0; c < n; ++c) Ric[a * n + c] += double(n - 1) * o.g[a * n + c];
        };
        at(1.0, rp1[k], cp1[k]);
        at(-1.0, rm1[k], cm1[k]);
        at(2.0, rp2[k], cp2[k]);
        at(-2.0, rm2[k], cm2[k]);
      }
      std::vector<double> hc = cg.ric;
      for (int q = 0; q < n2; ++q) hc[q] += double(n - 1) * cg.g[q];
      auto dh = covariant_chart_derivative(cp1, cm1, cp2, cm2, hc, cg, 2, delta);
      auto dR = covariant_chart_derivative(rp1, rm1, rp2, rm2, cg.R, cg, 4, delta);
      b.norm_grad_h[i] = ChartOracle::frobenius(ChartOracle::to_frame(dh, 3, n, E));
      b.norm_grad_rm[i] = ChartOracle::frobenius(ChartOracle::to_frame(dR, 5, n, E));
    }

    if (opt.chart_check_stride && i % opt.chart_check_stride == 0) {
      double y2[kMaxDim] = {0.0};
      y2[0] = y[0];
      for (int a = 1; a < n; ++a) y2[a] = (a % 2 ? 0.3 : -0.2) / a;
      auto c2 = oracle.evaluate(y2);
      auto E2 = oracle.frame(c2.g);
      auto R2 = ChartOracle::to_frame(c2.R, 4, n, E2);
      const double alt = ChartOracle::frobenius(R2);
      const double tol = opt.chart_check_tolerance * std::max(1.0, b.norm_rm[i]);
      if (!(std::abs(alt - b.norm_rm[i]) <= tol)) {
        std::ostringstream os;
        os << "curvature norm differs between chart points at x = " << xi << " (" << b.norm_rm[i]
           << " vs " << alt << ")";
        throw Error(ErrorKind::chart_degenerate, os.str());
      }
    }
  }
  return b;
}

// ---------------------------------------------------------------------------
// Distances and volumes.

namespace {

// Integral of sqrt(A(x))/x over [lo, hi] inside one grid interval, in u = ln x.
double arclength_piece(const WarpedMetric& m, double lo, double hi) {
  static const double gx[5] = {-0.9061798459386640, -0.5384693101056831, 0.0,
                               0.5384693101056831, 0.9061798459386640};
  static const double gw[5] = {0.2369268850561891, 0.4786286704993665, 0.5688888888888889,
                               0.4786286704993665, 0.2369268850561891};
  const double ua = std::log(lo), ub = std::log(hi);
  const double c = 0.5 * (ua + ub), h = 0.5 * (ub - ua);
  double acc = 0.0;
  for (int k = 0; k < 5; ++k) {
    const double x = std::exp(c + h * gx[k]);
    const double A = interpolate(*m.grid(), m.A.values, x, 4);
    acc += gw[k] * std::sqrt(std::max(A, 0.0));
  }
  return acc * h;
}

// s_i = distance from the inner end x_max to x_i along the radial line.

double sn(double kappa, double t) {
  if (kappa > 0) return std::sin(t);
  if (kappa < 0) return std::sinh(t);
  return t;
}

double sphere_area(int dim) {  // area of the unit sphere S^dim
  return 2.0 * std::pow(M_PI, 0.5 * (dim + 1)) / std::tgamma(0.5 * (dim + 1));
}

// Values tabulated on an increasing abscissa, evaluated by local cubic Lagrange.
struct Table {
  std::vector<double> s;
  std::vector<std::vector<double>> cols;
  void eval(double t, double* out) const {
    const std::size_t n = s.size();
    std::size_t i = std::size_t(std::upper_bound(s.begin(), s.end(), t) - s.begin());
    long start = long(i) - 2;
    start = std::clamp(start, 0L, long(n) - 4);
    double w[4];
    for (int a = 0; a < 4; ++a) {
      double l = 1.0;
      for (int b = 0; b < 4; ++b)
        if (b != a) l *= (t - s[start + b]) / (s[start + a] - s[start + b]);
      w[a] = l;
    }
    for (std::size_t c = 0; c < cols.size(); ++c) {
      double acc = 0.0;
      for (int a = 0; a < 4; ++a) acc += w[a] * cols[c][start + a];
      out[c] = acc;
    }
  }
};

// Depth-ordered table of (f, f_s, K_rad) with f = sqrt(B)/x the warping in
// arclength s measured from the inner end.
Table warping_table(const WarpedMetric& m) {
  CurvatureOptions opt;
  opt.first_derivatives = false;
  opt.second_derivatives = false;
  auto b = curvature_closed_form(m, opt);
  auto s = depth_profile(m);
  const auto& x = m.grid()->points();
  const std::size_t np = x.size();
  Table t;
  t.cols.assign(3, std::vector<double>(np));
  for (std::size_t j = 0; j < np; ++j) {
    const std::size_t i = np - 1 - j;
    const double f = std::sqrt(m.B[i]) / x[i];
    t.s.push_back(s[i]);
    t.cols[0][j] = f;
    t.cols[1][j] = -f * b.H[i];  // moving inward in s means moving toward x = 0
    t.cols[2][j] = b.K_rad[i];
  }
  return t;
}

}  // namespace

std::vector<double> depth_profile(const WarpedMetric& m) {
  const auto& x = m.grid()->points();
  std::vector<double> s(x.size(), 0.0);
  for (std::size_t k = x.size() - 1; k-- > 0;) s[k] = s[k + 1] + arclength_piece(m, x[k], x[k + 1]);
  return s;
}

double radial_distance(const WarpedMetric& m, double x_a, double x_b) {
  const auto& grid = *m.grid();
  const double lo = std::min(x_a, x_b), hi = std::max(x_a, x_b);
  const double tol = 1e-12 * grid.x_max();
  if (lo < grid.x_min() - tol || hi > grid.x_max() + tol) {
    std::ostringstream os;
    os << "radius outside grid hull [" << grid.x_min() << ", " << grid.x_max() << "]";
    throw Error(ErrorKind::out_of_range, os.str());
  }
  if (lo == hi) return 0.0;
  const auto& x = grid.points();
  double acc = 0.0;
  double a = lo;
  std::size_t i = grid.locate(lo);
  while (a < hi) {
    double b = std::min(hi, i + 1 < x.size() ? x[i + 1] : hi);
    if (b <= a) {
      ++i;
      continue;
    }
    acc += arclength_piece(m, a, b);
    a = b;
    ++i;
  }
  return acc;
}

WeightedVolume weighted_volume(const WarpedMetric& m, double alpha, double x0,
                               const WeightedVolumeOptions& opt) {
  m.validate();
  const auto& grid = *m.grid();
  if (x0 < grid.x_min() || x0 > grid.x_max())
    throw Error(ErrorKind::out_of_range, "basepoint radius outside the collar");
  const Table tab = warping_table(m);
  const double s_max = tab.s.back();
  const double s0 = radial_distance(m, x0, grid.x_max());
  const double s_shallow = s0 + opt.shallow_fraction * (s_max - s0);
  const double kappa = m.kappa();
  const int n = m.n;
  const double dt = opt.step;
  const double growth_rate = alpha - (n - 1);

  double f0v[3];
  tab.eval(s0, f0v);
  const double f0 = f0v[0];

  // Gauss-Legendre nodes on [0, pi] for the polar angle.
  std::vector<double> th, tw;
  {
    const int k = opt.angles;
    for (int i = 0; i < k; ++i) {
      double z = std::cos(M_PI * (i + 0.75) / (k + 0.5));
      for (int it = 0; it < 100; ++it) {
        double p0 = 1.0, p1 = z;
        for (int j = 2; j <= k; ++j) {
          double p2 = ((2.0 * j - 1.0) * z * p1 - (j - 1.0) * p0) / j;
          p0 = p1;
          p1 = p2;
        }
        double dp = k * (z * p1 - p0) / (z * z - 1.0);
        double dz = p1 / dp;
        z -= dz;
        if (std::abs(dz) < 1e-15) break;
      }
      double p0 = 1.0, p1 = z;
      for (int j = 2; j <= k; ++j) {
        double p2 = ((2.0 * j - 1.0) * z * p1 - (j - 1.0) * p0) / j;
        p0 = p1;
        p1 = p2;
      }
      double dp = k * (z * p1 - p0) / (z * z - 1.0);
      th.push_back(0.5 * M_PI * (z + 1.0));
      tw.push_back(0.5 * M_PI * 2.0 / ((1.0 - z * z) * dp * dp));
    }
  }

  double deep = 0.0, shallow = 0.0, tail = 0.0, tail_shallow = 0.0;
  for (std::size_t a = 0; a < th.size(); ++a) {
    const double c = f0 * std::sin(th[a]);
    const double weight = tw[a];  // sin^{n-2} of the polar angle comes from the Jacobian
    // state: s, v = ds/dt, psi, j, dj/dt
    double st[5] = {s0, std::cos(th[a]), 0.0, 0.0, 1.0};
    auto rhs = [&](const double* u, double* du) {
      double fv[3];
      tab.eval(u[0], fv);
      const double f = fv[0];
      du[0] = u[1];
      du[1] = fv[1] * c * c / (f * f * f);
      du[2] = c / (f * f);
      du[3] = u[4];
      du[4] = -fv[2] * u[3];
    };
    auto integrand = [&](const double* u, double t) {
      double fv[3];
      tab.eval(u[0], fv);
      return std::exp(-alpha * t) * std::abs(u[3]) * std::pow(fv[0] * sn(kappa, u[2]), n - 2);
    };
    double t = 0.0;
    double prev = 0.0;
    bool in_shallow = true;
    double last_shallow = 0.0;
    const double t_cap = 60.0;
    while (t < t_cap) {
      double k1[5], k2[5], k3[5], k4[5], u[5];
      rhs(st, k1);
      for (int q = 0; q < 5; ++q) u[q] = st[q] + 0.5 * dt * k1[q];
      rhs(u, k2);
      for (int q = 0; q < 5; ++q) u[q] = st[q] + 0.5 * dt * k2[q];
      rhs(u, k3);
      for (int q = 0; q < 5; ++q) u[q] = st[q] + dt * k3[q];
      rhs(u, k4);
      for (int q = 0; q < 5; ++q) st[q] += dt / 6.0 * (k1[q] + 2 * k2[q] + 2 * k3[q] + k4[q]);
      t += dt;
      const bool outside = st[0] < 0.0 || st[0] > s_max || (kappa > 0 && st[2] >= M_PI);
      if (outside) break;
      const double cur = integrand(st, t);
      const double piece = 0.5 * dt * (prev + cur) * weight;
      deep += piece;
      if (in_shallow && st[0] > s_shallow) in_shallow = false;
      if (in_shallow) {
        shallow += piece;
        last_shallow = cur;
      }
      prev = cur;
    }
    if (growth_rate > 0) {
      tail += weight * prev / growth_rate;
      tail_shallow += weight * last_shallow / growth_rate;
    } else {
      tail = std::numeric_limits<double>::infinity();
      tail_shallow = tail;
    }
  }
  const double omega = sphere_area(n - 2);
  WeightedVolume out;
  out.value = omega * deep;
  out.tail_estimate = omega * tail;
  out.collar_depth = s_max;
  const double sh = omega * shallow;
  out.deepening_growth = sh > 0 ? (out.value - sh) / sh : 0.0;
  const double allowed = sh > 0 && std::isfinite(tail_shallow) ? 2.0 * omega * tail_shallow / sh : 0.0;
  out.divergence_warning = growth_rate <= 0.0 || out.deepening_growth > allowed + 0.05;
  return out;
}

double unit_ball_volume_lower_bound(const WarpedMetric& m) {
  m.validate();
  const Table tab = warping_table(m);
  const double s_max = tab.s.back();
  if (s_max <= 1.0) throw Error(ErrorKind::out_of_range, "collar shallower than a unit tube");
  const int dim = m.m();
  const double kappa = m.kappa();
  const double cap_sphere = sphere_area(dim - 1);
  double best = std::numeric_limits<double>::infinity();
  const int samples = 64;
  for (int k = 0; k <= samples; ++k) {
    const double s0 = 0.5 + (s_max - 1.0) * k / samples;
    double tube = 0.0, fmax = 0.0;
    const int q = 64;
    for (int j = 0; j <= q; ++j) {
      double fv[3];
      tab.eval(s0 - 0.5 + double(j) / q, fv);
      const double w = (j == 0 || j == q) ? 0.5 : 1.0;
      tube += w * std::pow(fv[0], dim) / q;
      fmax = std::max(fmax, fv[0]);
    }
    double rho = 0.5 / fmax;
    if (kappa > 0) rho = std::min(rho, M_PI);
    double cap = 0.0;
    const int qc = 64;
    for (int j = 0; j <= qc; ++j) {
      const double w = (j == 0 || j == qc) ? 0.5 : 1.0;
      cap += w * std::pow(sn(kappa, rho * j / qc), dim - 1) * rho / qc;
    }
    best = std::min(best, tube * cap * cap_sphere);
  }
  return best;
}

void write_bundle_csv(const CurvatureBundle& b, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::io_error, "cannot write " + path);
  auto fields = b.fields();
  out << "x";
  for (const auto& [name, v] : fields)
    if (!v->empty()) out << ',' << name;
  out << '\n';
  const auto& x = b.grid->points();
  for (std::size_t i = 0; i < x.size(); ++i) {
    out << format_double(x[i]);
    for (const auto& [name, v] : fields)
      if (!v->empty()) out << ',' << format_double((*v)[i]);
    out << '\n';
  }
  if (!out) throw Error(ErrorKind::io_error, "write failed for " + path);
}

nlohmann::json bundle_summary(const CurvatureBundle& b) {
  nlohmann::json j;
  j["n"] = b.n;
  j["lower_confidence_rows_each_end"] = b.edge_rows;
  const auto& x = b.grid->points();
  for (const auto& [name, v] : b.fields()) {
    if (v->empty()) continue;
    std::size_t imax = 0, imin = 0;
    for (std::size_t i = 0; i < v->size(); ++i) {
      if (std::abs((*v)[i]) > std::abs((*v)[imax])) imax = i;
      if ((*v)[i] < (*v)[imin]) imin = i;
    }
    j["fields"][name] = {{"sup_abs", std::abs((*v)[imax])}, {"x_at_sup", x[imax]},
                         {"min", (*v)[imin]}, {"x_at_min", x[imin]}};
  }
  return j;
}

}  // namespace ahflow
