#include "ahflow/verify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include "ahflow/error.hpp"
#include "ahflow/numeric.hpp"

namespace ahflow {

nlohmann::json ResidualReport::to_json() const {
  nlohmann::json j{{"name", name},       {"sup", sup},     {"l2", l2},
                   {"time", time},       {"resolution", resolution},
                   {"expected_order", expected_order}, {"passed", passed},
                   {"note", note}};
  if (!resolutions.empty()) {
    j["resolutions"] = resolutions;
    j["sups"] = sups;
  }
  if (slope) j["slope"] = *slope;
  return j;
}

ResidualReport refine(const std::vector<ResidualReport>& levels, double lo, double hi) {
  if (levels.size() < 2)
    throw Error(ErrorKind::invalid_parameter, "a refinement study needs at least two resolutions");
  ResidualReport r = levels.back();
  r.resolutions.clear();
  r.sups.clear();
  std::vector<double> n, s;
  for (const auto& l : levels) {
    if (l.name != r.name) throw Error(ErrorKind::invalid_parameter, "mixed identities in refinement");
    r.resolutions.push_back(l.resolution);
    r.sups.push_back(l.sup);
    n.push_back(double(l.resolution));
    s.push_back(std::max(l.sup, std::numeric_limits<double>::min()));
  }
  r.slope = -fit_power_law(n, s).slope;
  r.expected_order = 0.5 * (lo + hi);
  r.passed = *r.slope >= lo && *r.slope <= hi;
  return r;
}

// ---------------------------------------------------------------------------

FrameTensor rough_laplacian(const FrameTensor& t, const FrameContext& ctx) {
  return contract(covariant_derivative(covariant_derivative(t, ctx), ctx), 0, 1);
}

namespace {

// R_ipjq u^pq
FrameTensor curvature_action(const FrameTensor& rm, const FrameTensor& u) {
  return contract(contract(tensor_product(rm, u), 1, 4), 2, 3);
}

// a_ip b^p_j
FrameTensor compose(const FrameTensor& a, const FrameTensor& b) {
  return contract(tensor_product(a, b), 1, 2);
}

}  // namespace

FrameTensor lichnerowicz_apply(const FrameTensor& u, const WarpedFrame& f) {
  if (u.order() != 2) throw Error(ErrorKind::invalid_parameter, "Lichnerowicz Laplacian acts on 2-tensors");
  auto out = combine(-1.0, rough_laplacian(u, f.ctx), -2.0, curvature_action(f.rm, u));
  auto ru = compose(f.ric, u);
  out = combine(1.0, out, 1.0, ru);
  return combine(1.0, out, 1.0, permute(ru, {1, 0}));
}

std::vector<double> volume_density(const WarpedMetric& m) {
  const auto& x = m.grid()->points();
  std::vector<double> w(x.size());
  for (std::size_t i = 0; i < x.size(); ++i)
    w[i] = std::pow(x[i], -m.n) * std::sqrt(m.A[i]) * std::pow(m.B[i], 0.5 * m.m());
  return w;
}

double integrate(const RadialGrid& grid, const std::vector<double>& f, const std::vector<double>& density) {
  const auto& x = grid.points();
  double acc = 0.0;
  for (std::size_t i = 0; i + 1 < x.size(); ++i)
    acc += 0.5 * (x[i + 1] - x[i]) * (f[i] * density[i] + f[i + 1] * density[i + 1]);
  return acc;
}

QuadraticFormCheck quadratic_form_check(const WarpedMetric& m, const std::vector<double>& u0,
                                        const std::vector<double>& u1, int accuracy) {
  if (u0.size() != m.size() || u1.size() != m.size())
    throw Error(ErrorKind::invalid_parameter, "tensor parts must live on the metric grid");
  auto f = warped_frame(m, accuracy);
  const int dim = m.m();
  auto u = symmetric_two_tensor(dim, u0, u1);
  auto lu = combine(1.0, lichnerowicz_apply(u, f), 2.0 * (m.n - 1), u);
  auto dens = volume_density(m);
  QuadraticFormCheck q;
  q.operator_form = integrate(*m.grid(), inner(lu, u), dens);
  auto grad = norm_squared(covariant_derivative(u, f.ctx));
  auto ruu = inner(curvature_action(f.rm, u), u);
  auto huu = inner(compose(f.h, u), u);
  std::vector<double> e(m.size());
  for (std::size_t i = 0; i < e.size(); ++i) e[i] = grad[i] - 2.0 * ruu[i] + 2.0 * huu[i];
  q.expanded_form = integrate(*m.grid(), e, dens);
  q.relative_gap = std::abs(q.operator_form - q.expanded_form) /
                   std::max(std::abs(q.expanded_form), std::numeric_limits<double>::min());
  return q;
}

// ---------------------------------------------------------------------------

namespace {

struct Centre {
  const WarpedMetric *prev, *mid, *next;
  double w_prev, w_mid, w_next;  // weights of the centred time derivative
};

Centre centre_of(const FlowTrajectory& traj, const ResidualWindow& win) {
  const auto& s = traj.snapshots;
  if (s.size() < 3) throw Error(ErrorKind::insufficient_snapshots, "need three consecutive snapshots");
  std::size_t k = s.size() / 2;
  if (win.time >= 0) {
    k = 0;
    for (std::size_t j = 1; j < s.size(); ++j)
      if (std::abs(s[j].metric.time - win.time) < std::abs(s[k].metric.time - win.time)) k = j;
  }
  if (k == 0 || k + 1 >= s.size())
    throw Error(ErrorKind::insufficient_snapshots, "centre snapshot has no neighbour on both sides");
  const double t0 = s[k - 1].metric.time, t1 = s[k].metric.time, t2 = s[k + 1].metric.time;
  const double h1 = t1 - t0, h2 = t2 - t1;
  if (!(h1 > 0 && h2 > 0)) throw Error(ErrorKind::insufficient_snapshots, "snapshot times not increasing");
  return {&s[k - 1].metric, &s[k].metric, &s[k + 1].metric, -h2 / (h1 * (h1 + h2)),
          (h2 - h1) / (h1 * h2), h1 / (h2 * (h1 + h2))};
}

std::vector<double> ddt(const Centre& c, const std::vector<double>& a, const std::vector<double>& b,
                        const std::vector<double>& d) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = c.w_prev * a[i] + c.w_mid * b[i] + c.w_next * d[i];
  return out;
}

void require_nrf(const FlowTrajectory& traj) {
  if (traj.mode != FlowMode::nrf)
    throw Error(ErrorKind::mode_mismatch, std::string("identities hold for pure NRF, trajectory is ") +
                                              flow_mode_name(traj.mode));
}

ResidualReport finish(const std::string& name, const WarpedMetric& m, const std::vector<double>& field,
                      const ResidualWindow& win) {
  ResidualReport r;
  r.name = name;
  r.time = m.time;
  r.resolution = m.size();
  const auto& x = m.grid()->points();
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] < win.x_lo || x[i] > win.x_hi) continue;
    r.x.push_back(x[i]);
    r.residual.push_back(std::abs(field[i]));
    r.sup = std::max(r.sup, std::abs(field[i]));
  }
  for (std::size_t i = 0; i + 1 < r.x.size(); ++i)
    acc += 0.5 * (r.x[i + 1] - r.x[i]) * (r.residual[i] * r.residual[i] + r.residual[i + 1] * r.residual[i + 1]);
  r.l2 = std::sqrt(acc);
  if (r.x.empty()) throw Error(ErrorKind::out_of_range, "residual window holds no grid points");
  r.note = "single resolution; combine levels with refine()";
  return r;
}

CurvatureBundle bundle_of(const WarpedMetric& m, int accuracy) {
  return curvature_closed_form(m, {accuracy, false, false});
}

}  // namespace

std::vector<ResidualReport> evolution_residuals(const FlowTrajectory& traj, const ResidualWindow& win) {
  require_nrf(traj);
  const auto c = centre_of(traj, win);
  const auto& m = *c.mid;
  const int dim = m.m();
  const std::size_t np = m.size();
  const int acc = win.accuracy;
  const auto& x = m.grid()->points();

  CurvatureBundle b[3] = {bundle_of(*c.prev, acc), bundle_of(m, acc), bundle_of(*c.next, acc)};
  auto f = warped_frame(m, acc);
  std::vector<ResidualReport> out;

  {  // dh/dt = Delta h + 2 R_ipjq h^pq - 2 h_ip h^p_j
    auto rhs = combine(1.0, rough_laplacian(f.h, f.ctx), 2.0, curvature_action(f.rm, f.h));
    rhs = combine(1.0, rhs, -2.0, compose(f.h, f.h));
    auto dxx = ddt(c, b[0].h_xx, b[1].h_xx, b[2].h_xx);
    auto dss = ddt(c, b[0].h_ss, b[1].h_ss, b[2].h_ss);
    const auto& r0 = rhs.at({0, 0});
    const auto& r1 = rhs.at({1, 1});
    std::vector<double> res(np);
    for (std::size_t i = 0; i < np; ++i) {
      const double e0 = dxx[i] / m.A[i] - r0[i], e1 = dss[i] / m.B[i] - r1[i];
      res[i] = std::sqrt(e0 * e0 + dim * e1 * e1);
    }
    out.push_back(finish("evolution of h", m, res, win));
  }
  {  // d|h|^2/dt = Delta |h|^2 - 2 |grad h|^2 + 4 R_ipjq h^pq h^ij
    std::vector<double> n2[3];
    for (int k = 0; k < 3; ++k) {
      n2[k].resize(np);
      for (std::size_t i = 0; i < np; ++i) n2[k][i] = b[k].norm_h[i] * b[k].norm_h[i];
    }
    auto lap = rough_laplacian(scalar_tensor(dim, n2[1]), f.ctx)[0];
    auto grad = norm_squared(covariant_derivative(f.h, f.ctx));
    auto rhh = inner(curvature_action(f.rm, f.h), f.h);
    auto lhs = ddt(c, n2[0], n2[1], n2[2]);
    std::vector<double> res(np);
    for (std::size_t i = 0; i < np; ++i) res[i] = lhs[i] - (lap[i] - 2.0 * grad[i] + 4.0 * rhh[i]);
    out.push_back(finish("evolution of |h|^2", m, res, win));
  }
  {  // dGamma^k_ij/dt = -(grad_i h_jk + grad_j h_ik - grad_k h_ij)
    auto dh = covariant_derivative(f.h, f.ctx);
    const auto& d000 = dh.at({0, 0, 0});
    const auto& d011 = dh.at({0, 1, 1});
    const auto* d110 = dh.get({1, 1, 0});
    auto gxx = ddt(c, b[0].gamma_x_xx, b[1].gamma_x_xx, b[2].gamma_x_xx);
    auto gxs = ddt(c, b[0].gamma_x_ss, b[1].gamma_x_ss, b[2].gamma_x_ss);
    auto gsx = ddt(c, b[0].gamma_s_xs, b[1].gamma_s_xs, b[2].gamma_s_xs);
    std::vector<double> res(np);
    for (std::size_t i = 0; i < np; ++i) {
      const double sa = std::sqrt(m.A[i]);
      const double t110 = d110 ? (*d110)[i] : 0.0;
      // frame components of the time derivative, from the coordinate ones
      const double f000 = gxx[i] * x[i] / sa;
      const double f011 = gxs[i] * x[i] * sa / m.B[i];
      const double f101 = gsx[i] * x[i] / sa;
      const double e1 = f000 + d000[i];
      const double e2 = f011 + (2.0 * t110 - d011[i]);
      const double e3 = f101 + d011[i];
      res[i] = std::sqrt(e1 * e1 + dim * e2 * e2 + dim * e3 * e3);
    }
    out.push_back(finish("evolution of Christoffel symbols", m, res, win));
  }
  return out;
}

nlohmann::json MonitorReport::to_json() const {
  return {{"name", name}, {"fitted_constant", fitted_constant}, {"time", time}};
}

std::vector<MonitorReport> evolution_monitors(const FlowTrajectory& traj, const ResidualWindow& win) {
  require_nrf(traj);
  const auto c = centre_of(traj, win);
  const auto& m = *c.mid;
  const int dim = m.m();
  const std::size_t np = m.size();
  const auto& x = m.grid()->points();
  const WarpedMetric* ms[3] = {c.prev, c.mid, c.next};

  std::vector<double> rm2[3], dh2[3];
  WarpedFrame fm = warped_frame(m, win.accuracy);
  FrameTensor drm(5, dim, np), dh(3, dim, np);
  for (int k = 0; k < 3; ++k) {
    auto f = k == 1 ? fm : warped_frame(*ms[k], win.accuracy);
    rm2[k] = norm_squared(f.rm);
    auto d = covariant_derivative(f.h, f.ctx);
    dh2[k] = norm_squared(d);
    if (k == 1) {
      drm = covariant_derivative(f.rm, f.ctx);
      dh = d;
    }
  }
  auto fit = [&](const std::string& name, const std::vector<double>& excess,
                 const std::vector<double>& scale) {
    MonitorReport r{name, 0.0, m.time};
    double top = 0.0;
    for (std::size_t i = 0; i < np; ++i)
      if (x[i] >= win.x_lo && x[i] <= win.x_hi) top = std::max(top, scale[i]);
    for (std::size_t i = 0; i < np; ++i) {
      if (x[i] < win.x_lo || x[i] > win.x_hi || !(scale[i] > 1e-12 * top)) continue;
      r.fitted_constant = std::max(r.fitted_constant, std::abs(excess[i]) / scale[i]);
    }
    return r;
  };

  std::vector<MonitorReport> out;
  {
    auto lhs = ddt(c, rm2[0], rm2[1], rm2[2]);
    auto lap = rough_laplacian(scalar_tensor(dim, rm2[1]), fm.ctx)[0];
    auto g2 = norm_squared(drm);
    auto nh = norm(fm.h);
    std::vector<double> ex(np), sc(np);
    for (std::size_t i = 0; i < np; ++i) {
      ex[i] = lhs[i] - lap[i] + 2.0 * g2[i];
      sc[i] = rm2[1][i] * (1.0 + std::sqrt(rm2[1][i]) + nh[i]);
    }
    out.push_back(fit("|Rm|^2", ex, sc));
  }
  {
    auto lhs = ddt(c, dh2[0], dh2[1], dh2[2]);
    auto lap = rough_laplacian(scalar_tensor(dim, dh2[1]), fm.ctx)[0];
    auto g2 = norm_squared(covariant_derivative(dh, fm.ctx));
    auto nh = norm(fm.h);
    auto ndrm = norm(drm);
    std::vector<double> ex(np), sc(np);
    for (std::size_t i = 0; i < np; ++i) {
      const double ndh = std::sqrt(dh2[1][i]);
      ex[i] = lhs[i] - lap[i] + 2.0 * g2[i];
      sc[i] = nh[i] * ndh * ndrm[i] + std::sqrt(rm2[1][i]) * dh2[1][i];
    }
    out.push_back(fit("|grad h|^2", ex, sc));
  }
  return out;
}

// ---------------------------------------------------------------------------

double cross_section_tt_floor(CrossSection cs, int dim) {
  if (cs == CrossSection::sphere) return dim >= 3 ? 2.0 * dim : std::numeric_limits<double>::infinity();
  return 0.0;
}

namespace {

using SpMat = Eigen::SparseMatrix<double>;

struct Forms {
  std::string sector;
  SpMat K, M;
  double shift = 0.0;
};

struct Nodes {
  std::vector<std::size_t> idx;  // grid rows from first to last, both held at zero
  double x_lo = 0.0, x_hi = 0.0;
};

Nodes truncate(const WarpedMetric& m, const SpectralTruncation& t) {
  const auto& x = m.grid()->points();
  const double lo = t.x_lo > 0 ? t.x_lo : x.front();
  const double hi = t.x_hi > 0 ? t.x_hi : x.back();
  Nodes n;
  for (std::size_t i = 0; i < x.size(); ++i)
    if (x[i] >= lo * (1 - 1e-12) && x[i] <= hi * (1 + 1e-12)) n.idx.push_back(i);
  if (n.idx.size() < 66) {
    std::ostringstream os;
    os << "truncation keeps " << (n.idx.size() < 2 ? 0 : n.idx.size() - 2)
       << " interior points, at least 64 are needed";
    throw Error(ErrorKind::invalid_parameter, os.str());
  }
  n.x_lo = x[n.idx.front()];
  n.x_hi = x[n.idx.back()];
  return n;
}

// Quadratic forms of both sectors with P1 elements in y = ln x. With
// e0 = x A^{-1/2} d/dx the density of |e0 c|^2 dv is W c_y^2 / A, W dy = dv.
std::vector<Forms> assemble(const WarpedMetric& m, const Nodes& nodes) {
  auto b = curvature_closed_form(m, {4, false, false});
  const auto& x = m.grid()->points();
  const int dim = m.m();
  const double mu = cross_section_tt_floor(m.cross_section, dim);
  const std::size_t ni = nodes.idx.size() - 2;
  const bool with_tt = std::isfinite(mu);

  struct Local {
    double A, B, H, Kr, Kt, hr, ht;
  };
  auto at = [&](std::size_t i) {
    return Local{m.A[i], m.B[i], b.H[i], b.K_rad[i], b.K_tan[i], b.h_rad[i], b.h_tan[i]};
  };

  std::vector<Eigen::Triplet<double>> ki, mi, kt, mt;
  const double gp[3] = {-std::sqrt(0.6), 0.0, std::sqrt(0.6)};
  const double gw[3] = {5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0};
  double vmin = std::numeric_limits<double>::infinity();

  for (std::size_t e = 0; e + 1 < nodes.idx.size(); ++e) {
    const std::size_t i0 = nodes.idx[e], i1 = nodes.idx[e + 1];
    const double y0 = std::log(x[i0]), y1 = std::log(x[i1]), hy = y1 - y0;
    const Local L0 = at(i0), L1 = at(i1);
    // element matrices in the local basis (phi0, phi1)
    double sk[2][2] = {}, sm[2][2] = {};      // shared stiffness and mass weights
    double p00[2][2] = {}, p01[2][2] = {}, p11[2][2] = {}, ptt[2][2] = {};
    for (int q = 0; q < 3; ++q) {
      const double s = 0.5 * (1 + gp[q]);
      const double y = y0 + s * hy, xq = std::exp(y);
      auto lin = [s](double a, double c) { return (1 - s) * a + s * c; };
      const double A = lin(L0.A, L1.A), B = lin(L0.B, L1.B), H = lin(L0.H, L1.H);
      const double Kr = lin(L0.Kr, L1.Kr), Kt = lin(L0.Kt, L1.Kt);
      const double hr = lin(L0.hr, L1.hr), ht = lin(L0.ht, L1.ht);
      const double W = std::pow(xq, 1 - m.n) * std::sqrt(A) * std::pow(B, 0.5 * dim);
      const double w = gw[q] * 0.5 * hy * W;
      const double phi[2] = {1 - s, s}, dphi[2] = {-1 / hy, 1 / hy};
      const double P00 = 2 * dim * H * H + 2 * hr;
      const double P01 = -2 * dim * H * H - 2 * dim * Kr;
      const double P11 = 2 * dim * H * H - 2 * dim * (dim - 1) * Kt + 2 * dim * ht;
      const double Ptt = (with_tt ? mu * xq * xq / B : 0.0) + 2 * H * H + 2 * Kt + 2 * ht;
      // lowest generalised eigenvalue of the potential against diag(1, m)
      const double a = P00, c = P11 / dim, d = P01 / std::sqrt(double(dim));
      vmin = std::min(vmin, 0.5 * (a + c) - std::sqrt(0.25 * (a - c) * (a - c) + d * d));
      vmin = std::min(vmin, Ptt);
      for (int r = 0; r < 2; ++r)
        for (int k = 0; k < 2; ++k) {
          sk[r][k] += w * dphi[r] * dphi[k] / A;
          sm[r][k] += w * phi[r] * phi[k];
          p00[r][k] += w * P00 * phi[r] * phi[k];
          p01[r][k] += w * P01 * phi[r] * phi[k];
          p11[r][k] += w * P11 * phi[r] * phi[k];
          ptt[r][k] += w * Ptt * phi[r] * phi[k];
        }
    }
    // interior numbering: node e of the truncated list maps to e - 1
    for (int r = 0; r < 2; ++r)
      for (int k = 0; k < 2; ++k) {
        const long gr = long(e) + r - 1, gk = long(e) + k - 1;
        if (gr < 0 || gk < 0 || gr >= long(ni) || gk >= long(ni)) continue;
        const int ir = int(2 * gr), ik = int(2 * gk);
        ki.emplace_back(ir, ik, sk[r][k] + p00[r][k]);
        ki.emplace_back(ir, ik + 1, p01[r][k]);
        ki.emplace_back(ir + 1, ik, p01[r][k]);
        ki.emplace_back(ir + 1, ik + 1, dim * sk[r][k] + p11[r][k]);
        mi.emplace_back(ir, ik, sm[r][k]);
        mi.emplace_back(ir + 1, ik + 1, dim * sm[r][k]);
        kt.emplace_back(int(gr), int(gk), sk[r][k] + ptt[r][k]);
        mt.emplace_back(int(gr), int(gk), sm[r][k]);
      }
  }
  std::vector<Forms> out(1);
  out[0].sector = "invariant";
  out[0].K.resize(long(2 * ni), long(2 * ni));
  out[0].M.resize(long(2 * ni), long(2 * ni));
  out[0].K.setFromTriplets(ki.begin(), ki.end());
  out[0].M.setFromTriplets(mi.begin(), mi.end());
  if (with_tt) {
    Forms f;
    f.sector = "tangential";
    f.K.resize(long(ni), long(ni));
    f.M.resize(long(ni), long(ni));
    f.K.setFromTriplets(kt.begin(), kt.end());
    f.M.setFromTriplets(mt.begin(), mt.end());
    out.push_back(std::move(f));
  }
  // The stiffness part is non-negative, so this shift makes K + shift M definite.
  const double shift = 1.0 + std::max(0.0, -vmin);
  for (auto& f : out) f.shift = shift;
  return out;
}

SectorEstimate inverse_iteration(const Forms& f, const SpectralTruncation& t) {
  SpMat S = f.K + f.shift * f.M;
  Eigen::SimplicialLDLT<SpMat> ldlt(S);
  if (ldlt.info() != Eigen::Success)
    throw Error(ErrorKind::iteration_stall, "factorisation of the shifted form failed");
  const long n = f.K.rows();
  Eigen::VectorXd v(n);
  const long comps = f.sector == "invariant" ? 2 : 1;
  for (long i = 0; i < n; ++i) {
    const double s = (double(i / comps) + 1.0) / double(n / comps + 1);
    v[i] = std::sin(M_PI * s) * (1.0 + 0.1 * double(i % comps));
  }
  SectorEstimate e;
  e.sector = f.sector;
  double prev = std::numeric_limits<double>::infinity();
  for (int it = 0; it < t.max_iterations; ++it) {
    Eigen::VectorXd y = ldlt.solve(f.M * v);
    const double nrm = std::sqrt(y.dot(f.M * y));
    v = y / nrm;
    const double lam = v.dot(f.K * v);  // v is M-normalised
    e.history.push_back(lam);
    e.iterations = it + 1;
    if (std::abs(lam - prev) < t.tolerance * std::max(1.0, std::abs(lam))) {
      e.lambda = lam;
      return e;
    }
    prev = lam;
  }
  throw Error(ErrorKind::iteration_stall, "inverse iteration did not settle in " +
                                              std::to_string(t.max_iterations) + " iterations");
}

SpectralEstimate wrap(const WarpedMetric& m, const Nodes& nodes, std::vector<SectorEstimate> sectors,
                      double shift) {
  SpectralEstimate s;
  s.sectors = std::move(sectors);
  std::size_t best = 0;
  for (std::size_t k = 1; k < s.sectors.size(); ++k)
    if (s.sectors[k].lambda < s.sectors[best].lambda) best = k;
  s.lambda = s.sectors[best].lambda;
  s.history = s.sectors[best].history;
  s.subspace =
      "invariant: a(x) dx^2 + b(x) x^-2 B sigma; tangential: c(x) x^-2 B T, T trace-free and "
      "divergence-free on the cross-section; Dirichlet at both collar ends; an upper-bound-style "
      "restriction of the infimum over all symmetric 2-tensors";
  s.x_lo = nodes.x_lo;
  s.x_hi = nodes.x_hi;
  s.collar_depth = radial_distance(m, nodes.x_lo, nodes.x_hi);
  s.interior_points = nodes.idx.size() - 2;
  s.shift = shift;
  return s;
}

}  // namespace

nlohmann::json SpectralEstimate::to_json() const {
  nlohmann::json j{{"lambda", lambda},       {"subspace", subspace},
                   {"x_lo", x_lo},           {"x_hi", x_hi},
                   {"collar_depth", collar_depth}, {"interior_points", interior_points},
                   {"shift", shift},         {"iterations", history.size()}};
  for (const auto& s : sectors)
    j["sectors"][s.sector] = {{"lambda", s.lambda}, {"iterations", s.iterations}};
  return j;
}

SpectralEstimate nondegeneracy_rayleigh(const WarpedMetric& m, const SpectralTruncation& trunc) {
  m.validate();
  auto nodes = truncate(m, trunc);
  auto forms = assemble(m, nodes);
  std::vector<SectorEstimate> est;
  for (const auto& f : forms) est.push_back(inverse_iteration(f, trunc));
  return wrap(m, nodes, std::move(est), forms.front().shift);
}

SpectralEstimate nondegeneracy_dense(const WarpedMetric& m, const SpectralTruncation& trunc) {
  m.validate();
  auto nodes = truncate(m, trunc);
  auto forms = assemble(m, nodes);
  std::vector<SectorEstimate> est;
  for (const auto& f : forms) {
    Eigen::MatrixXd K(f.K), M(f.M);
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(K, M, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) throw Error(ErrorKind::iteration_stall, "dense eigensolve failed");
    SectorEstimate e;
    e.sector = f.sector;
    e.lambda = es.eigenvalues()[0];
    e.history = {e.lambda};
    est.push_back(e);
  }
  return wrap(m, nodes, std::move(est), forms.front().shift);
}

// ---------------------------------------------------------------------------

nlohmann::json ConditionB::to_json() const {
  return {{"k0", k0}, {"k1", k1}, {"v0", v0}, {"lambda", lambda}, {"provenance", provenance}};
}

ConditionB condition_b_report(const WarpedMetric& m, const SpectralTruncation& trunc) {
  auto b = curvature_closed_form(m, {4, true, false});
  ConditionB c;
  const std::size_t skip = b.edge_rows, np = m.size();
  for (std::size_t i = skip; i + skip < np; ++i) {
    c.k0 = std::max(c.k0, b.norm_rm[i]);
    c.k1 = std::max(c.k1, b.norm_grad_rm[i]);
  }
  c.v0 = unit_ball_volume_lower_bound(m);
  auto s = nondegeneracy_rayleigh(m, trunc);
  c.lambda = s.lambda;
  c.provenance = {
      {"k0", "sup |Rm| over the closed-form curvature bundle, one-sided rows excluded"},
      {"k1", "sup |grad Rm| over the closed-form curvature bundle, one-sided rows excluded"},
      {"v0", "tube times cross-section cap lower bound for unit-ball volume, minimised over basepoints"},
      {"lambda", "smallest sector Rayleigh quotient, " + s.subspace},
      {"spectral", s.to_json()}};
  return c;
}

// ---------------------------------------------------------------------------

void defining_function_fields(const WarpedMetric& m, int accuracy, std::vector<double>& laplace,
                              std::vector<double>& gradient) {
  const auto& grid = *m.grid();
  const auto& x = grid.points();
  auto dA = derivative(grid, m.A.values, 1, accuracy);
  auto dB = derivative(grid, m.B.values, 1, accuracy);
  const int dim = m.m();
  laplace.resize(x.size());
  gradient.resize(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double A = m.A[i];
    // Delta x = (x / A) ((2 - n) + x (m B'/B - A'/A) / 2)
    const double lap = (x[i] / A) * ((2 - m.n) + 0.5 * x[i] * (dim * dB[i] / m.B[i] - dA[i] / A));
    laplace[i] = std::abs(lap - (2 - m.n) * x[i]) / x[i];
    gradient[i] = std::abs(1.0 / A - 1.0);  // (|grad x|^2 - x^2) / x^2 with |grad x|^2 = x^2 / A
  }
}

nlohmann::json DefiningFunctionReport::to_json() const {
  nlohmann::json j{{"x_small", x_small}, {"max_c_laplace", max_c_laplace},
                   {"max_c_gradient", max_c_gradient}};
  for (const auto& s : slices) {
    nlohmann::json e{{"t", s.t},
                     {"delta", s.delta},
                     {"sup_laplace", s.sup_laplace},
                     {"sup_gradient", s.sup_gradient},
                     {"c_laplace", s.c_laplace},
                     {"c_gradient", s.c_gradient}};
    if (s.laplace_slope) e["laplace_slope"] = *s.laplace_slope;
    j["slices"].push_back(e);
  }
  return j;
}

DefiningFunctionReport defining_function_checks(const FlowTrajectory& traj, double x_small, int accuracy) {
  if (traj.snapshots.empty()) throw Error(ErrorKind::insufficient_snapshots, "trajectory has no snapshots");
  DefiningFunctionReport rep;
  rep.x_small = x_small;
  const auto& recs = traj.records;
  const std::size_t skip = std::size_t(accuracy / 2);
  for (const auto& snap : traj.snapshots) {
    const auto& m = snap.metric;
    DefiningFunctionSlice s;
    s.t = m.time;
    for (std::size_t k = 0; k + 1 < recs.size() && recs[k + 1].t <= m.time * (1 + 1e-12); ++k)
      s.delta += 0.5 * (recs[k + 1].t - recs[k].t) * (recs[k].sup_h + recs[k + 1].sup_h);
    std::vector<double> lap, grad;
    defining_function_fields(m, accuracy, lap, grad);
    const auto& x = m.grid()->points();
    std::vector<double> fx, fy;
    for (std::size_t i = skip; i < x.size(); ++i) {
      if (x[i] > x_small) break;
      s.sup_laplace = std::max(s.sup_laplace, lap[i]);
      s.sup_gradient = std::max(s.sup_gradient, grad[i]);
      s.c_laplace = std::max(s.c_laplace, lap[i] / (s.delta + x[i]));
      s.c_gradient = std::max(s.c_gradient, grad[i] / (s.delta + x[i]));
      if (lap[i] > 1e-13) {
        fx.push_back(x[i]);
        fy.push_back(lap[i]);
      }
    }
    if (fx.size() >= 8) s.laplace_slope = fit_power_law(fx, fy).slope;
    rep.max_c_laplace = std::max(rep.max_c_laplace, s.c_laplace);
    rep.max_c_gradient = std::max(rep.max_c_gradient, s.c_gradient);
    rep.slices.push_back(s);
  }
  return rep;
}

}  // namespace ahflow
