#include "ahflow/frame_tensor.hpp"

#include <cmath>
#include <map>
#include <mutex>

#include "ahflow/error.hpp"

namespace ahflow {

namespace {

std::uint32_t pack(const FrameIndex& idx) {
  std::uint32_t key = 0;
  for (std::size_t s = 0; s < idx.size(); ++s) key |= std::uint32_t(idx[s]) << (3 * s);
  return key;
}

void enumerate(int order, int m, FrameIndex& cur, int labels, std::vector<int>& counts,
               FrameLayout& out) {
  if (int(cur.size()) == order) {
    for (int l = 1; l <= labels; ++l)
      if (counts[l] % 2) return;
    out.slot[pack(cur)] = int(out.tuples.size());
    out.tuples.push_back(cur);
    out.distinct.push_back(labels);
    return;
  }
  const int top = std::min(labels + 1, m);
  for (int v = 0; v <= top; ++v) {
    cur.push_back(v);
    counts[v] += 1;
    enumerate(order, m, cur, std::max(labels, v), counts, out);
    counts[v] -= 1;
    cur.pop_back();
  }
}

double falling(int m, int d) {
  double w = 1.0;
  for (int j = 0; j < d; ++j) w *= double(m - j);
  return w;
}

}  // namespace

const FrameLayout& FrameLayout::get(int order, int m) {
  if (order < 0 || order > 8) throw Error(ErrorKind::invalid_parameter, "frame tensor order must be <= 8");
  if (m < 1) throw Error(ErrorKind::invalid_parameter, "cross-section dimension must be >= 1");
  static std::mutex mu;
  static std::map<std::pair<int, int>, std::unique_ptr<FrameLayout>> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto& entry = cache[{order, m}];
  if (!entry) {
    entry = std::make_unique<FrameLayout>();
    entry->order = order;
    entry->m = m;
    FrameIndex cur;
    std::vector<int> counts(order + 2, 0);
    enumerate(order, m, cur, 0, counts, *entry);
  }
  return *entry;
}

int FrameLayout::find(const FrameIndex& idx) const {
  int relabel[16] = {0};
  int counts[16] = {0};
  int next = 0;
  std::uint32_t key = 0;
  for (std::size_t s = 0; s < idx.size(); ++s) {
    int v = idx[s];
    if (v != 0) {
      if (!relabel[v]) relabel[v] = ++next;
      v = relabel[v];
      counts[v] += 1;
    }
    key |= std::uint32_t(v) << (3 * s);
  }
  if (next > m) return -1;
  for (int l = 1; l <= next; ++l)
    if (counts[l] % 2) return -1;
  auto it = slot.find(key);
  return it == slot.end() ? -1 : it->second;
}

std::vector<double> FrameContext::e0(const std::vector<double>& f) const {
  auto d = derivative(*grid, f, 1, accuracy);
  for (std::size_t i = 0; i < d.size(); ++i) d[i] *= e0_scale[i];
  return d;
}

FrameTensor::FrameTensor(int order, int m, std::size_t points)
    : layout_(&FrameLayout::get(order, m)), points_(points),
      data_(layout_->tuples.size(), std::vector<double>(points, 0.0)) {}

const std::vector<double>* FrameTensor::get(const FrameIndex& idx) const {
  int k = layout_->find(idx);
  return k < 0 ? nullptr : &data_[k];
}

std::vector<double>& FrameTensor::at(const FrameIndex& canonical) {
  int k = layout_->find(canonical);
  if (k < 0) throw Error(ErrorKind::invalid_parameter, "component vanishes by symmetry");
  return data_[k];
}

FrameTensor covariant_derivative(const FrameTensor& t, const FrameContext& ctx) {
  const std::size_t np = t.points();
  const int k = t.order();
  FrameTensor out(k + 1, t.m(), np);
  std::vector<std::vector<double>> radial(t.layout().tuples.size());
  const auto& tuples = out.layout().tuples;
  FrameIndex rest(k);
  for (std::size_t c = 0; c < tuples.size(); ++c) {
    const auto& J = tuples[c];
    auto& dst = out[int(c)];
    for (int s = 0; s < k; ++s) rest[s] = J[s + 1];
    if (J[0] == 0) {
      int src = t.layout().find(rest);
      if (src < 0) continue;
      if (radial[src].empty()) radial[src] = ctx.e0(t[src]);
      dst = radial[src];
      continue;
    }
    const int a = J[0];
    for (int s = 0; s < k; ++s) {
      const int v = rest[s];
      if (v != a && v != 0) continue;
      FrameIndex sub = rest;
      sub[s] = v == a ? 0 : a;
      const auto* src = t.get(sub);
      if (!src) continue;
      const double sign = v == a ? 1.0 : -1.0;
      for (std::size_t i = 0; i < np; ++i) dst[i] += sign * ctx.H[i] * (*src)[i];
    }
  }
  return out;
}

FrameTensor contract(const FrameTensor& t, int s1, int s2) {
  if (s1 == s2 || s1 < 0 || s2 < 0 || s1 >= t.order() || s2 >= t.order())
    throw Error(ErrorKind::invalid_parameter, "bad contraction slots");
  if (s1 > s2) std::swap(s1, s2);
  const int m = t.m();
  const std::size_t np = t.points();
  FrameTensor out(t.order() - 2, m, np);
  const auto& lay = out.layout();
  for (std::size_t c = 0; c < lay.tuples.size(); ++c) {
    const auto& J = lay.tuples[c];
    const int d = lay.distinct[c];
    auto& dst = out[int(c)];
    auto add = [&](int label, double mult) {
      FrameIndex full;
      full.reserve(J.size() + 2);
      std::size_t j = 0;
      for (int s = 0; s < t.order(); ++s) full.push_back(s == s1 || s == s2 ? label : J[j++]);
      const auto* src = t.get(full);
      if (!src) return;
      for (std::size_t i = 0; i < np; ++i) dst[i] += mult * (*src)[i];
    };
    add(0, 1.0);
    for (int l = 1; l <= d; ++l) add(l, 1.0);
    if (m > d) add(d + 1, double(m - d));
  }
  return out;
}

FrameTensor tensor_product(const FrameTensor& a, const FrameTensor& b) {
  if (a.m() != b.m() || a.points() != b.points())
    throw Error(ErrorKind::invalid_parameter, "tensor product of incompatible fields");
  const std::size_t np = a.points();
  const int ka = a.order();
  FrameTensor out(ka + b.order(), a.m(), np);
  const auto& lay = out.layout();
  for (std::size_t c = 0; c < lay.tuples.size(); ++c) {
    const auto& J = lay.tuples[c];
    FrameIndex ja(J.begin(), J.begin() + ka), jb(J.begin() + ka, J.end());
    const auto* pa = a.get(ja);
    const auto* pb = b.get(jb);
    if (!pa || !pb) continue;
    auto& dst = out[int(c)];
    for (std::size_t i = 0; i < np; ++i) dst[i] = (*pa)[i] * (*pb)[i];
  }
  return out;
}

FrameTensor permute(const FrameTensor& t, const std::vector<int>& perm) {
  if (int(perm.size()) != t.order()) throw Error(ErrorKind::invalid_parameter, "bad permutation");
  FrameTensor out(t.order(), t.m(), t.points());
  const auto& lay = out.layout();
  FrameIndex src(perm.size());
  for (std::size_t c = 0; c < lay.tuples.size(); ++c) {
    for (std::size_t s = 0; s < perm.size(); ++s) src[s] = lay.tuples[c][perm[s]];
    const auto* p = t.get(src);
    if (p) out[int(c)] = *p;
  }
  return out;
}

FrameTensor combine(double a, const FrameTensor& s, double b, const FrameTensor& t) {
  if (s.order() != t.order() || s.m() != t.m() || s.points() != t.points())
    throw Error(ErrorKind::invalid_parameter, "combining incompatible tensors");
  FrameTensor out(s.order(), s.m(), s.points());
  for (std::size_t c = 0; c < out.layout().tuples.size(); ++c)
    for (std::size_t i = 0; i < s.points(); ++i) out[int(c)][i] = a * s[int(c)][i] + b * t[int(c)][i];
  return out;
}

FrameTensor scale(const FrameTensor& t, const std::vector<double>& c) {
  FrameTensor out = t;
  for (std::size_t k = 0; k < t.layout().tuples.size(); ++k)
    for (std::size_t i = 0; i < t.points(); ++i) out[int(k)][i] *= c[i];
  return out;
}

std::vector<double> inner(const FrameTensor& a, const FrameTensor& b) {
  if (a.order() != b.order() || a.m() != b.m())
    throw Error(ErrorKind::invalid_parameter, "inner product of incompatible tensors");
  std::vector<double> out(a.points(), 0.0);
  const auto& lay = a.layout();
  for (std::size_t c = 0; c < lay.tuples.size(); ++c) {
    const double w = falling(a.m(), lay.distinct[c]);
    for (std::size_t i = 0; i < a.points(); ++i) out[i] += w * a[int(c)][i] * b[int(c)][i];
  }
  return out;
}

std::vector<double> norm_squared(const FrameTensor& t) { return inner(t, t); }

std::vector<double> norm(const FrameTensor& t) {
  auto v = norm_squared(t);
  for (auto& x : v) x = std::sqrt(std::max(x, 0.0));
  return v;
}

FrameTensor scalar_tensor(int m, const std::vector<double>& v) {
  FrameTensor out(0, m, v.size());
  out[0] = v;
  return out;
}

FrameTensor metric_tensor(int m, std::size_t points) {
  FrameTensor out(2, m, points);
  out.at({0, 0}).assign(points, 1.0);
  out.at({1, 1}).assign(points, 1.0);
  return out;
}

FrameTensor symmetric_two_tensor(int m, const std::vector<double>& u0, const std::vector<double>& u1) {
  FrameTensor out(2, m, u0.size());
  out.at({0, 0}) = u0;
  out.at({1, 1}) = u1;
  return out;
}

FrameTensor riemann_tensor(int m, const std::vector<double>& K_rad, const std::vector<double>& K_tan) {
  const std::size_t np = K_rad.size();
  FrameTensor out(4, m, np);
  std::vector<double> neg_rad(np), neg_tan(np);
  for (std::size_t i = 0; i < np; ++i) {
    neg_rad[i] = -K_rad[i];
    neg_tan[i] = -K_tan[i];
  }
  out.at({0, 1, 0, 1}) = K_rad;
  out.at({1, 0, 1, 0}) = K_rad;
  out.at({0, 1, 1, 0}) = neg_rad;
  out.at({1, 0, 0, 1}) = neg_rad;
  if (m >= 2) {
    out.at({1, 2, 1, 2}) = K_tan;
    out.at({1, 2, 2, 1}) = neg_tan;
  }
  return out;
}

}  // namespace ahflow
