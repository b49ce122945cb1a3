#pragma once

// Tensor fields on a warped product g = ds^2 + f(s)^2 sigma that are
// invariant under the isometries of the cross-section. Components are taken
// in an orthonormal frame {e0 = radial, e1..em tangential}. Invariance means a
// component depends only on the pattern of its index tuple: which slots are
// radial, and which tangential slots share a label. Components with a label
// occurring an odd number of times vanish. Only canonical tuples (labels
// numbered by first occurrence) are stored.

#include <cstdint>
#include <memory>
#include <unordered_map>
#include <vector>

#include "ahflow/grid.hpp"

namespace ahflow {

using FrameIndex = std::vector<int>;  // 0 = radial, k >= 1 = tangential label

struct FrameLayout {
  int order = 0;
  int m = 0;
  std::vector<FrameIndex> tuples;
  std::vector<int> distinct;  // number of tangential labels in each tuple
  std::unordered_map<std::uint32_t, int> slot;

  static const FrameLayout& get(int order, int m);
  // Position of the canonical form of idx, or -1 if the component vanishes.
  int find(const FrameIndex& idx) const;
};

// Radial frame data shared by all tensor operations on one metric state.
struct FrameContext {
  GridPtr grid;
  int m = 0;
  int accuracy = 2;
  std::vector<double> H;         // e0(f)/f, so that nabla_{e_a} e0 = H e_a
  std::vector<double> e0_scale;  // e0 = e0_scale * d/dx
  std::vector<double> e0(const std::vector<double>& f) const;
};

class FrameTensor {
 public:
  FrameTensor(int order, int m, std::size_t points);

  int order() const { return layout_->order; }
  int m() const { return layout_->m; }
  std::size_t points() const { return points_; }
  const FrameLayout& layout() const { return *layout_; }

  std::vector<double>& operator[](int k) { return data_[k]; }
  const std::vector<double>& operator[](int k) const { return data_[k]; }
  // Component for an arbitrary tuple; returns nullptr for vanishing ones.
  const std::vector<double>* get(const FrameIndex& idx) const;
  std::vector<double>& at(const FrameIndex& canonical);

 private:
  const FrameLayout* layout_;
  std::size_t points_;
  std::vector<std::vector<double>> data_;
};

FrameTensor covariant_derivative(const FrameTensor& t, const FrameContext& ctx);
FrameTensor contract(const FrameTensor& t, int s1, int s2);
FrameTensor tensor_product(const FrameTensor& a, const FrameTensor& b);
// result(J) = t(J[perm[0]], ..., J[perm[k-1]])
FrameTensor permute(const FrameTensor& t, const std::vector<int>& perm);
FrameTensor combine(double a, const FrameTensor& s, double b, const FrameTensor& t);
FrameTensor scale(const FrameTensor& t, const std::vector<double>& c);
std::vector<double> norm_squared(const FrameTensor& t);
std::vector<double> norm(const FrameTensor& t);
// Full contraction <a, b> pointwise.
std::vector<double> inner(const FrameTensor& a, const FrameTensor& b);

FrameTensor scalar_tensor(int m, const std::vector<double>& v);
FrameTensor metric_tensor(int m, std::size_t points);
// Symmetric 2-tensor u = u0 e0*e0 + u1 sum_a e_a*e_a.
FrameTensor symmetric_two_tensor(int m, const std::vector<double>& u0, const std::vector<double>& u1);
// Curvature operator with R_ijkl = K (g_ik g_jl - g_il g_jk) on each plane type.
FrameTensor riemann_tensor(int m, const std::vector<double>& K_rad, const std::vector<double>& K_tan);

}  // namespace ahflow
