#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>

namespace hencky {

/// Small fixed-capacity vector in R^n, n in {2,3}.
struct Vec {
  int dim = 2;
  std::array<double, 3> x{0.0, 0.0, 0.0};

  Vec() = default;
  Vec(double a, double b) : dim(2), x{a, b, 0.0} {}
  Vec(double a, double b, double c) : dim(3), x{a, b, c} {}
  static Vec zero(int n) {
    Vec v;
    v.dim = n;
    return v;
  }

  double& operator[](int i) { return x[static_cast<std::size_t>(i)]; }
  double operator[](int i) const { return x[static_cast<std::size_t>(i)]; }

  Vec& operator+=(const Vec& o) {
    for (int i = 0; i < dim; ++i) x[i] += o.x[i];
    return *this;
  }
  Vec& operator-=(const Vec& o) {
    for (int i = 0; i < dim; ++i) x[i] -= o.x[i];
    return *this;
  }
  Vec& operator*=(double s) {
    for (int i = 0; i < dim; ++i) x[i] *= s;
    return *this;
  }
  friend Vec operator+(Vec a, const Vec& b) { return a += b; }
  friend Vec operator-(Vec a, const Vec& b) { return a -= b; }
  friend Vec operator*(double s, Vec a) { return a *= s; }
  friend Vec operator*(Vec a, double s) { return a *= s; }

  double dot(const Vec& o) const {
    double s = 0.0;
    for (int i = 0; i < dim; ++i) s += x[i] * o.x[i];
    return s;
  }
  double norm() const { return std::sqrt(dot(*this)); }
};

/// Symmetric n x n tensor, n in {2,3}.
///
/// Components are stored unscaled in the fixed order (11, 22, 12) for n = 2
/// and (11, 22, 33, 12, 13, 23) for n = 3. Norms and contractions always use
/// the full matrix entries, so off-diagonal components count twice.
class SymTensor {
 public:
  SymTensor() = default;
  explicit SymTensor(int dim) : dim_(check_dim(dim)) {}

  static SymTensor identity(int dim);
  static SymTensor diag(double a, double b);
  static SymTensor diag(double a, double b, double c);
  /// Build from a full row-major n x n matrix; the symmetric part is kept.
  static SymTensor from_matrix(int dim, std::span<const double> m);
  /// Build from the stored component ordering.
  static SymTensor from_components(int dim, std::span<const double> c);

  int dim() const { return dim_; }
  static constexpr int size_for(int dim) { return dim == 2 ? 3 : 6; }
  int size() const { return size_for(dim_); }

  double& component(int k) { return c_[static_cast<std::size_t>(k)]; }
  double component(int k) const { return c_[static_cast<std::size_t>(k)]; }
  /// True when component k is an off-diagonal entry.
  bool off_diagonal(int k) const { return k >= dim_; }

  double operator()(int i, int j) const { return c_[index(i, j)]; }
  void set(int i, int j, double v) { c_[index(i, j)] = v; }

  double trace() const;
  /// Frobenius product xi : zeta.
  double ddot(const SymTensor& o) const;
  double norm() const { return std::sqrt(ddot(*this)); }
  SymTensor deviator() const;

  SymTensor& operator+=(const SymTensor& o);
  SymTensor& operator-=(const SymTensor& o);
  SymTensor& operator*=(double s);
  friend SymTensor operator+(SymTensor a, const SymTensor& b) { return a += b; }
  friend SymTensor operator-(SymTensor a, const SymTensor& b) { return a -= b; }
  friend SymTensor operator*(double s, SymTensor a) { return a *= s; }
  friend SymTensor operator*(SymTensor a, double s) { return a *= s; }
  friend SymTensor operator-(SymTensor a) { return a *= -1.0; }

  /// Tensor applied to a vector.
  Vec apply(const Vec& v) const;

 private:
  static int check_dim(int dim) {
    if (dim != 2 && dim != 3) throw std::invalid_argument("SymTensor: dimension must be 2 or 3");
    return dim;
  }
  std::size_t index(int i, int j) const;

  int dim_ = 2;
  std::array<double, 6> c_{};
};

SymTensor deviator(const SymTensor& xi);

/// Symmetrised tensor product (a_i b_j + a_j b_i) / 2.
SymTensor sym_outer(const Vec& a, const Vec& b);

/// Dimension of the trace-free subspace.
inline int deviatoric_dim(int n) { return n == 2 ? 2 : 5; }

/// Orthonormal basis of the trace-free symmetric matrices (Frobenius product).
SymTensor deviatoric_basis(int n, int k);

}  // namespace hencky
