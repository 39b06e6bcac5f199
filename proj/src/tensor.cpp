#include "hencky/tensor.hpp"

namespace hencky {

std::size_t SymTensor::index(int i, int j) const {
  if (i == j) return static_cast<std::size_t>(i);
  if (i > j) std::swap(i, j);
  if (dim_ == 2) return 2;
  // (0,1) -> 3, (0,2) -> 4, (1,2) -> 5
  return static_cast<std::size_t>(i == 0 ? 2 + j : 5);
}

SymTensor SymTensor::identity(int dim) {
  SymTensor t(dim);
  for (int i = 0; i < dim; ++i) t.c_[i] = 1.0;
  return t;
}

SymTensor SymTensor::diag(double a, double b) {
  SymTensor t(2);
  t.c_[0] = a;
  t.c_[1] = b;
  return t;
}

SymTensor SymTensor::diag(double a, double b, double c) {
  SymTensor t(3);
  t.c_[0] = a;
  t.c_[1] = b;
  t.c_[2] = c;
  return t;
}

SymTensor SymTensor::from_matrix(int dim, std::span<const double> m) {
  SymTensor t(dim);
  if (m.size() != static_cast<std::size_t>(dim * dim))
    throw std::invalid_argument("SymTensor::from_matrix: wrong entry count");
  for (int i = 0; i < dim; ++i)
    for (int j = i; j < dim; ++j) t.set(i, j, 0.5 * (m[i * dim + j] + m[j * dim + i]));
  return t;
}

SymTensor SymTensor::from_components(int dim, std::span<const double> c) {
  SymTensor t(dim);
  if (c.size() != static_cast<std::size_t>(size_for(dim)))
    throw std::invalid_argument("SymTensor::from_components: wrong component count");
  for (std::size_t k = 0; k < c.size(); ++k) t.c_[k] = c[k];
  return t;
}

double SymTensor::trace() const {
  double s = 0.0;
  for (int i = 0; i < dim_; ++i) s += c_[i];
  return s;
}

double SymTensor::ddot(const SymTensor& o) const {
  double d = 0.0, off = 0.0;
  const int n = size();
  for (int k = 0; k < dim_; ++k) d += c_[k] * o.c_[k];
  for (int k = dim_; k < n; ++k) off += c_[k] * o.c_[k];
  return d + 2.0 * off;
}

SymTensor SymTensor::deviator() const {
  SymTensor t = *this;
  const double m = trace() / dim_;
  for (int i = 0; i < dim_; ++i) t.c_[i] -= m;
  return t;
}

SymTensor& SymTensor::operator+=(const SymTensor& o) {
  for (int k = 0; k < 6; ++k) c_[k] += o.c_[k];
  return *this;
}

SymTensor& SymTensor::operator-=(const SymTensor& o) {
  for (int k = 0; k < 6; ++k) c_[k] -= o.c_[k];
  return *this;
}

SymTensor& SymTensor::operator*=(double s) {
  for (auto& v : c_) v *= s;
  return *this;
}

Vec SymTensor::apply(const Vec& v) const {
  Vec r = Vec::zero(dim_);
  for (int i = 0; i < dim_; ++i)
    for (int j = 0; j < dim_; ++j) r[i] += (*this)(i, j) * v[j];
  return r;
}

SymTensor deviator(const SymTensor& xi) { return xi.deviator(); }

SymTensor sym_outer(const Vec& a, const Vec& b) {
  if (a.dim != b.dim) throw std::invalid_argument("sym_outer: dimension mismatch");
  SymTensor t(a.dim);
  for (int i = 0; i < a.dim; ++i)
    for (int j = i; j < a.dim; ++j) t.set(i, j, 0.5 * (a[i] * b[j] + a[j] * b[i]));
  return t;
}

SymTensor deviatoric_basis(int n, int k) {
  SymTensor t(n);
  const double s2 = 1.0 / std::sqrt(2.0);
  if (n == 2) {
    if (k == 0) return SymTensor::diag(s2, -s2);
    if (k == 1) {
      t.set(0, 1, s2);
      return t;
    }
  } else {
    const double s6 = 1.0 / std::sqrt(6.0);
    switch (k) {
      case 0: return SymTensor::diag(s2, -s2, 0.0);
      case 1: return SymTensor::diag(s6, s6, -2.0 * s6);
      case 2: t.set(0, 1, s2); return t;
      case 3: t.set(0, 2, s2); return t;
      case 4: t.set(1, 2, s2); return t;
      default: break;
    }
  }
  throw std::out_of_range("deviatoric_basis: index out of range");
}

}  // namespace hencky
