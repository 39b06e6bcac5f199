#include "doctest.h"
#include "support.hpp"

using hencky::SymTensor;
using hencky::Vec;

TEST_CASE("deviator examples") {
  CHECK(hencky::deviator(SymTensor::identity(3)).norm() == doctest::Approx(0.0));
  const SymTensor d = hencky::deviator(SymTensor::diag(1.0, 0.0));
  CHECK(d(0, 0) == doctest::Approx(0.5));
  CHECK(d(1, 1) == doctest::Approx(-0.5));
  CHECK(d(0, 1) == 0.0);
  const SymTensor t = SymTensor::diag(2.0, -1.0, -1.0);
  CHECK((hencky::deviator(t) - t).norm() == doctest::Approx(0.0));
}

TEST_CASE("sym_outer examples") {
  const SymTensor a = hencky::sym_outer(Vec(1, 0), Vec(0, 1));
  CHECK(a(0, 1) == 0.5);
  CHECK(a(1, 0) == 0.5);
  CHECK(a(0, 0) == 0.0);
  const SymTensor b = hencky::sym_outer(Vec(1, 0), Vec(1, 0));
  CHECK(b(0, 0) == 1.0);
  CHECK(b.trace() == 1.0);
  CHECK(hencky::sym_outer(Vec(1, 1), Vec(1, -1)).trace() == 0.0);
}

TEST_CASE("norm uses full matrix entries") {
  SymTensor t(2);
  t.set(0, 1, 1.0);
  CHECK(t.norm() == doctest::Approx(std::sqrt(2.0)));
  SymTensor u(3);
  u.set(1, 2, 3.0);
  CHECK(u(2, 1) == 3.0);
  CHECK(u.norm() == doctest::Approx(3.0 * std::sqrt(2.0)));
  CHECK(SymTensor(3).norm() == 0.0);
}

TEST_CASE("from_matrix keeps the symmetric part") {
  const double m[] = {1.0, 2.0, 0.0, 3.0};
  const SymTensor t = SymTensor::from_matrix(2, m);
  CHECK(t(0, 1) == 1.0);
  CHECK(t(1, 1) == 3.0);
  CHECK_THROWS_AS(SymTensor(4), std::invalid_argument);
}

TEST_CASE("orthogonal decomposition property") {
  std::mt19937 rng(7);
  for (int n : {2, 3})
    for (int i = 0; i < 500; ++i) {
      const SymTensor xi = testing::random_sym(rng, n, 3.0);
      const SymTensor d = xi.deviator();
      CHECK(std::abs(d.ddot(SymTensor::identity(n))) <= 1e-14 * xi.norm() + 1e-300);
      const SymTensor back = d + (xi.trace() / n) * SymTensor::identity(n);
      CHECK((back - xi).norm() <= 1e-14 * xi.norm());
    }
}

TEST_CASE("deviatoric basis is orthonormal and trace-free") {
  for (int n : {2, 3}) {
    const int m = hencky::deviatoric_dim(n);
    for (int i = 0; i < m; ++i) {
      CHECK(std::abs(hencky::deviatoric_basis(n, i).trace()) < 1e-15);
      for (int j = 0; j < m; ++j)
        CHECK(hencky::deviatoric_basis(n, i).ddot(hencky::deviatoric_basis(n, j)) ==
              doctest::Approx(i == j ? 1.0 : 0.0));
    }
  }
}

TEST_CASE("apply and sym_outer trace identity") {
  std::mt19937 rng(3);
  std::normal_distribution<double> g;
  for (int i = 0; i < 100; ++i) {
    const Vec a(g(rng), g(rng), g(rng)), b(g(rng), g(rng), g(rng));
    CHECK(hencky::sym_outer(a, b).trace() == doctest::Approx(a.dot(b)));
    const SymTensor s = hencky::sym_outer(a, a);
    CHECK(s.apply(b)[0] == doctest::Approx(a[0] * a.dot(b)));
  }
}
