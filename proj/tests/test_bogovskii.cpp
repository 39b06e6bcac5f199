#include <cmath>

#include "doctest.h"
#include "hencky/bogovskii.hpp"

using namespace hencky;

namespace {

Vec bump_field(const Vec& x, const Vec& c, double r, const Vec& dir) {
  const double s = (x - c).dot(x - c) / (r * r);
  if (s >= 1.0) return Vec::zero(x.dim);
  const double b = (1 - s) * (1 - s) * (1 - s);
  return b * dir;
}

std::vector<double> manufactured(const Mesh& m, int which) {
  const Displacement v = Displacement::interpolate(m, [which](const Vec& x) {
    return which == 0 ? bump_field(x, Vec(0.45, 0.5), 0.35, Vec(1.0, -0.5))
                      : bump_field(x, Vec(0.6, 0.4), 0.3, Vec(-0.2, 1.0)) + bump_field(x, Vec(0.3, 0.7), 0.2, Vec(0.7, 0.7));
  });
  return divergence(m, v);
}

double rel_residual(const Mesh& m, const Displacement& v, const std::vector<double>& psi) {
  const auto d = divergence(m, v);
  std::vector<double> r(d.size());
  for (std::size_t c = 0; c < d.size(); ++c) r[c] = d[c] - psi[c];
  return l2_norm(m, r) / l2_norm(m, psi);
}

}  // namespace

TEST_CASE("mean_project examples") {
  const Mesh m = gen_rectangle({1.0, 1.0}, 4, kAllSides);
  for (double x : mean_project(std::vector<double>(m.num_cells(), 3.7), m)) CHECK(std::abs(x) < 1e-15);
  std::vector<double> half(m.num_cells());
  for (std::size_t c = 0; c < half.size(); ++c) half[c] = m.centroid(c)[0] < 0.5 ? 1.0 : 0.0;
  const auto p = mean_project(half, m);
  for (std::size_t c = 0; c < p.size(); ++c) CHECK(p[c] == doctest::Approx(half[c] ? 0.5 : -0.5));
  const auto again = mean_project(p, m);
  for (std::size_t c = 0; c < p.size(); ++c) CHECK(again[c] == doctest::Approx(p[c]).epsilon(1e-15));
  double integral = 0.0;
  for (std::size_t c = 0; c < p.size(); ++c) integral += again[c] * m.volume(c);
  CHECK(std::abs(integral) < 1e-16);
}

TEST_CASE("zero right-hand side") {
  const Mesh m = gen_rectangle({1.0, 1.0}, 4, kAllSides);
  const DivResult r = solve_div({&m, std::vector<double>(m.num_cells(), 0.0)});
  CHECK(r.ratio == 0.0);
  for (const Vec& v : r.v.values) CHECK(v.norm() == 0.0);
}

TEST_CASE("manufactured divergence is reproduced with zero trace") {
  for (int m : {8, 16}) {
    const Mesh mesh = gen_rectangle({1.0, 1.0}, m, kAllSides);
    const auto psi = manufactured(mesh, 0);
    const DivResult r = solve_div({&mesh, psi});
    CHECK(rel_residual(mesh, r.v, psi) <= 1e-8);
    CHECK(r.residual <= 1e-8);
    CHECK(r.spurious <= 1e-8);
    const auto bnd = mesh.boundary_vertices();
    double trace = 0.0;
    for (std::size_t i = 0; i < bnd.size(); ++i)
      if (bnd[i]) trace = std::max(trace, r.v.values[i].norm());
    CHECK(trace == 0.0);
  }
}

TEST_CASE("divergence solve is linear") {
  const Mesh mesh = gen_rectangle({1.0, 1.0}, 12, kAllSides);
  const auto p1 = manufactured(mesh, 0), p2 = manufactured(mesh, 1);
  const double a = 0.7, b = -2.3;
  std::vector<double> mix(p1.size());
  for (std::size_t c = 0; c < mix.size(); ++c) mix[c] = a * p1[c] + b * p2[c];
  const DivResult r = solve_div({&mesh, mix});
  CHECK(rel_residual(mesh, r.v, mix) <= 2e-8);
  const DivResult r1 = solve_div({&mesh, p1}), r2 = solve_div({&mesh, p2});
  double diff = 0.0, scale = 0.0;
  for (std::size_t i = 0; i < r.v.values.size(); ++i) {
    diff = std::max(diff, (r.v.values[i] - a * r1.v.values[i] - b * r2.v.values[i]).norm());
    scale = std::max(scale, r.v.values[i].norm());
  }
  CHECK(diff <= 1e-8 * scale);
}

TEST_CASE("stability ratio is uniform under refinement") {
  std::vector<double> ratios;
  for (int m : {8, 16, 32}) {
    const Mesh mesh = gen_rectangle({1.0, 1.0}, m, kAllSides);
    ratios.push_back(solve_div({&mesh, manufactured(mesh, 1)}).ratio);
  }
  const auto [lo, hi] = std::minmax_element(ratios.begin(), ratios.end());
  CHECK(*lo > 0.0);
  CHECK(*hi / *lo < 2.0);
}

TEST_CASE("right-hand sides outside the range are filtered") {
  const Mesh mesh = gen_rectangle({1.0, 1.0}, 8, kAllSides);
  std::vector<double> psi(mesh.num_cells());
  for (std::size_t c = 0; c < psi.size(); ++c) psi[c] = mesh.centroid(c)[0] < 0.5 ? 1.0 : 0.0;
  psi = mean_project(psi, mesh);
  const DivResult r = solve_div({&mesh, psi});
  CHECK(r.residual <= 1e-8);
  CHECK(r.spurious > 1e-3);
  // least-squares optimality: the leftover is orthogonal to every discrete divergence
  const auto d = divergence(mesh, r.v);
  const auto bnd = mesh.boundary_vertices();
  double worst = 0.0;
  for (std::size_t i = 0; i < bnd.size(); ++i) {
    if (bnd[i]) continue;
    for (int k = 0; k < 2; ++k) {
      Displacement e = Displacement::zero(mesh);
      e.values[i][k] = 1.0;
      const auto de = divergence(mesh, e);
      double s = 0.0;
      for (std::size_t c = 0; c < de.size(); ++c) s += (psi[c] - d[c]) * de[c] * mesh.volume(c);
      worst = std::max(worst, std::abs(s));
    }
  }
  CHECK(worst <= 1e-8 * l2_norm(mesh, psi));
}

TEST_CASE("incompatible data is rejected") {
  const Mesh mesh = gen_rectangle({1.0, 1.0}, 4, kAllSides);
  std::vector<double> psi(mesh.num_cells(), 0.0);
  psi[0] = 1.0;
  CHECK_THROWS_AS(solve_div({&mesh, psi}), IncompatibleRhs);
  CHECK_THROWS_AS(solve_div({&mesh, std::vector<double>(3, 0.0)}), std::invalid_argument);
}

TEST_CASE("three-dimensional divergence solve") {
  const Mesh mesh = gen_rectangle({1.0, 1.0, 1.0}, 4, kAllSides);
  const Displacement v = Displacement::interpolate(mesh, [](const Vec& x) {
    const double s = (x - Vec(0.5, 0.5, 0.5)).dot(x - Vec(0.5, 0.5, 0.5)) / 0.16;
    return s >= 1 ? Vec(0, 0, 0) : std::pow(1 - s, 3) * Vec(1.0, 0.5, -0.3);
  });
  const auto psi = divergence(mesh, v);
  const DivResult r = solve_div({&mesh, psi});
  CHECK(rel_residual(mesh, r.v, psi) <= 1e-8);
}
