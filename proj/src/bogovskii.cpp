#include "hencky/bogovskii.hpp"

#include <cmath>
#include <string>

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

namespace hencky {

std::vector<double> mean_project(const std::vector<double>& psi, const Mesh& mesh) {
  if (psi.size() != mesh.num_cells()) throw std::invalid_argument("mean_project: one value per cell expected");
  // Neumaier summation of the integral
  double sum = 0.0, comp = 0.0;
  for (std::size_t c = 0; c < psi.size(); ++c) {
    const double x = psi[c] * mesh.volume(c);
    const double t = sum + x;
    comp += std::abs(sum) >= std::abs(x) ? (sum - t) + x : (x - t) + sum;
    sum = t;
  }
  const double mean = (sum + comp) / mesh.total_volume();
  std::vector<double> out(psi);
  for (double& v : out) v -= mean;
  return out;
}

double w1p_norm(const Mesh& mesh, const Displacement& v, double p) {
  double g = 0.0;
  const int n = mesh.dim();
  for (std::size_t c = 0; c < mesh.num_cells(); ++c) {
    double f2 = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        double d = 0.0;
        for (int a = 0; a <= n; ++a) d += v.values[static_cast<std::size_t>(mesh.cell(c)[static_cast<std::size_t>(a)])][i] * mesh.grad(c, a)[j];
        f2 += d * d;
      }
    g += std::pow(std::sqrt(f2), p) * mesh.volume(c);
  }
  return std::pow(std::pow(lq_norm(mesh, v, p), p) + g, 1.0 / p);
}

namespace {

double lp_cells(const Mesh& mesh, const std::vector<double>& f, double p) {
  double s = 0.0;
  for (std::size_t c = 0; c < f.size(); ++c) s += std::pow(std::abs(f[c]), p) * mesh.volume(c);
  return std::pow(s, 1.0 / p);
}

}  // namespace

DivResult solve_div(const DivProblem& prob) {
  if (!prob.mesh) throw std::invalid_argument("solve_div: no mesh");
  const Mesh& mesh = *prob.mesh;
  const int n = mesh.dim();
  const std::size_t nc = mesh.num_cells();
  if (prob.psi.size() != nc) throw std::invalid_argument("solve_div: one value per cell expected");

  double integral = 0.0, sup = 0.0;
  for (std::size_t c = 0; c < nc; ++c) {
    integral += prob.psi[c] * mesh.volume(c);
    sup = std::max(sup, std::abs(prob.psi[c]));
  }
  if (std::abs(integral) > 1e-12 * sup * mesh.total_volume())
    throw IncompatibleRhs("solve_div: right-hand side has nonzero mean " + std::to_string(integral));

  DivResult out;
  out.v = Displacement::zero(mesh);
  const double psi_norm = l2_norm(mesh, prob.psi);
  if (psi_norm == 0.0) return out;

  const auto boundary = mesh.boundary_vertices();
  std::vector<int> index(mesh.num_vertices(), -1);
  int free = 0;
  for (std::size_t i = 0; i < index.size(); ++i)
    if (!boundary[i]) index[i] = free++;
  const int nu = free * n;
  const int size = nu + static_cast<int>(nc);

  // [A, D^T W; W D, -eps W]: vector stiffness, weighted P0 divergence, proximal term
  const double eps = 1e-6;
  std::vector<Eigen::Triplet<double>> trip;
  for (std::size_t c = 0; c < nc; ++c) {
    const double vol = mesh.volume(c);
    const int row = nu + static_cast<int>(c);
    for (int a = 0; a <= n; ++a) {
      const int ia = index[static_cast<std::size_t>(mesh.cell(c)[static_cast<std::size_t>(a)])];
      if (ia < 0) continue;
      for (int b = 0; b <= n; ++b) {
        const int ib = index[static_cast<std::size_t>(mesh.cell(c)[static_cast<std::size_t>(b)])];
        if (ib < 0) continue;
        const double k = vol * mesh.grad(c, a).dot(mesh.grad(c, b));
        for (int d = 0; d < n; ++d) trip.emplace_back(ia * n + d, ib * n + d, k);
      }
      for (int d = 0; d < n; ++d) {
        const double e = vol * mesh.grad(c, a)[d];
        trip.emplace_back(row, ia * n + d, e);
        trip.emplace_back(ia * n + d, row, e);
      }
    }
    trip.emplace_back(row, row, -eps * vol);
  }
  Eigen::SparseMatrix<double> k(size, size);
  k.setFromTriplets(trip.begin(), trip.end());
  k.makeCompressed();
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  lu.compute(k);
  if (lu.info() != Eigen::Success) throw std::runtime_error("solve_div: singular saddle system");

  // proximal method of multipliers; range components of the residual contract by ~eps per step
  Eigen::VectorXd mu = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(nc));
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(size);
  std::vector<double> div_prev(nc, 0.0);
  for (int it = 1; it <= 50; ++it) {
    for (std::size_t c = 0; c < nc; ++c)
      rhs[nu + static_cast<Eigen::Index>(c)] = mesh.volume(c) * (prob.psi[c] - eps * mu[static_cast<Eigen::Index>(c)]);
    const Eigen::VectorXd x = lu.solve(rhs);
    if (lu.info() != Eigen::Success || !x.allFinite()) throw std::runtime_error("solve_div: singular saddle system");
    mu = x.tail(static_cast<Eigen::Index>(nc));
    for (std::size_t i = 0; i < index.size(); ++i)
      if (index[i] >= 0)
        for (int d = 0; d < n; ++d) out.v.values[i][d] = x[index[i] * n + d];
    const std::vector<double> div = divergence(mesh, out.v);
    std::vector<double> step(nc), res(nc);
    for (std::size_t c = 0; c < nc; ++c) {
      step[c] = div[c] - div_prev[c];
      res[c] = prob.psi[c] - div[c];
    }
    div_prev = div;
    out.iterations = it;
    out.residual = l2_norm(mesh, step) / psi_norm;
    out.spurious = l2_norm(mesh, res) / psi_norm;
    if (it > 1 && out.residual <= 1e-13) break;
  }
  const double p = n / (n - 1.0);
  out.ratio = w1p_norm(mesh, out.v, p) / lp_cells(mesh, prob.psi, p);
  return out;
}

}  // namespace hencky
