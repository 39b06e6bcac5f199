#include "hencky/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <random>
#include <stdexcept>

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/Sparse>

#include "hencky/material.hpp"
#include "hencky/parallel.hpp"

namespace hencky {

BcMode parse_bc_mode(const std::string& s) {
  if (s == "hard") return BcMode::Hard;
  if (s == "relaxed") return BcMode::Relaxed;
  throw std::invalid_argument("unknown boundary mode '" + s + "' (expected hard or relaxed)");
}

std::string to_string(BcMode m) { return m == BcMode::Hard ? "hard" : "relaxed"; }

void SolveConfig::check() const {
  if (!(tol > 0.0)) throw std::invalid_argument("SolveConfig: tolerance must be positive");
  if (!(safety > 0.0 && safety < 1.0)) throw std::invalid_argument("SolveConfig: safety factor must lie in (0, 1)");
  if (max_iter < 1) throw std::invalid_argument("SolveConfig: max_iter must be positive");
  if (power_iters < 1) throw std::invalid_argument("SolveConfig: power_iters must be positive");
  if (!(balance > 0.0)) throw std::invalid_argument("SolveConfig: balance must be positive");
  if (check_every < 1) throw std::invalid_argument("SolveConfig: check_every must be positive");
}

nlohmann::json to_json(const SolveReport& r) {
  nlohmann::json j;
  j["energy"] = to_json(r.energy);
  j["iterations"] = r.iterations;
  j["lower_bound"] = r.lower_bound;
  j["gap_history"] = r.gap_history;
  j["final_gap"] = r.gap_history.empty() ? nlohmann::json(nullptr) : nlohmann::json(r.gap_history.back());
  j["dual_residual"] = r.dual_residual;
  j["opnorm"] = r.opnorm;
  j["converged"] = r.converged;
  return j;
}

void write_trace_csv(std::ostream& os, const SolveReport& r) {
  os << "iter,energy,gap,dual_residual\n";
  os.precision(17);
  for (const auto& t : r.trace) os << t.iter << ',' << t.energy << ',' << t.gap << ',' << t.dual_residual << '\n';
}

namespace {

using Dofs = std::vector<double>;

double dot(const Dofs& a, const Dofs& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

SymTensor cell_strain(const Mesh& m, std::size_t c, const std::vector<Vec>& u) {
  const int n = m.dim();
  Eigen::Matrix3d g = Eigen::Matrix3d::Zero();
  for (int a = 0; a <= n; ++a) {
    const Vec& ua = u[static_cast<std::size_t>(m.cell(c)[static_cast<std::size_t>(a)])];
    const Vec& ga = m.grad(c, a);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) g(i, j) += ua[i] * ga[j];
  }
  SymTensor e(n);
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) e.set(i, j, 0.5 * (g(i, j) + g(j, i)));
  return e;
}

Vec facet_mean(const BoundaryFacet& f, int n, const std::vector<Vec>& u) {
  Vec r = Vec::zero(n);
  for (int a = 0; a < n; ++a) r += u[static_cast<std::size_t>(f.v[static_cast<std::size_t>(a)])];
  return (1.0 / n) * r;
}

SymTensor facet_amp(const BoundaryFacet& f, int n, const std::vector<Vec>& u) {
  return sym_outer(facet_mean(f, n, u), f.normal).deviator();
}

// Constrained displacement space u = base + B z with per-vertex orthonormal B.
class Space {
 public:
  Space(const Scenario& s, BcMode mode, bool constrained = true) : mesh_(*s.mesh), n_(mesh_.dim()) {
    const std::size_t nv = mesh_.num_vertices();
    const Displacement w = s.w();
    base_ = Displacement::zero(mesh_);
    std::vector<std::vector<Vec>> normals(nv);
    auto g0 = mesh_.gamma0_vertices();
    if (!constrained) g0.assign(nv, false);
    if (mode == BcMode::Relaxed && constrained) {
      for (const auto& f : mesh_.facets())
        if (f.gamma0)
          for (int a = 0; a < n_; ++a) {
            auto& list = normals[static_cast<std::size_t>(f.v[static_cast<std::size_t>(a)])];
            Vec v = f.normal;
            for (const Vec& q : list) v -= v.dot(q) * q;
            if (v.norm() > 1e-8 && static_cast<int>(list.size()) < n_) list.push_back((1.0 / v.norm()) * v);
          }
    }
    offset_.assign(nv + 1, 0);
    for (std::size_t i = 0; i < nv; ++i) {
      if (mode == BcMode::Hard && g0[i]) {
        base_.values[i] = w.values[i];
        offset_[i + 1] = offset_[i];
        continue;
      }
      std::vector<Vec> span = normals[i];
      for (const Vec& q : span) base_.values[i] += w.values[i].dot(q) * q;
      for (int k = 0; k < n_ && static_cast<int>(span.size()) < n_; ++k) {
        Vec e = Vec::zero(n_);
        e[k] = 1.0;
        for (const Vec& q : span) e -= e.dot(q) * q;
        if (e.norm() > 1e-6) {
          e *= 1.0 / e.norm();
          span.push_back(e);
          basis_.push_back(e);
          vertex_.push_back(i);
        }
      }
      offset_[i + 1] = basis_.size();
    }
    const auto mass = mesh_.lumped_mass();
    mass_.resize(basis_.size());
    for (std::size_t d = 0; d < basis_.size(); ++d) mass_[d] = mass[vertex_[d]];
  }

  std::size_t size() const { return basis_.size(); }
  const Displacement& base() const { return base_; }
  const Dofs& mass() const { return mass_; }
  std::size_t first(std::size_t vertex) const { return offset_[vertex]; }
  const Vec& direction(std::size_t k) const { return basis_[k]; }

  std::vector<Vec> lift(const Dofs& z) const {
    std::vector<Vec> u(mesh_.num_vertices(), Vec::zero(n_));
    for (std::size_t d = 0; d < z.size(); ++d) u[vertex_[d]] += z[d] * basis_[d];
    return u;
  }

  Displacement full(const Dofs& z) const {
    Displacement u = base_;
    const auto d = lift(z);
    for (std::size_t i = 0; i < d.size(); ++i) u.values[i] += d[i];
    return u;
  }

  Dofs restrict_(const std::vector<Vec>& r) const {
    Dofs z(basis_.size());
    for (std::size_t d = 0; d < z.size(); ++d) z[d] = r[vertex_[d]].dot(basis_[d]);
    return z;
  }

 private:
  const Mesh& mesh_;
  int n_;
  Displacement base_;
  std::vector<std::size_t> offset_;
  std::vector<Vec> basis_;
  std::vector<std::size_t> vertex_;
  Dofs mass_;
};

// Linear operator z -> (E B z, -P B z) and its transpose (unweighted in z, weighted by measures in the duals).
class Operator {
 public:
  Operator(const Mesh& mesh, const Space& space, std::vector<std::size_t> facets)
      : mesh_(mesh), space_(space), facets_(std::move(facets)), n_(mesh.dim()) {}

  const std::vector<std::size_t>& facets() const { return facets_; }

  void apply(const Dofs& z, std::vector<SymTensor>& cells, std::vector<SymTensor>& fac) const {
    const auto u = space_.lift(z);
    cells.resize(mesh_.num_cells());
    parallel_for(mesh_.num_cells(), [&](std::size_t c) { cells[c] = cell_strain(mesh_, c, u); });
    fac.resize(facets_.size());
    for (std::size_t k = 0; k < facets_.size(); ++k) fac[k] = -facet_amp(mesh_.facets()[facets_[k]], n_, u);
  }

  // B^T (E^T V sigma - P^T A tau)
  Dofs adjoint(const std::vector<SymTensor>& sigma, const std::vector<SymTensor>& tau) const {
    std::vector<Vec> r(mesh_.num_vertices(), Vec::zero(n_));
    for (std::size_t c = 0; c < mesh_.num_cells(); ++c) {
      const double v = mesh_.volume(c);
      for (int a = 0; a <= n_; ++a)
        r[static_cast<std::size_t>(mesh_.cell(c)[static_cast<std::size_t>(a)])] += v * sigma[c].apply(mesh_.grad(c, a));
    }
    for (std::size_t k = 0; k < facets_.size(); ++k) {
      const auto& f = mesh_.facets()[facets_[k]];
      const Vec t = (f.measure / n_) * tau[k].deviator().apply(f.normal);
      for (int a = 0; a < n_; ++a) r[static_cast<std::size_t>(f.v[static_cast<std::size_t>(a)])] -= t;
    }
    return space_.restrict_(r);
  }

  // Power iteration on T^1/2 K^T D K T^1/2, with D the dual scaling per cell and facet.
  // Empty scalings mean the lumped mass metric and unit dual weights.
  double norm(int iterations, Dofs x, const Dofs& tp = {}, const Dofs& sc = {}, const Dofs& sf = {}) const {
    if (x.empty()) return 0.0;
    const Dofs& m = space_.mass();
    Dofs root(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) root[i] = std::sqrt(tp.empty() ? 1.0 / m[i] : tp[i]);
    double lambda = 0.0;
    std::vector<SymTensor> ce, fe;
    for (int it = 0; it < iterations; ++it) {
      const double nx = std::sqrt(dot(x, x));
      if (nx == 0.0) return 0.0;
      Dofs y(x.size());
      for (std::size_t i = 0; i < x.size(); ++i) y[i] = root[i] * x[i] / nx;
      apply(y, ce, fe);
      if (!sc.empty())
        for (std::size_t c = 0; c < ce.size(); ++c) ce[c] *= sc[c];
      if (!sf.empty())
        for (std::size_t k = 0; k < fe.size(); ++k) fe[k] *= sf[k];
      Dofs g = adjoint(ce, fe);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] *= root[i];
      lambda = dot(x, g) / nx;
      x = std::move(g);
    }
    return std::sqrt(std::max(lambda, 0.0));
  }

 private:
  const Mesh& mesh_;
  const Space& space_;
  std::vector<std::size_t> facets_;
  int n_;
};

Dofs seeded(std::size_t size) {
  std::mt19937_64 rng(0x5eedULL);
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  Dofs x(size);
  for (double& v : x) v = d(rng);
  return x;
}

class PrimalDual {
 public:
  PrimalDual(const Scenario& s, const SolveConfig& cfg)
      : s_(s),
        mesh_(*s.mesh),
        n_(mesh_.dim()),
        cfg_(cfg),
        f_(s.density()),
        space_(s, cfg.mode),
        op_(mesh_, space_, gamma0_facets(mesh_, cfg.mode)),
        w_(s.w()) {
    const auto& base = space_.base().values;
    b_cell_.resize(mesh_.num_cells());
    for (std::size_t c = 0; c < mesh_.num_cells(); ++c) b_cell_[c] = cell_strain(mesh_, c, base);
    std::vector<Vec> diff(w_.values.size());
    for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = w_.values[i] - base[i];
    for (std::size_t k : op_.facets()) c_fac_.push_back(facet_amp(mesh_.facets()[k], n_, diff));
    normal_ = assemble_normal_matrix();
    cg_.setTolerance(1e-12);
    cg_.setMaxIterations(20000);
    cg_.compute(normal_);
  }

  SolveResult run(const Displacement& u0) {
    Dofs z = initial(u0);
    SolveReport rep;
    std::vector<SymTensor> sigma(mesh_.num_cells(), SymTensor(n_)), tau(c_fac_.size(), SymTensor(n_));
    rep.opnorm = 1.05 * op_.norm(cfg_.power_iters, seeded(z.size()));
    Preconditioner pc = preconditioner();
    const double lp = 1.05 * op_.norm(cfg_.power_iters, seeded(z.size()), pc.t, pc.s_cell, pc.s_facet);
    Dofs best = z;
    double best_primal = primal(z), best_dual = -std::numeric_limits<double>::infinity();
    Dofs lambda(z.size(), 0.0);
    auto check = [&](long it) {
      const double j = primal(z);
      if (j < best_primal) {
        best_primal = j;
        best = z;
      }
      best_dual = std::max(best_dual, dual_bound(sigma, tau, lambda));
      const double gap = std::max(0.0, best_primal - best_dual) / (1.0 + std::abs(best_primal));
      rep.gap_history.push_back(gap);
      rep.dual_residual = dual_residual(sigma, tau);
      rep.trace.push_back({it, best_primal, gap, rep.dual_residual});
      return gap <= cfg_.tol;
    };

    if (z.empty() || rep.opnorm == 0.0) {
      // nothing to optimize: the admissible set is a single point
      check(0);
      rep.converged = true;
    } else {
      // diagonal steps scaled so that |S^1/2 K T^1/2| <= safety; the balance shifts weight between them
      const double c0 = cfg_.safety / lp;
      double bal = cfg_.balance, alpha = 0.5, pres_sum = 0.0, dres_sum = 0.0;
      std::vector<SymTensor> kc, kfac, kc_prev, kfac_prev;
      op_.apply(z, kc, kfac);
      kc_prev = kc;
      kfac_prev = kfac;
      long it = 0;
      while (it < cfg_.max_iter) {
        const double tf = c0 / bal, sf = c0 * bal;
        const std::vector<SymTensor> sigma_old = sigma, tau_old = tau;
        parallel_for(sigma.size(), [&](std::size_t c) {
          const double sc = sf * pc.s_cell[c];
          sigma[c] = dual_prox(sigma[c] + sc * (b_cell_[c] + 2.0 * kc[c] - kc_prev[c]), sc);
        });
        for (std::size_t k = 0; k < tau.size(); ++k)
          tau[k] = s_.yield.project(tau[k] + (sf * pc.s_facet[k]) * (c_fac_[k] + 2.0 * kfac[k] - kfac_prev[k]));
        // residuals of the step just taken, in the metrics of the steps
        double dres = 0.0, pres = 0.0;
        for (std::size_t c = 0; c < sigma.size(); ++c) {
          const double sc = sf * pc.s_cell[c];
          const SymTensor r = (1.0 / sc) * (sigma_old[c] - sigma[c]) - (kc_prev[c] - kc[c]);
          dres += sc * mesh_.volume(c) * r.ddot(r);
        }
        for (std::size_t k = 0; k < tau.size(); ++k) {
          const double sk = sf * pc.s_facet[k], a = mesh_.facets()[op_.facets()[k]].measure;
          const SymTensor r = (1.0 / sk) * (tau_old[k] - tau[k]) - (kfac_prev[k] - kfac[k]);
          dres += sk * a * r.ddot(r);
        }
        const Dofs g = op_.adjoint(sigma, tau);
        Dofs znew(z.size());
        for (std::size_t i = 0; i < z.size(); ++i) {
          const double ti = tf * pc.t[i];
          znew[i] = z[i] - ti * g[i];
          pres += ti * g[i] * g[i];
        }
        kc_prev = std::move(kc);
        kfac_prev = std::move(kfac);
        op_.apply(znew, kc, kfac);
        pres_sum += std::sqrt(pres);
        dres_sum += std::sqrt(dres);
        if ((it + 1) % cfg_.check_every == 0) {
          if (pres_sum > 1.5 * dres_sum && bal > 1e-2 * cfg_.balance) {
            bal *= 1.0 - alpha;
            alpha *= 0.95;
          } else if (dres_sum > 1.5 * pres_sum && bal < 1e2 * cfg_.balance) {
            bal /= 1.0 - alpha;
            alpha *= 0.95;
          }
          pres_sum = dres_sum = 0.0;
        }
        z = std::move(znew);
        ++it;
        if (it % cfg_.check_every == 0 && check(it)) {
          rep.converged = true;
          break;
        }
      }
      if (!rep.converged && it % cfg_.check_every != 0) rep.converged = check(it);
      rep.iterations = it;
    }
    rep.lower_bound = best_dual;

    SolveResult out;
    out.u = space_.full(best);
    if (cfg_.mode == BcMode::Hard) {
      out.triplet = split_triplet(s_, out.u, true);
      rep.energy = eval_F(s_, out.triplet);
    } else {
      ReducedEvaluation r = eval_G_reduced(s_, out.u);
      out.triplet = std::move(r.triplet);
      rep.energy = r.energy;
    }
    out.report = std::move(rep);
    return out;
  }

 private:
  static std::vector<std::size_t> gamma0_facets(const Mesh& m, BcMode mode) {
    std::vector<std::size_t> out;
    if (mode == BcMode::Relaxed)
      for (std::size_t k = 0; k < m.facets().size(); ++k)
        if (m.facets()[k].gamma0) out.push_back(k);
    return out;
  }

  struct Preconditioner {
    Dofs t;              // per primal dof
    Dofs s_cell, s_facet;  // dual steps in the measure-weighted variables
  };

  // Row and column sums of |K| in isometric coordinates.
  Preconditioner preconditioner() const {
    Preconditioner pc;
    Dofs col(space_.size(), 0.0);
    pc.s_cell.assign(mesh_.num_cells(), 0.0);
    pc.s_facet.assign(op_.facets().size(), 0.0);
    auto block = [&](const std::vector<std::size_t>& dofs, const std::vector<Eigen::VectorXd>& rows, double w) {
      if (dofs.empty()) return 0.0;
      Eigen::VectorXd row_sum = Eigen::VectorXd::Zero(rows[0].size());
      for (std::size_t p = 0; p < dofs.size(); ++p) {
        const Eigen::VectorXd e = w * rows[p].cwiseAbs();
        row_sum += e;
        col[dofs[p]] += e.sum();
      }
      return row_sum.maxCoeff();
    };
    std::vector<std::size_t> dofs;
    std::vector<Eigen::VectorXd> rows;
    for (std::size_t c = 0; c < mesh_.num_cells(); ++c) {
      dofs.clear();
      rows.clear();
      for (int a = 0; a <= n_; ++a) {
        const auto i = static_cast<std::size_t>(mesh_.cell(c)[static_cast<std::size_t>(a)]);
        for (std::size_t k = space_.first(i); k < space_.first(i + 1); ++k) {
          dofs.push_back(k);
          rows.push_back(to_isometric(sym_outer(space_.direction(k), mesh_.grad(c, a))));
        }
      }
      const double r = block(dofs, rows, 1.0);
      pc.s_cell[c] = r > 0.0 ? 1.0 / (r * mesh_.volume(c)) : 1.0 / mesh_.volume(c);
    }
    for (std::size_t f = 0; f < op_.facets().size(); ++f) {
      const auto& fc = mesh_.facets()[op_.facets()[f]];
      dofs.clear();
      rows.clear();
      for (int a = 0; a < n_; ++a) {
        const auto i = static_cast<std::size_t>(fc.v[static_cast<std::size_t>(a)]);
        for (std::size_t k = space_.first(i); k < space_.first(i + 1); ++k) {
          dofs.push_back(k);
          rows.push_back(to_isometric(sym_outer((1.0 / n_) * space_.direction(k), fc.normal).deviator()));
        }
      }
      const double r = block(dofs, rows, 1.0);
      pc.s_facet[f] = r > 0.0 ? 1.0 / (r * fc.measure) : 1.0 / fc.measure;
    }
    pc.t.resize(col.size());
    for (std::size_t d = 0; d < col.size(); ++d) pc.t[d] = col[d] > 0.0 ? 1.0 / col[d] : 1.0;
    return pc;
  }

  // prox of s f* with f* = Q* + indicator of K on the deviator
  SymTensor dual_prox(const SymTensor& x, double s) const {
    const ElasticModuli& q = s_.moduli;
    if (q.is_isotropic()) {
      const double mu = q.mu(), nk = n_ * q.kappa();
      SymTensor d = s_.yield.project(x.deviator() * (2.0 * mu / (2.0 * mu + s)));
      const double tr = x.trace() * nk / (nk + s);
      return d + (tr / n_) * SymTensor::identity(n_);
    }
    return x - s * f_.prox((1.0 / s) * x, 1.0 / s);
  }

  double primal(const Dofs& z) const {
    const auto u = space_.full(z).values;
    double j = 0.0;
    for (std::size_t c = 0; c < mesh_.num_cells(); ++c) j += mesh_.volume(c) * f_.value(cell_strain(mesh_, c, u));
    std::vector<Vec> diff(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) diff[i] = w_.values[i] - u[i];
    for (std::size_t k : op_.facets()) {
      const auto& f = mesh_.facets()[k];
      j += f.measure * s_.yield.support(facet_amp(f, n_, diff));
    }
    return j;
  }

  // Lower bound from the duals made equilibrated and then scaled into the domain of f*.
  double dual_bound(const std::vector<SymTensor>& sigma, const std::vector<SymTensor>& tau, Dofs& lambda) {
    std::vector<SymTensor> se = sigma, te = tau;
    if (!lambda.empty()) {
      const Dofs g = op_.adjoint(sigma, tau);
      const Eigen::Map<const Eigen::VectorXd> rhs(g.data(), static_cast<Eigen::Index>(g.size()));
      Eigen::Map<Eigen::VectorXd> x(lambda.data(), static_cast<Eigen::Index>(lambda.size()));
      x = cg_.solveWithGuess(rhs, Eigen::VectorXd(x));
      std::vector<SymTensor> ke, kf;
      op_.apply(lambda, ke, kf);
      for (std::size_t c = 0; c < se.size(); ++c) se[c] -= ke[c];
      for (std::size_t k = 0; k < te.size(); ++k) te[k] -= kf[k];
    }
    double lin = 0.0, quad = 0.0, gauge = 0.0;
    for (std::size_t c = 0; c < se.size(); ++c) {
      const double v = mesh_.volume(c);
      lin += v * se[c].ddot(b_cell_[c]);
      quad += v * s_.moduli.conjugate(se[c]);
      gauge = std::max(gauge, s_.yield.gauge(se[c].deviator()));
    }
    for (std::size_t k = 0; k < te.size(); ++k) {
      const double a = mesh_.facets()[op_.facets()[k]].measure;
      te[k] = te[k].deviator();
      lin += a * te[k].ddot(c_fac_[k]);
      gauge = std::max(gauge, s_.yield.gauge(te[k]));
    }
    const double theta_max = gauge > 0.0 ? 1.0 / gauge : std::numeric_limits<double>::infinity();
    double theta = 0.0;
    if (quad > 0.0)
      theta = std::clamp(lin / (2.0 * quad), 0.0, theta_max);
    else if (lin > 0.0 && std::isfinite(theta_max))
      theta = theta_max;
    return theta * lin - theta * theta * quad;
  }

  double dual_residual(const std::vector<SymTensor>& sigma, const std::vector<SymTensor>& tau) const {
    double r = 0.0;
    for (const auto& x : sigma) {
      const SymTensor d = x.deviator();
      r = std::max(r, (d - s_.yield.project(d)).norm());
    }
    for (const auto& x : tau) {
      const SymTensor d = x.deviator();
      r = std::max(r, (d - s_.yield.project(d)).norm());
    }
    return r;
  }

  // K^T W K as a sparse matrix in the free dofs
  Eigen::SparseMatrix<double> assemble_normal_matrix() const {
    std::vector<Eigen::Triplet<double>> trip;
    std::vector<std::size_t> dofs;
    std::vector<Eigen::VectorXd> rows;
    auto add = [&](double weight) {
      for (std::size_t p = 0; p < dofs.size(); ++p)
        for (std::size_t q = 0; q < dofs.size(); ++q)
          trip.emplace_back(static_cast<int>(dofs[p]), static_cast<int>(dofs[q]), weight * rows[p].dot(rows[q]));
    };
    for (std::size_t c = 0; c < mesh_.num_cells(); ++c) {
      dofs.clear();
      rows.clear();
      for (int a = 0; a <= n_; ++a) {
        const auto i = static_cast<std::size_t>(mesh_.cell(c)[static_cast<std::size_t>(a)]);
        for (std::size_t k = space_.first(i); k < space_.first(i + 1); ++k) {
          dofs.push_back(k);
          rows.push_back(to_isometric(sym_outer(space_.direction(k), mesh_.grad(c, a))));
        }
      }
      add(mesh_.volume(c));
    }
    for (std::size_t f : op_.facets()) {
      const auto& fc = mesh_.facets()[f];
      dofs.clear();
      rows.clear();
      for (int a = 0; a < n_; ++a) {
        const auto i = static_cast<std::size_t>(fc.v[static_cast<std::size_t>(a)]);
        for (std::size_t k = space_.first(i); k < space_.first(i + 1); ++k) {
          dofs.push_back(k);
          rows.push_back(to_isometric(sym_outer((1.0 / n_) * space_.direction(k), fc.normal).deviator()));
        }
      }
      add(fc.measure);
    }
    const auto sz = static_cast<Eigen::Index>(space_.size());
    Eigen::SparseMatrix<double> a(sz, sz);
    a.setFromTriplets(trip.begin(), trip.end());
    return a;
  }

  Dofs initial(const Displacement& u0) const {
    if (u0.values.size() != mesh_.num_vertices()) throw std::invalid_argument("solve: u0 has the wrong size");
    std::vector<Vec> d(u0.values.size());
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = u0.values[i] - space_.base().values[i];
    const Dofs z = space_.restrict_(d);
    const Displacement back = space_.full(z);
    for (std::size_t i = 0; i < d.size(); ++i)
      if ((back.values[i] - u0.values[i]).norm() > 1e-9 * std::max(1.0, u0.values[i].norm()))
        throw std::invalid_argument("solve: u0 violates the boundary constraints of the mode");
    return z;
  }

  const Scenario& s_;
  const Mesh& mesh_;
  int n_;
  SolveConfig cfg_;
  ReducedDensity f_;
  Space space_;
  Operator op_;
  Displacement w_;
  std::vector<SymTensor> b_cell_, c_fac_;
  Eigen::SparseMatrix<double> normal_;
  Eigen::ConjugateGradient<Eigen::SparseMatrix<double>, Eigen::Lower | Eigen::Upper, Eigen::DiagonalPreconditioner<double>> cg_;
};

}  // namespace

SolveResult solve(const Scenario& s, const SolveConfig& cfg, const Displacement& u0) {
  s.check();
  cfg.check();
  return PrimalDual(s, cfg).run(u0);
}

double estimate_opnorm(const Mesh& mesh, int iterations, const Displacement* start) {
  Scenario s;
  s.mesh = std::shared_ptr<const Mesh>(&mesh, [](const Mesh*) {});
  s.datum = Datum::zero(mesh.dim());
  // no Gamma0 constraints and no boundary term: the bare symmetric gradient
  Space space(s, BcMode::Relaxed, false);
  Operator op(mesh, space, {});
  Dofs x;
  if (start) {
    if (start->values.size() != mesh.num_vertices()) throw std::invalid_argument("estimate_opnorm: wrong start size");
    x = space.restrict_(start->values);
  }
  if (x.empty() || dot(x, x) == 0.0) x = seeded(space.size());
  return op.norm(iterations, x);
}

Displacement admissible_start(const Scenario& s, BcMode mode) {
  s.check();
  return Space(s, mode).base();
}

}  // namespace hencky
