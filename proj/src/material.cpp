#include "hencky/material.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace hencky {

namespace {

constexpr double kSqrt2 = 1.4142135623730951;

int sym_size(int n) { return SymTensor::size_for(n); }

// Columns are the isometric coordinates of the deviatoric basis tensors.
Eigen::MatrixXd deviatoric_embedding(int n) {
  const int dd = deviatoric_dim(n);
  Eigen::MatrixXd p(sym_size(n), dd);
  for (int k = 0; k < dd; ++k) p.col(k) = to_isometric(deviatoric_basis(n, k));
  return p;
}

double max_eigenvalue(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
  return es.eigenvalues().maxCoeff();
}

// prox of t * H in deviatoric coordinates, via Moreau: w - t P_K(w / t).
Eigen::VectorXd prox_support(const YieldSet& k, int n, const Eigen::VectorXd& w, double t) {
  const SymTensor s = from_deviatoric_coords(n, w) * (1.0 / t);
  return w - t * to_deviatoric_coords(k.project(s));
}

}  // namespace

Eigen::VectorXd to_isometric(const SymTensor& xi) {
  Eigen::VectorXd y(xi.size());
  for (int k = 0; k < xi.size(); ++k) y[k] = xi.off_diagonal(k) ? kSqrt2 * xi.component(k) : xi.component(k);
  return y;
}

SymTensor from_isometric(int dim, const Eigen::VectorXd& y) {
  SymTensor t(dim);
  for (int k = 0; k < t.size(); ++k) t.component(k) = t.off_diagonal(k) ? y[k] / kSqrt2 : y[k];
  return t;
}

Eigen::VectorXd to_deviatoric_coords(const SymTensor& xi) {
  const int dd = deviatoric_dim(xi.dim());
  Eigen::VectorXd z(dd);
  for (int k = 0; k < dd; ++k) z[k] = xi.ddot(deviatoric_basis(xi.dim(), k));
  return z;
}

SymTensor from_deviatoric_coords(int dim, const Eigen::VectorXd& z) {
  SymTensor t(dim);
  for (int k = 0; k < deviatoric_dim(dim); ++k) t += z[k] * deviatoric_basis(dim, k);
  return t;
}

// ---------------------------------------------------------------- moduli

ElasticModuli ElasticModuli::isotropic(double mu, double kappa) {
  if (!(mu > 0.0) || !(kappa > 0.0)) throw std::invalid_argument("ElasticModuli: mu and kappa must be positive");
  ElasticModuli m;
  m.mu_ = mu;
  m.kappa_ = kappa;
  return m;
}

ElasticModuli ElasticModuli::general(int dim, Eigen::MatrixXd matrix) {
  const int s = sym_size(dim);
  if (matrix.rows() != s || matrix.cols() != s)
    throw std::invalid_argument("ElasticModuli: matrix size does not match dimension");
  if ((matrix - matrix.transpose()).norm() > 1e-12 * matrix.norm())
    throw std::invalid_argument("ElasticModuli: matrix must be symmetric");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(matrix, Eigen::EigenvaluesOnly);
  if (es.eigenvalues().minCoeff() <= 0.0) throw std::invalid_argument("ElasticModuli: matrix must be positive definite");
  ElasticModuli m;
  m.isotropic_ = false;
  m.dim_ = dim;
  m.matrix_ = std::move(matrix);
  return m;
}

Eigen::MatrixXd ElasticModuli::isotropic_matrix(int dim, double mu, double kappa) {
  const int s = sym_size(dim);
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(s, s);
  for (int k = 0; k < s; ++k) m(k, k) = k < dim ? mu : 2.0 * mu;
  const double vol = 0.5 * kappa - mu / dim;
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j) m(i, j) += vol;
  return m;
}

double ElasticModuli::energy(const SymTensor& e) const {
  if (isotropic_) {
    const double tr = e.trace();
    const SymTensor d = e.deviator();
    return mu_ * d.ddot(d) + 0.5 * kappa_ * tr * tr;
  }
  if (e.dim() != dim_) throw std::invalid_argument("ElasticModuli: dimension mismatch");
  Eigen::VectorXd c(e.size());
  for (int k = 0; k < e.size(); ++k) c[k] = e.component(k);
  return c.dot(matrix_ * c);
}

SymTensor ElasticModuli::stress(const SymTensor& e) const {
  if (isotropic_) return 2.0 * mu_ * e.deviator() + kappa_ * e.trace() * SymTensor::identity(e.dim());
  if (e.dim() != dim_) throw std::invalid_argument("ElasticModuli: dimension mismatch");
  Eigen::VectorXd c(e.size());
  for (int k = 0; k < e.size(); ++k) c[k] = e.component(k);
  const Eigen::VectorXd mc = matrix_ * c;
  SymTensor g(e.dim());
  for (int k = 0; k < e.size(); ++k) g.component(k) = e.off_diagonal(k) ? mc[k] : 2.0 * mc[k];
  return g;
}

double ElasticModuli::conjugate(const SymTensor& sigma) const {
  if (isotropic_) {
    const double tr = sigma.trace();
    const SymTensor d = sigma.deviator();
    const double n = sigma.dim();
    return d.ddot(d) / (4.0 * mu_) + tr * tr / (2.0 * n * n * kappa_);
  }
  if (sigma.dim() != dim_) throw std::invalid_argument("ElasticModuli: dimension mismatch");
  const Eigen::VectorXd y = to_isometric(sigma);
  return 0.25 * y.dot(isometric_matrix(dim_).ldlt().solve(y));
}

Eigen::MatrixXd ElasticModuli::isometric_matrix(int dim) const {
  const Eigen::MatrixXd m = isotropic_ ? isotropic_matrix(dim, mu_, kappa_) : matrix_;
  Eigen::VectorXd sinv(sym_size(dim));
  for (int k = 0; k < sym_size(dim); ++k) sinv[k] = k < dim ? 1.0 : 1.0 / kSqrt2;
  return sinv.asDiagonal() * m * sinv.asDiagonal();
}

// ---------------------------------------------------------------- yield set

void require_deviatoric(const SymTensor& xi, const char* where) {
  if (std::abs(xi.trace()) > 1e-10 * xi.norm())
    throw std::invalid_argument(std::string(where) + ": argument is not trace-free");
}

YieldSet YieldSet::ball(double radius) {
  if (!(radius > 0.0)) throw std::invalid_argument("YieldSet::ball: radius must be positive");
  YieldSet k;
  k.shape_ = BallYield{radius};
  k.r_ = k.R_ = radius;
  return k;
}

YieldSet YieldSet::polytope(std::vector<SymTensor> vertices) {
  if (vertices.empty()) throw std::invalid_argument("YieldSet::polytope: no vertices");
  YieldSet k;
  k.dim_ = vertices.front().dim();
  for (const auto& v : vertices) {
    if (v.dim() != k.dim_) throw std::invalid_argument("YieldSet::polytope: mixed dimensions");
    if (std::abs(v.trace()) > 1e-12 * std::max(1.0, v.norm()))
      throw std::invalid_argument("YieldSet::polytope: vertex is not trace-free");
  }
  k.shape_ = PolytopeYield{std::move(vertices)};
  k.prepare_polytope();
  return k;
}

double YieldSet::ball_radius() const {
  if (!is_ball()) throw std::logic_error("YieldSet: not a ball");
  return std::get<BallYield>(shape_).radius;
}

void YieldSet::prepare_polytope() {
  const auto& verts = std::get<PolytopeYield>(shape_).vertices;
  coords_.clear();
  R_ = 0.0;
  for (const auto& v : verts) {
    coords_.push_back(to_deviatoric_coords(v.deviator()));
    R_ = std::max(R_, coords_.back().norm());
  }
  if (R_ == 0.0) throw std::invalid_argument("YieldSet::polytope: set reduces to {0}");
  const double tol = 1e-12 * R_;

  if (dim_ == 2) {
    // Planar hull in deviatoric coordinates.
    Eigen::Vector2d far = coords_.front();
    for (const auto& c : coords_)
      if (c.norm() > far.norm()) far = c;
    const Eigen::Vector2d dir = far.normalized();
    const Eigen::Vector2d perp(-dir.y(), dir.x());
    bool collinear = true;
    for (const auto& c : coords_)
      if (std::abs(perp.dot(c)) > tol) collinear = false;

    halfspaces_.clear();
    if (collinear) {
      double cmin = std::numeric_limits<double>::infinity(), cmax = -cmin;
      for (const auto& c : coords_) {
        cmin = std::min(cmin, dir.dot(c));
        cmax = std::max(cmax, dir.dot(c));
      }
      if (cmin > tol || cmax < -tol) throw std::invalid_argument("YieldSet::polytope: 0 is not in K");
      halfspaces_.push_back({perp, 0.0, true});
      halfspaces_.push_back({dir, cmax, false});
      halfspaces_.push_back({-dir, -cmin, false});
      r_ = 0.0;
      bounds_exact_ = true;
      return;
    }

    std::vector<Eigen::Vector2d> pts;
    for (const auto& c : coords_) pts.emplace_back(c[0], c[1]);
    std::sort(pts.begin(), pts.end(), [](const auto& a, const auto& b) {
      return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
    });
    auto cross = [](const Eigen::Vector2d& o, const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
      return (a - o).x() * (b - o).y() - (a - o).y() * (b - o).x();
    };
    std::vector<Eigen::Vector2d> hull(2 * pts.size());
    std::size_t m = 0;
    for (const auto& p : pts) {
      while (m >= 2 && cross(hull[m - 2], hull[m - 1], p) <= tol * R_) --m;
      hull[m++] = p;
    }
    for (std::size_t i = pts.size() - 1, lower = m + 1; i-- > 0;) {
      const auto& p = pts[i];
      while (m >= lower && cross(hull[m - 2], hull[m - 1], p) <= tol * R_) --m;
      hull[m++] = p;
    }
    hull.resize(m - 1);  // counter-clockwise, last point repeats the first
    r_ = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < hull.size(); ++i) {
      const Eigen::Vector2d a = hull[i], b = hull[(i + 1) % hull.size()];
      Eigen::Vector2d nrm(b.y() - a.y(), a.x() - b.x());
      nrm.normalize();
      const double off = nrm.dot(a);
      if (off < -tol) throw std::invalid_argument("YieldSet::polytope: 0 is not in K");
      halfspaces_.push_back({nrm, std::max(off, 0.0), false});
      r_ = std::min(r_, std::max(off, 0.0));
    }
    bounds_exact_ = true;
    return;
  }

  // n = 3: membership of 0 through the min-norm point; r is sampled.
  if (project_min_norm(SymTensor(3)).norm() > tol)
    throw std::invalid_argument("YieldSet::polytope: 0 is not in K");
  std::mt19937_64 rng(12345);
  std::normal_distribution<double> g;
  r_ = std::numeric_limits<double>::infinity();
  for (int s = 0; s < 20000; ++s) {
    Eigen::VectorXd z(5);
    for (int i = 0; i < 5; ++i) z[i] = g(rng);
    z.normalize();
    double h = -std::numeric_limits<double>::infinity();
    for (const auto& c : coords_) h = std::max(h, c.dot(z));
    r_ = std::min(r_, std::max(h, 0.0));
  }
  bounds_exact_ = false;
}

double YieldSet::support(const SymTensor& xi) const {
  require_deviatoric(xi, "support");
  if (is_ball()) return ball_radius() * xi.norm();
  double h = -std::numeric_limits<double>::infinity();
  for (const auto& v : std::get<PolytopeYield>(shape_).vertices) h = std::max(h, v.ddot(xi));
  return std::max(h, 0.0);
}

SymTensor YieldSet::project(const SymTensor& sigma) const {
  const SymTensor s = sigma.deviator();
  if (is_ball()) {
    const double nrm = s.norm();
    const double rad = ball_radius();
    return nrm <= rad ? s : s * (rad / nrm);
  }
  if (s.dim() != dim_) throw std::invalid_argument("YieldSet::project: dimension mismatch");
  return dim_ == 2 ? project_dykstra(s) : project_min_norm(s);
}

SymTensor YieldSet::project_dykstra(const SymTensor& sigma) const {
  const Eigen::VectorXd y = to_deviatoric_coords(sigma);
  bool inside = true;
  for (const auto& h : halfspaces_) {
    const double v = h.normal.dot(y) - h.offset;
    if (h.equality ? std::abs(v) > 0.0 : v > 0.0) inside = false;
  }
  if (inside) return sigma;

  Eigen::VectorXd x = y;
  std::vector<Eigen::VectorXd> incr(halfspaces_.size(), Eigen::VectorXd::Zero(y.size()));
  const double tol = 1e-10 * std::max(1.0, y.norm());
  for (int sweep = 0; sweep < 10000; ++sweep) {
    const Eigen::VectorXd start = x;
    for (std::size_t i = 0; i < halfspaces_.size(); ++i) {
      const auto& h = halfspaces_[i];
      const Eigen::VectorXd t = x + incr[i];
      const double v = h.normal.dot(t) - h.offset;
      const Eigen::VectorXd px = (h.equality || v > 0.0) ? Eigen::VectorXd(t - v * h.normal) : t;
      incr[i] = t - px;
      x = px;
    }
    if ((x - start).norm() <= tol) break;
  }
  return from_deviatoric_coords(dim_, x);
}

// Wolfe's minimum-norm-point algorithm on the vertices shifted by -sigma.
SymTensor YieldSet::project_min_norm(const SymTensor& sigma) const {
  const Eigen::VectorXd y = to_deviatoric_coords(sigma);
  const std::size_t nv = coords_.size();
  std::vector<Eigen::VectorXd> p(nv);
  double scale = 0.0;
  for (std::size_t i = 0; i < nv; ++i) {
    p[i] = coords_[i] - y;
    scale = std::max(scale, p[i].squaredNorm());
  }
  const double tol = 1e-14 * std::max(scale, 1e-300);

  std::size_t first = 0;
  for (std::size_t i = 1; i < nv; ++i)
    if (p[i].squaredNorm() < p[first].squaredNorm()) first = i;
  std::vector<std::size_t> active{first};
  std::vector<double> lambda{1.0};
  Eigen::VectorXd x = p[first];

  for (int major = 0; major < 1000; ++major) {
    std::size_t j = 0;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < nv; ++i) {
      const double v = x.dot(p[i]);
      if (v < best) {
        best = v;
        j = i;
      }
    }
    if (best >= x.squaredNorm() - tol || std::find(active.begin(), active.end(), j) != active.end()) break;
    active.push_back(j);
    lambda.push_back(0.0);

    for (int minor = 0; minor < 1000; ++minor) {
      const std::size_t m = active.size();
      Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(m + 1, m + 1);
      Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m + 1);
      for (std::size_t a = 0; a < m; ++a) {
        for (std::size_t b = 0; b < m; ++b) kkt(a, b) = p[active[a]].dot(p[active[b]]);
        kkt(a, m) = kkt(m, a) = 1.0;
      }
      rhs[m] = 1.0;
      const Eigen::VectorXd sol = kkt.completeOrthogonalDecomposition().solve(rhs);
      bool positive = true;
      for (std::size_t a = 0; a < m; ++a)
        if (sol[a] <= 1e-15) positive = false;
      if (positive) {
        for (std::size_t a = 0; a < m; ++a) lambda[a] = sol[a];
        break;
      }
      double theta = 1.0;
      for (std::size_t a = 0; a < m; ++a)
        if (sol[a] <= 1e-15 && lambda[a] - sol[a] > 0.0) theta = std::min(theta, lambda[a] / (lambda[a] - sol[a]));
      for (std::size_t a = 0; a < m; ++a) lambda[a] += theta * (sol[a] - lambda[a]);
      std::vector<std::size_t> keep_idx;
      std::vector<double> keep_l;
      for (std::size_t a = 0; a < m; ++a)
        if (lambda[a] > 1e-15) {
          keep_idx.push_back(active[a]);
          keep_l.push_back(lambda[a]);
        }
      active = std::move(keep_idx);
      lambda = std::move(keep_l);
      double sum = 0.0;
      for (double l : lambda) sum += l;
      for (double& l : lambda) l /= sum;
    }
    Eigen::VectorXd nx = Eigen::VectorXd::Zero(y.size());
    for (std::size_t a = 0; a < active.size(); ++a) nx += lambda[a] * p[active[a]];
    if (nx.squaredNorm() >= x.squaredNorm() - tol && major > 0) {
      x = nx;
      break;
    }
    x = nx;
  }
  return from_deviatoric_coords(dim_, x + y);
}

double YieldSet::gauge(const SymTensor& sigma) const {
  const SymTensor s = sigma.deviator();
  const double nrm = s.norm();
  if (nrm == 0.0) return 0.0;
  if (is_ball()) return nrm / ball_radius();
  if (dim_ == 2 && r_ > 0.0) {
    const Eigen::VectorXd y = to_deviatoric_coords(s);
    double g = 0.0;
    for (const auto& h : halfspaces_) g = std::max(g, h.normal.dot(y) / h.offset);
    return g;
  }
  // Bisection on membership of sigma / t.
  auto member = [&](double t) {
    const SymTensor q = s * (1.0 / t);
    return (project(q) - q).norm() <= 1e-12 * std::max(1.0, q.norm());
  };
  double hi = 1.0;
  while (!member(hi)) {
    hi *= 2.0;
    if (hi > 1e12) return std::numeric_limits<double>::infinity();
  }
  double lo = 0.0;
  for (int it = 0; it < 60; ++it) {
    const double mid = 0.5 * (lo + hi);
    (member(mid) ? hi : lo) = mid;
  }
  return hi;
}

// ---------------------------------------------------------------- reduced density

ReducedDensity::ReducedDensity(ElasticModuli moduli, YieldSet yield)
    : moduli_(std::move(moduli)), yield_(std::move(yield)) {
  closed_form_ = moduli_.is_isotropic() && yield_.is_ball();
}

double ReducedDensity::value(const SymTensor& xi) const {
  if (closed_form_) {
    const double mu = moduli_.mu();
    const double sy = yield_.ball_radius();
    const double tr = xi.trace();
    const double s = xi.deviator().norm();
    const double dev = s <= sy / (2.0 * mu) ? mu * s * s : sy * s - sy * sy / (4.0 * mu);
    return 0.5 * moduli_.kappa() * tr * tr + dev;
  }
  const StrainSplit sp = split_numeric(xi);
  return moduli_.energy(sp.elastic) + yield_.support(sp.plastic);
}

StrainSplit ReducedDensity::split(const SymTensor& xi) const {
  if (!closed_form_) return split_numeric(xi);
  const double mu = moduli_.mu();
  const double sy = yield_.ball_radius();
  const SymTensor d = xi.deviator();
  const double s = d.norm();
  SymTensor p(xi.dim());
  if (s > sy / (2.0 * mu)) p = d * (1.0 - sy / (2.0 * mu * s));
  return {xi - p, p};
}

SymTensor ReducedDensity::prox(const SymTensor& xi, double tau) const {
  if (!(tau > 0.0)) throw std::invalid_argument("reduced_density_prox: tau must be positive");
  if (!closed_form_) return prox_numeric(xi, tau);
  const int n = xi.dim();
  const double mu = moduli_.mu();
  const double sy = yield_.ball_radius();
  const double t = xi.trace() / (1.0 + n * tau * moduli_.kappa());
  const SymTensor d = xi.deviator();
  const double s = d.norm();
  SymTensor out = (t / n) * SymTensor::identity(n);
  if (s > 0.0) {
    double rho = s / (1.0 + 2.0 * mu * tau);
    if (rho > sy / (2.0 * mu)) rho = s - tau * sy;
    out += d * (rho / s);
  }
  return out;
}

StrainSplit ReducedDensity::split_numeric(const SymTensor& xi) const {
  const int n = xi.dim();
  const Eigen::MatrixXd a = moduli_.isometric_matrix(n);
  const Eigen::MatrixXd emb = deviatoric_embedding(n);
  const double lip = 2.0 * max_eigenvalue(emb.transpose() * a * emb);
  const double step = 1.0 / lip;
  const double tol = 1e-12 * std::max(1.0, xi.norm());

  Eigen::VectorXd z = Eigen::VectorXd::Zero(deviatoric_dim(n));
  for (int it = 0; it < 1000000; ++it) {
    const SymTensor p = from_deviatoric_coords(n, z);
    const Eigen::VectorXd grad = -to_deviatoric_coords(moduli_.stress(xi - p));
    const Eigen::VectorXd nz = prox_support(yield_, n, z - step * grad, step);
    const double change = (nz - z).norm();
    z = nz;
    if (change <= tol) {
      const SymTensor pf = from_deviatoric_coords(n, z);
      return {xi - pf, pf};
    }
  }
  throw ConvergenceError("reduced_density: inner minimisation did not converge");
}

SymTensor ReducedDensity::prox_numeric(const SymTensor& xi, double tau) const {
  if (!(tau > 0.0)) throw std::invalid_argument("reduced_density_prox: tau must be positive");
  const int n = xi.dim();
  const int s = sym_size(n);
  const int dd = deviatoric_dim(n);
  const Eigen::MatrixXd a = moduli_.isometric_matrix(n);
  const Eigen::MatrixXd emb = deviatoric_embedding(n);

  Eigen::MatrixXd hess(s + dd, s + dd);
  hess.topLeftCorner(s, s) = Eigen::MatrixXd::Identity(s, s) / tau + 2.0 * a;
  hess.topRightCorner(s, dd) = emb / tau;
  hess.bottomLeftCorner(dd, s) = emb.transpose() / tau;
  hess.bottomRightCorner(dd, dd) = Eigen::MatrixXd::Identity(dd, dd) / tau;
  const double step = 1.0 / max_eigenvalue(hess);

  const Eigen::VectorXd target = to_isometric(xi);
  Eigen::VectorXd y = target;
  Eigen::VectorXd z = Eigen::VectorXd::Zero(dd);
  const double tol = 1e-13 * std::max(1.0, xi.norm());
  for (int it = 0; it < 2000000; ++it) {
    const Eigen::VectorXd r = y + emb * z - target;
    const Eigen::VectorXd gy = r / tau + 2.0 * a * y;
    const Eigen::VectorXd gz = emb.transpose() * r / tau;
    const Eigen::VectorXd ny = y - step * gy;
    const Eigen::VectorXd nz = prox_support(yield_, n, z - step * gz, step);
    const double change = std::sqrt((ny - y).squaredNorm() + (nz - z).squaredNorm());
    y = ny;
    z = nz;
    if (change <= tol) return from_isometric(n, y + emb * z);
  }
  throw ConvergenceError("reduced_density_prox: inner minimisation did not converge");
}

}  // namespace hencky
