#pragma once

#include <optional>
#include <stdexcept>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "hencky/tensor.hpp"

namespace hencky {

/// Raised when an iterative inner solve does not reach its tolerance.
class ConvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Isometric coordinates of a symmetric tensor: diagonal entries as stored,
/// off-diagonal entries scaled by sqrt(2), so |xi| equals the Euclidean norm.
Eigen::VectorXd to_isometric(const SymTensor& xi);
SymTensor from_isometric(int dim, const Eigen::VectorXd& y);
/// Coordinates of the trace-free part in the basis of deviatoric_basis().
Eigen::VectorXd to_deviatoric_coords(const SymTensor& xi);
SymTensor from_deviatoric_coords(int dim, const Eigen::VectorXd& z);

/// Elastic energy density Q, a positive definite quadratic form.
///
/// Isotropic: Q(e) = mu |e_D|^2 + (kappa / 2) (tr e)^2.
/// General:   Q(e) = c^T M c, with c the stored (unscaled) components of e.
class ElasticModuli {
 public:
  static ElasticModuli isotropic(double mu, double kappa);
  static ElasticModuli general(int dim, Eigen::MatrixXd matrix);
  /// The general-form matrix that reproduces the isotropic law in dimension n.
  static Eigen::MatrixXd isotropic_matrix(int dim, double mu, double kappa);

  bool is_isotropic() const { return isotropic_; }
  double mu() const { return mu_; }
  double kappa() const { return kappa_; }

  double energy(const SymTensor& e) const;
  /// Frobenius gradient of Q (the stress).
  SymTensor stress(const SymTensor& e) const;
  /// Convex conjugate Q*(sigma) = sup over e of sigma : e - Q(e).
  double conjugate(const SymTensor& sigma) const;
  /// Q as y^T A y in isometric coordinates.
  Eigen::MatrixXd isometric_matrix(int dim) const;

 private:
  bool isotropic_ = true;
  double mu_ = 1.0;
  double kappa_ = 1.0;
  int dim_ = 0;
  Eigen::MatrixXd matrix_;
};

struct BallYield {
  double radius = 1.0;
};

struct PolytopeYield {
  std::vector<SymTensor> vertices;
};

/// Convex compact set K of trace-free stresses and its support function H.
class YieldSet {
 public:
  static YieldSet ball(double radius);
  static YieldSet polytope(std::vector<SymTensor> vertices);

  bool is_ball() const { return std::holds_alternative<BallYield>(shape_); }
  const std::variant<BallYield, PolytopeYield>& shape() const { return shape_; }
  double ball_radius() const;

  /// Radii with B_r subset K subset B_R inside the trace-free subspace.
  /// r = 0 for polytopes that do not span the trace-free subspace.
  double inner_radius() const { return r_; }
  double outer_radius() const { return R_; }
  /// False when r is a sampled estimate rather than an exact value.
  bool bounds_exact() const { return bounds_exact_; }
  bool full_dimensional() const { return r_ > 0.0; }

  /// H(xi) = sup over sigma in K of sigma : xi. xi must be trace-free.
  double support(const SymTensor& xi) const;
  /// Euclidean projection onto K of a trace-free sigma.
  SymTensor project(const SymTensor& sigma) const;
  /// Minkowski gauge: inf { t >= 0 : sigma in t K } (+inf if never).
  double gauge(const SymTensor& sigma) const;

 private:
  struct Halfspace {
    Eigen::VectorXd normal;  // unit, in deviatoric coordinates
    double offset = 0.0;
    bool equality = false;
  };
  void prepare_polytope();
  SymTensor project_dykstra(const SymTensor& sigma) const;
  SymTensor project_min_norm(const SymTensor& sigma) const;

  std::variant<BallYield, PolytopeYield> shape_;
  int dim_ = 0;
  double r_ = 0.0;
  double R_ = 0.0;
  bool bounds_exact_ = true;
  std::vector<Eigen::VectorXd> coords_;  // vertex coordinates in M_D
  std::vector<Halfspace> halfspaces_;    // only for n = 2 polytopes
};

/// Rejects tensors whose trace exceeds 1e-10 |xi|.
void require_deviatoric(const SymTensor& xi, const char* where);

/// H(xi) for trace-free xi.
inline double support(const YieldSet& k, const SymTensor& xi) { return k.support(xi); }
inline SymTensor project_K(const YieldSet& k, const SymTensor& sigma) { return k.project(sigma); }

struct StrainSplit {
  SymTensor elastic;
  SymTensor plastic;
};

/// Inf-convolution density f(xi) = min over trace-free p of Q(xi - p) + H(p).
class ReducedDensity {
 public:
  ReducedDensity(ElasticModuli moduli, YieldSet yield);

  const ElasticModuli& moduli() const { return moduli_; }
  const YieldSet& yield() const { return yield_; }
  /// Closed form is available for isotropic moduli with a ball yield set.
  bool closed_form() const { return closed_form_; }

  double value(const SymTensor& xi) const;
  /// Optimal elastic/plastic split realising value().
  StrainSplit split(const SymTensor& xi) const;
  /// argmin over zeta of |zeta - xi|^2 / (2 tau) + f(zeta).
  SymTensor prox(const SymTensor& xi, double tau) const;

  /// Same quantities by the iterative route, regardless of closed_form().
  StrainSplit split_numeric(const SymTensor& xi) const;
  SymTensor prox_numeric(const SymTensor& xi, double tau) const;

 private:
  ElasticModuli moduli_;
  YieldSet yield_;
  bool closed_form_ = false;
};

inline double reduced_density(const ReducedDensity& f, const SymTensor& xi) { return f.value(xi); }
inline SymTensor reduced_density_prox(const ReducedDensity& f, const SymTensor& xi, double tau) {
  return f.prox(xi, tau);
}

}  // namespace hencky
