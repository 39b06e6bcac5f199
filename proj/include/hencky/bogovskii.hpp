#pragma once

#include <stdexcept>
#include <vector>

#include "hencky/fields.hpp"
#include "hencky/mesh.hpp"

namespace hencky {

/// Raised when the right-hand side of the divergence system has nonzero mean.
class IncompatibleRhs : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// div v = psi in Omega, v = 0 on the whole boundary; psi is P0.
struct DivProblem {
  const Mesh* mesh = nullptr;
  std::vector<double> psi;
};

struct DivResult {
  Displacement v;          // P1, zero at every boundary vertex
  double ratio = 0.0;      // |v|_{W^{1,p}} / |psi|_{L^p}, p = n/(n-1)
  double residual = 0.0;   // |div v - P psi|_{L^2} / |psi|_{L^2}, P the projection onto the range of div
  double spurious = 0.0;   // |psi - P psi|_{L^2} / |psi|_{L^2}
  int iterations = 0;
};

/// psi - (integral of psi) / |Omega|, with a compensated sum.
std::vector<double> mean_project(const std::vector<double>& psi, const Mesh& mesh);

/// Minimum-H1-seminorm P1 field with zero trace whose P0 divergence is the
/// least-squares projection of psi onto the range of the discrete divergence.
DivResult solve_div(const DivProblem& prob);

/// W^{1,p} norm (|v|_p^p + |grad v|_p^p)^(1/p) of a P1 field, Frobenius gradient.
double w1p_norm(const Mesh& mesh, const Displacement& v, double p);

}  // namespace hencky
