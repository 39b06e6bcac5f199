#pragma once

#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hencky/material.hpp"
#include "hencky/mesh.hpp"
#include "hencky/tensor.hpp"

namespace hencky {

/// Piecewise-linear vector field, one value per mesh vertex.
struct Displacement {
  std::vector<Vec> values;

  static Displacement zero(const Mesh& mesh);
  static Displacement interpolate(const Mesh& mesh, const std::function<Vec(const Vec&)>& f);
  Vec at(const Mesh& mesh, std::size_t cell, const std::array<double, 4>& bary) const;
  /// Facet average of the P1 trace.
  Vec facet_average(const BoundaryFacet& f, int dim) const;
};

/// Piecewise-constant strain, one tensor per cell.
using ElasticStrain = std::vector<SymTensor>;

/// Trace-free plastic strain measure: a P0 density plus amplitudes on Gamma0 facets.
/// facet[i] belongs to mesh.facets()[i]; it is zero off Gamma0.
struct PlasticMeasure {
  std::vector<SymTensor> ac;
  std::vector<SymTensor> facet;

  static PlasticMeasure zero(const Mesh& mesh);
  bool has_singular_part() const;
};

/// Discrete (u, e, p) with the boundary datum it is admissible for.
struct Triplet {
  Displacement u;
  ElasticStrain e;
  PlasticMeasure p;
  Displacement w;
  bool regular = false;
};

ElasticStrain sym_gradient(const Mesh& mesh, const Displacement& u);
std::vector<double> divergence(const Mesh& mesh, const Displacement& u);

double total_variation(const Mesh& mesh, const PlasticMeasure& p);
/// H-energy of the measure: sum of H(p_T) vol(T) + H(P_F) area(F).
double dissipation(const Mesh& mesh, const YieldSet& k, const PlasticMeasure& p);

/// Singular amplitudes (w - u)_F (.) nu_F on Gamma0 facets from facet averages.
std::vector<SymTensor> slip_amplitudes(const Mesh& mesh, const Displacement& w, const Displacement& u);
/// Inverse of a (.) nu for a tangential a: returns 2 P nu.
Vec slip_from_amplitude(const SymTensor& amplitude, const Vec& normal);

/// Largest per-cell violation of Eu = e + p_ac, relative to max(1, |Eu|).
double kinematic_residual(const Mesh& mesh, const Triplet& t);
/// Throws std::invalid_argument when an invariant of the class A or A_reg fails.
void validate(const Mesh& mesh, const Triplet& t, double tol = 1e-10);

// ---------------------------------------------------------------- norms

double lq_norm(const Mesh& mesh, const Displacement& u, double q);
double l2_norm(const Mesh& mesh, const ElasticStrain& e);
double l2_norm(const Mesh& mesh, const std::vector<double>& s);
Displacement difference(const Displacement& a, const Displacement& b);
ElasticStrain difference(const ElasticStrain& a, const ElasticStrain& b);

// ---------------------------------------------------------------- weak* diagnostics

/// Smooth tensor test fields vanishing on the free boundary (boundary minus Gamma0):
/// random quadratic polynomial times a random unit tensor times a C^1 cutoff.
class TestFamily {
 public:
  TestFamily(const Mesh& mesh, int count = 50, unsigned seed = 20240611u, double cutoff_width = 0.25);
  std::size_t size() const { return coeffs_.size(); }
  SymTensor eval(std::size_t j, const Vec& x) const;

 private:
  const Mesh* mesh_;
  double width_;
  std::vector<BoundaryFacet> free_;
  std::vector<std::array<double, 10>> coeffs_;
  std::vector<SymTensor> dirs_;
  double cutoff(const Vec& x) const;
};

/// Sum over cells and facets of the integral of phi : dp.
double pairing(const Mesh& mesh, const PlasticMeasure& p, const std::function<SymTensor(const Vec&)>& phi);
double weakstar_gap(const Mesh& mesh, const PlasticMeasure& pk, const PlasticMeasure& p, const TestFamily& tests);
double weakstar_gap(const Mesh& mesh, const std::vector<PlasticMeasure>& seq, const PlasticMeasure& p,
                    const TestFamily& tests);
double strict_gap(const Mesh& mesh, const PlasticMeasure& pk, const PlasticMeasure& p, const TestFamily& tests);
double strict_gap(const Mesh& mesh, const std::vector<PlasticMeasure>& seq, const PlasticMeasure& p,
                  const TestFamily& tests);

// ---------------------------------------------------------------- snapshot

nlohmann::json to_json(const SymTensor& t);
SymTensor sym_from_json(int dim, const nlohmann::json& j);
nlohmann::json snapshot(const Mesh& mesh, const Triplet& t);
Triplet triplet_from_snapshot(const Mesh& mesh, const nlohmann::json& j);

}  // namespace hencky
