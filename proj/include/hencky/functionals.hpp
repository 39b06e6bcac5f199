#pragma once

#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hencky/fields.hpp"
#include "hencky/material.hpp"
#include "hencky/mesh.hpp"

namespace hencky {

/// Closed-form boundary datum w: affine (b + A x), shear (gamma x_2 e_1) or a smooth bump.
class Datum {
 public:
  enum class Family { Affine, Shear, Bump };

  static Datum affine(int dim, std::vector<double> matrix_row_major, std::vector<double> offset);
  static Datum shear(int dim, double gamma);
  /// amplitude * (1 - |x - center|^2 / radius^2)^3 inside the ball, 0 outside.
  static Datum bump(Vec center, double radius, Vec amplitude);
  static Datum zero(int dim) { return shear(dim, 0.0); }

  Family family() const { return family_; }
  int dim() const { return dim_; }
  Vec operator()(const Vec& x) const;
  /// Gradient matrix (row-major) when the datum is affine.
  std::optional<std::vector<double>> affine_gradient() const;
  SymTensor sym_gradient_if_affine() const;

 private:
  Family family_ = Family::Affine;
  int dim_ = 2;
  std::vector<double> a_;  // row-major n x n
  Vec b_;
  Vec center_;
  double radius_ = 1.0;
};

/// Mesh, material law, yield set and boundary datum of one problem instance.
struct Scenario {
  std::shared_ptr<const Mesh> mesh;
  ElasticModuli moduli = ElasticModuli::isotropic(1.0, 1.0);
  YieldSet yield = YieldSet::ball(1.0);
  Datum datum = Datum::zero(2);

  ReducedDensity density() const { return ReducedDensity(moduli, yield); }
  Displacement w() const;
  /// Throws std::invalid_argument when Gamma0 is empty or dimensions disagree.
  void check() const;
};

struct EnergyBreakdown {
  double elastic = 0.0;
  double bulk = 0.0;
  double boundary = 0.0;
  double total = 0.0;
  /// False encodes the value +infinity of the classical functional.
  bool feasible = true;
};

nlohmann::json to_json(const EnergyBreakdown& e);

/// Classical functional; infeasible when u differs from w on Gamma0.
EnergyBreakdown eval_F(const Scenario& s, const Triplet& t, double bc_tol = 1e-10);
/// Same with an explicit discrete datum in place of the interpolant of s.datum.
EnergyBreakdown eval_F(const Scenario& s, const Triplet& t, const Displacement& w, double bc_tol = 1e-10);
/// Relaxed functional with the boundary dissipation on Gamma0.
EnergyBreakdown eval_G(const Scenario& s, const Triplet& t, double tol = 1e-10);

struct ReducedEvaluation {
  EnergyBreakdown energy;
  Triplet triplet;  // optimal per-cell split plus the boundary singular part
};
/// Relaxed functional with (e, p) eliminated cellwise.
ReducedEvaluation eval_G_reduced(const Scenario& s, const Displacement& u, double tol = 1e-10);

/// Triplet built from u by the optimal cellwise split; regular when u = w on Gamma0 is requested.
Triplet split_triplet(const Scenario& s, const Displacement& u, bool regular);

// ---------------------------------------------------------------- scenario files

struct PipelineSettings {
  std::vector<int> schedule{2, 4, 8, 16};
};

struct SolverSettings {
  std::string mode = "relaxed";
  double tol = 1e-8;
  long max_iter = 200000;
};

/// Parsed scenario file: a base scenario plus run settings.
struct ScenarioFile {
  std::string shape = "rectangle";  // rectangle | lshape
  std::vector<double> widths{1.0, 1.0};
  int m = 8;
  unsigned gamma0 = kAllSides;
  bool gamma0_all = true;
  ElasticModuli moduli = ElasticModuli::isotropic(1.0, 1.0);
  YieldSet yield = YieldSet::ball(1.0);
  Datum datum = Datum::zero(2);
  SolverSettings solver;
  PipelineSettings pipeline;

  int dim() const { return static_cast<int>(widths.size()); }
  Mesh make_mesh(int m_override = 0) const;
  Scenario make_scenario(int m_override = 0) const;
};

/// key = value lines in [sections]; '#' starts a comment. Errors are ParseError with line numbers.
ScenarioFile parse_scenario(std::istream& is);
ScenarioFile load_scenario(const std::string& path);

}  // namespace hencky
