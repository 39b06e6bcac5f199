#pragma once

#include <array>
#include <functional>
#include <iosfwd>
#include <memory>
#include <stdexcept>
#include <vector>

#include <nlohmann/json.hpp>

#include "hencky/fields.hpp"
#include "hencky/functionals.hpp"
#include "hencky/mesh.hpp"

namespace hencky {

/// A construction could not meet its tolerances (budgets, resolution, schedules).
class PipelineError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------- mesh hierarchy

/// Uniform refinements of a mesh with P1/P0 transfer between levels.
class Hierarchy {
 public:
  explicit Hierarchy(std::shared_ptr<const Mesh> coarse);
  /// Mesh at level l (0 is the coarse mesh), built on demand.
  const std::shared_ptr<const Mesh>& level(int l);
  /// P1 field from level `from` to the finer level `to` (exact interpolation).
  Displacement prolong(const Displacement& u, int from, int to);
  /// Level-0 ancestor of each cell of level l.
  std::vector<int> root_cell(int l);
  /// Ancestor of each cell of level `fine` on level `coarse`.
  std::vector<int> ancestor(int fine, int coarse);

 private:
  std::vector<std::shared_ptr<const Mesh>> meshes_;
  std::vector<std::vector<int>> parent_;                         // per level >= 1
  std::vector<std::vector<std::pair<int, int>>> vertex_edge_;    // per level >= 1
};

// ---------------------------------------------------------------- recovery

struct PipelineConfig {
  std::vector<int> schedule{2, 4, 8, 16};
  int k0 = 0;                 // translation scale; 0 takes the cover's
  double eps_factor = 0.25;   // eps_k = eps_factor / (k k0)
  double budget_scale = 1.0;  // per-k budgets are budget_scale / k
  int max_refine = 4;         // recovery meshes: edges <= shift, at most this many refinements
  int div_refine = 2;         // refinements used for the divergence correction

  void check() const;
};

struct RecoveryRow {
  int k = 0;
  double shift = 0.0;
  double eps = 0.0;
  int levels = 0;
  double err_u = 0.0;  // L^{n/(n-1)}
  double err_e = 0.0;  // L^2
  double tv_pk = 0.0;
  double tv_target = 0.0;
  double energy_F = 0.0;
  double energy_G = 0.0;
  double gap = 0.0;  // |F - G| / |G|
  double weak_gap = 0.0;
  double strict_gap = 0.0;
  double div_residual = 0.0;  // |psi_k - div u_k|_{L^2}
  std::array<double, 4> budgets{};  // u, div u, e_D, |p|
  double budget = 0.0;
  bool budget_ok = true;
};

struct RecoveryTrace {
  std::vector<RecoveryRow> rows;
  bool budgets_ok() const;
  /// |F_k - G| is non-increasing from the first index on which it starts to decrease.
  bool eventually_decreasing() const;
};

void write_csv(std::ostream& os, const RecoveryTrace& trace);
nlohmann::json to_json(const RecoveryTrace& trace);

struct RecoveredStage {
  std::shared_ptr<const Mesh> mesh;
  Triplet triplet;  // regular, with triplet.w the discrete datum on mesh
};

struct RecoveryResult {
  std::vector<RecoveredStage> stages;
  RecoveryTrace trace;
};

/// Translate, mollify and divergence-correct a relaxed triplet of a scenario
/// with Dirichlet data on the whole boundary (n = 2). One regular triplet per
/// entry of the schedule, each on a uniform refinement of the scenario mesh.
RecoveryResult recover_dirichlet(const Scenario& s, const Triplet& t, const PipelineConfig& cfg);

// ---------------------------------------------------------------- interior mollification

struct PatchBudget {
  double d = 0.0;    // inner distance scale of the patch
  double eps = 0.0;  // accepted radius (0 for the unmollified boundary layer)
  int halvings = 0;
  std::array<double, 4> norms{};  // u, grad phi (.) u, e, |p|
  double bound = 0.0;             // (1/k) 2^-i
};

struct BudgetResult {
  Triplet triplet;
  std::vector<PatchBudget> patches;
  double tv = 0.0;          // integral of |p_k|
  double tv_input = 0.0;    // |p|(Omega)
  double slack = 0.0;       // sum of the |p| budgets plus |(Ev_k)_D| and the cutoff terms
  double div_error = 0.0;   // |tr e_k - div u|_{L^2}
};

/// Partition-of-unity mollification with per-patch budgets (1/k) 2^-i for a
/// triplet that already satisfies u = w on Gamma0. Patches are distance layers;
/// radii are halved until the four budgets pass (at most 40 times).
BudgetResult mollify_budget(const Scenario& s, const Triplet& t, int k);

// ---------------------------------------------------------------- boundary peeling

struct PeelResult {
  Triplet triplet;
  double strip_tv = 0.0;           // integral of |grad eta_k (.) v|
  double max_trace = 0.0;          // largest |tr(grad eta_k (.) v)| on cells where grad eta_k is normal
  double max_normal = 0.0;         // largest |v . grad d| on strip cells
};

/// u_k = u + eta_k v with eta_k = max(0, 1 - k d); v must be tangential in the strip d < 1/k.
PeelResult peel_boundary(const Scenario& s, const Triplet& t, const Displacement& v, int k);

// ---------------------------------------------------------------- flat trace lifting

/// Layer schedule for the model half cube (-1,1) x (0,1): heights tau_0 > tau_1 > ... > 0
/// and tangential profiles theta_j with theta_0 = 0.
struct LiftSchedule {
  std::vector<double> tau;
  std::vector<std::function<double(double)>> theta, dtheta;
};

struct LiftReport {
  double l2 = 0.0, l2_bound = 0.0;        // |v|_{L^2}^2 and its layer bound
  double dt_l2 = 0.0, dt_l2_bound = 0.0;  // |d_1 v|_{L^2}^2 and its layer bound
  double dn_l1 = 0.0, dn_l1_sum = 0.0;    // |d_n v|_{L^1} and the sum of increments
  double dn_l2 = 0.0;                     // |d_n v|_{L^2}^2 (diverges for rough traces)
  double w11 = 0.0;                       // |v|_{L^1} + |grad v|_{L^1}
  double max_normal = 0.0;                // largest |v . e_n| over the samples
  std::vector<double> heights, trace_error;  // |v(., t) - u0|_{L^1} at t = tau_j
};

/// Value of the layered field at (x', x_n) as a vector (tangential, normal).
Vec lift_value(const LiftSchedule& sch, double x1, double xn);
/// Builds the layered field of the schedule and measures it against u0 (n = 2).
LiftReport lift_trace_cube(const std::function<double(double)>& u0, const LiftSchedule& sch);

/// theta_j = (x^2 + delta_j^2)^(-a/2) (1 - x^2)^2 with delta_j = 2^-j (j >= 1) and
/// tau_j = 8^-j, a profile schedule for u0 = |x|^-a (1 - x^2)^2.
LiftSchedule power_schedule(double a, int levels);

}  // namespace hencky
