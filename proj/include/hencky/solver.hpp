#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hencky/fields.hpp"
#include "hencky/functionals.hpp"

namespace hencky {

enum class BcMode { Hard, Relaxed };

BcMode parse_bc_mode(const std::string& s);
std::string to_string(BcMode m);

struct SolveConfig {
  long max_iter = 200000;
  double tol = 1e-8;  // relative primal-dual gap
  double safety = 0.95;
  int power_iters = 50;
  BcMode mode = BcMode::Relaxed;
  int check_every = 25;
  double balance = 1.0;  // dual step / primal step

  void check() const;
};

struct TraceRow {
  long iter = 0;
  double energy = 0.0;
  double gap = 0.0;
  double dual_residual = 0.0;
};

struct SolveReport {
  EnergyBreakdown energy;
  long iterations = 0;
  double lower_bound = 0.0;
  std::vector<double> gap_history;  // relative gap of the best envelope, one entry per check
  std::vector<TraceRow> trace;
  double dual_residual = 0.0;
  double opnorm = 0.0;
  bool converged = false;
};

nlohmann::json to_json(const SolveReport& r);
void write_trace_csv(std::ostream& os, const SolveReport& r);

struct SolveResult {
  Displacement u;
  Triplet triplet;
  SolveReport report;
};

/// Primal-dual minimization of the classical (hard) or relaxed reduced functional.
/// u0 must satisfy the linear constraints of the mode.
SolveResult solve(const Scenario& s, const SolveConfig& cfg, const Displacement& u0);

/// Power-iteration estimate of the norm of the symmetric gradient, from
/// displacements with the lumped-mass norm to strains with the volume-weighted
/// Frobenius norm. A zero or missing start vector is replaced by a seeded one.
double estimate_opnorm(const Mesh& mesh, int iterations = 50, const Displacement* start = nullptr);

/// Displacement satisfying the constraints of the mode: w where prescribed, zero elsewhere.
Displacement admissible_start(const Scenario& s, BcMode mode);

}  // namespace hencky
