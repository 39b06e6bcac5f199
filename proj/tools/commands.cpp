#include "commands.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "hencky/fields.hpp"
#include "hencky/functionals.hpp"
#include "hencky/material.hpp"
#include "hencky/mesh.hpp"
#include "hencky/parallel.hpp"
#include "hencky/pipeline.hpp"
#include "hencky/solver.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;

namespace hencky::cli {

namespace {

void say(const RunSpec& spec, const std::string& msg) {
  if (!spec.quiet) std::cout << msg << '\n';
}

// one writer per run: files are only written from the calling thread
void write_file(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << text;
}

std::string num(double v) {
  std::ostringstream os;
  os << std::setprecision(12) << v;
  return os.str();
}

ScenarioFile load(const RunSpec& spec) {
  if (spec.scenario.empty()) throw std::invalid_argument(spec.command + ": --scenario is required");
  return load_scenario(spec.scenario);
}

std::vector<int> levels_of(const RunSpec& spec, const ScenarioFile& f) {
  return spec.levels.empty() ? std::vector<int>{f.m} : spec.levels;
}

SolveConfig solve_config(const RunSpec& spec, const ScenarioFile& f, BcMode mode) {
  SolveConfig cfg;
  cfg.mode = mode;
  cfg.tol = spec.tol.value_or(f.solver.tol);
  cfg.max_iter = f.solver.max_iter;
  cfg.check();
  return cfg;
}

bool full_dirichlet(const ScenarioFile& f) {
  return f.shape == "lshape" ? f.gamma0_all : f.gamma0 == kAllSides;
}

double rel_gap(const SolveReport& r) { return r.gap_history.empty() ? 0.0 : r.gap_history.back(); }

fs::path out_dir(const RunSpec& spec) {
  fs::create_directories(spec.out);
  return spec.out;
}

// runs fn for every level on the worker pool; results are kept in level order
template <class R, class Fn>
std::vector<R> per_level(const std::vector<int>& levels, Fn fn) {
  std::vector<R> out(levels.size());
  std::vector<std::exception_ptr> errs(levels.size());
  parallel_for(
      levels.size(),
      [&](std::size_t i) {
        try {
          out[i] = fn(levels[i]);
        } catch (...) {
          errs[i] = std::current_exception();
        }
      },
      1);
  for (auto& e : errs)
    if (e) std::rethrow_exception(e);
  return out;
}

struct LevelSolve {
  Scenario scenario;
  SolveResult result;
};

}  // namespace

void RunSpec::check() const {
  if (!scenario.empty() && !fs::exists(scenario)) throw std::invalid_argument("scenario file not found: " + scenario);
  for (int m : levels)
    if (m < 1) throw std::invalid_argument("levels must be positive");
  for (int k : schedule)
    if (k < 1) throw std::invalid_argument("schedule entries must be positive");
}

int cmd_mesh_gen(const RunSpec& spec) {
  const ScenarioFile f = load(spec);
  const auto dir = out_dir(spec);
  std::ostringstream csv;
  csv << "m,vertices,cells,facets,checksum\n";
  for (int m : levels_of(spec, f)) {
    const Mesh mesh = f.make_mesh(m);
    std::ostringstream os;
    write_mesh(os, mesh);
    write_file(dir / ("mesh_m" + std::to_string(m) + ".txt"), os.str());
    csv << m << ',' << mesh.num_vertices() << ',' << mesh.num_cells() << ',' << mesh.facets().size() << ','
        << mesh.checksum() << '\n';
  }
  write_file(dir / "mesh_summary.csv", csv.str());
  say(spec, csv.str());
  return kOk;
}

int cmd_solve(const RunSpec& spec) {
  const ScenarioFile f = load(spec);
  const auto levels = levels_of(spec, f);
  const SolveConfig cfg = solve_config(spec, f, parse_bc_mode(f.solver.mode));
  const auto runs = per_level<LevelSolve>(levels, [&](int m) {
    Scenario s = f.make_scenario(m);
    SolveResult r = solve(s, cfg, admissible_start(s, cfg.mode));
    return LevelSolve{std::move(s), std::move(r)};
  });

  // closed form for affine data with the whole boundary clamped
  const bool affine = f.datum.affine_gradient().has_value() && full_dirichlet(f);
  const auto dir = out_dir(spec);
  std::ostringstream csv;
  csv << "m,energy,elastic,bulk,boundary,rel_gap,iterations,converged,expected,rel_err\n";
  int status = kOk;
  for (std::size_t i = 0; i < levels.size(); ++i) {
    const auto& [s, r] = runs[i];
    const auto& e = r.report.energy;
    std::string expected = "", rel = "";
    if (affine) {
      const double ex = s.density().value(f.datum.sym_gradient_if_affine()) * s.mesh->total_volume();
      const double err = std::abs(e.total - ex) / std::max(std::abs(ex), 1e-300);
      const bool ok = ex == 0.0 ? std::abs(e.total) <= 1e-12 : err <= 1e-3;
      if (!ok) status = kAssertion;
      expected = num(ex);
      rel = ex == 0.0 ? num(std::abs(e.total)) : num(err);
    }
    if (!r.report.converged) status = kAssertion;
    csv << levels[i] << ',' << num(e.total) << ',' << num(e.elastic) << ',' << num(e.bulk) << ',' << num(e.boundary) << ','
        << num(rel_gap(r.report)) << ',' << r.report.iterations << ',' << (r.report.converged ? 1 : 0) << ',' << expected
        << ',' << rel << '\n';
    const std::string stem = "solve_m" + std::to_string(levels[i]);
    write_file(dir / (stem + ".json"), to_json(r.report).dump(2) + "\n");
    std::ostringstream tr;
    write_trace_csv(tr, r.report);
    write_file(dir / (stem + "_trace.csv"), tr.str());
  }
  write_file(dir / "solve_summary.csv", csv.str());
  say(spec, csv.str());
  return status;
}

namespace {

PipelineConfig pipeline_config(const RunSpec& spec, const ScenarioFile& f) {
  PipelineConfig cfg;
  cfg.schedule = spec.schedule.empty() ? f.pipeline.schedule : spec.schedule;
  cfg.check();
  return cfg;
}

struct LevelRecovery {
  double G = 0.0;
  RecoveryTrace trace;
  double G_lower = 0.0;
  double F_hard = 0.0;
};

}  // namespace

int cmd_recover(const RunSpec& spec) {
  const ScenarioFile f = load(spec);
  if (!full_dirichlet(f)) throw std::invalid_argument("recover: the scenario must clamp the whole boundary");
  const auto levels = levels_of(spec, f);
  const SolveConfig cfg = solve_config(spec, f, BcMode::Relaxed);
  const PipelineConfig pcfg = pipeline_config(spec, f);
  const auto runs = per_level<LevelRecovery>(levels, [&](int m) {
    const Scenario s = f.make_scenario(m);
    const SolveResult r = solve(s, cfg, admissible_start(s, BcMode::Relaxed));
    LevelRecovery out;
    out.G = r.report.energy.total;
    out.trace = recover_dirichlet(s, r.triplet, pcfg).trace;
    return out;
  });
  const auto dir = out_dir(spec);
  int status = kOk;
  std::ostringstream all;
  all << "m,G,";
  {
    std::ostringstream h;
    write_csv(h, RecoveryTrace{});
    all << h.str();
  }
  for (std::size_t i = 0; i < levels.size(); ++i) {
    const std::string stem = "recover_m" + std::to_string(levels[i]);
    std::ostringstream os;
    write_csv(os, runs[i].trace);
    write_file(dir / (stem + ".csv"), os.str());
    nlohmann::json j = to_json(runs[i].trace);
    j["m"] = levels[i];
    j["G"] = runs[i].G;
    write_file(dir / (stem + ".json"), j.dump(2) + "\n");
    std::istringstream lines(os.str());
    std::string line;
    std::getline(lines, line);
    while (std::getline(lines, line)) all << levels[i] << ',' << num(runs[i].G) << ',' << line << '\n';
    if (!runs[i].trace.budgets_ok()) status = kAssertion;
  }
  write_file(dir / "recover_summary.csv", all.str());
  say(spec, all.str());
  return status;
}

int cmd_gamma_check(const RunSpec& spec) {
  const ScenarioFile f = load(spec);
  if (!full_dirichlet(f)) throw std::invalid_argument("gamma-check: the scenario must clamp the whole boundary");
  const auto levels = levels_of(spec, f);
  const SolveConfig relaxed = solve_config(spec, f, BcMode::Relaxed);
  const SolveConfig hard = solve_config(spec, f, BcMode::Hard);
  const PipelineConfig pcfg = pipeline_config(spec, f);
  const auto runs = per_level<LevelRecovery>(levels, [&](int m) {
    const Scenario s = f.make_scenario(m);
    const SolveResult r = solve(s, relaxed, admissible_start(s, BcMode::Relaxed));
    const SolveResult h = solve(s, hard, admissible_start(s, BcMode::Hard));
    LevelRecovery out;
    out.G = r.report.energy.total;
    out.F_hard = h.report.energy.total;
    out.G_lower = r.report.lower_bound;
    out.trace = recover_dirichlet(s, r.triplet, pcfg).trace;
    return out;
  });

  const auto dir = out_dir(spec);
  int status = kOk;
  std::ostringstream table, summary;
  table << "m,k,F,G,gap\n";
  summary << "m,G,F_hard,best_F,best_k,final_gap,decreasing,hard_ge_relaxed\n";
  for (std::size_t i = 0; i < levels.size(); ++i) {
    const auto& lv = runs[i];
    double best = std::numeric_limits<double>::infinity();
    int best_k = 0;
    for (const auto& row : lv.trace.rows) {
      const double gap = std::abs(row.energy_F - lv.G) / std::max(std::abs(lv.G), 1e-300);
      table << levels[i] << ',' << row.k << ',' << num(row.energy_F) << ',' << num(lv.G) << ',' << num(gap) << '\n';
      if (row.energy_F < best) {
        best = row.energy_F;
        best_k = row.k;
      }
    }
    const double final_gap =
        lv.trace.rows.empty() ? 0.0 : std::abs(lv.trace.rows.back().energy_F - lv.G) / std::max(std::abs(lv.G), 1e-300);
    const bool decreasing = lv.trace.eventually_decreasing();
    // a violation is certified only when F_h drops below the dual bound of G_h
    const bool ordered = lv.F_hard >= lv.G_lower;
    if (!decreasing || !ordered) status = kAssertion;
    summary << levels[i] << ',' << num(lv.G) << ',' << num(lv.F_hard) << ',' << num(best) << ',' << best_k << ','
            << num(final_gap) << ',' << (decreasing ? 1 : 0) << ',' << (ordered ? 1 : 0) << '\n';
  }
  write_file(dir / "gamma_check.csv", table.str());
  write_file(dir / "gamma_check_summary.csv", summary.str());
  say(spec, table.str() + "\n" + summary.str());
  return status;
}

int cmd_oracle(const RunSpec& spec) {
  if (spec.oracle.empty()) throw std::invalid_argument("oracle: a name is required");
  const int m = spec.levels.empty() ? 8 : spec.levels.front();
  const nlohmann::json j = run_oracle(spec.oracle, spec.seed, m);
  const auto dir = out_dir(spec);
  const fs::path path = dir / ("oracle_" + spec.oracle + ".json");
  write_file(path, j.dump(2) + "\n");
  say(spec, "wrote " + path.string() + " (" + std::to_string(j["cases"].is_array() ? j["cases"].size() : 1) + " cases)");
  return kOk;
}

int cmd_selftest(const RunSpec& spec) {
  int failures = 0;
  auto check = [&](const std::string& name, double got, double want, double tol) {
    const bool ok = std::abs(got - want) <= tol * std::max(1.0, std::abs(want));
    if (!ok) ++failures;
    say(spec, std::string(ok ? "PASS " : "FAIL ") + name + " got " + num(got) + " want " + num(want));
  };
  const double r2 = std::sqrt(2.0);
  {
    const ReducedDensity f(ElasticModuli::isotropic(1.0, 1.0), YieldSet::ball(2.0));
    check("reduced density mu=1 sy=2 |xi_D|=3", f.value(SymTensor::diag(3 / r2, -3 / r2)), 5.0, 1e-12);
    const auto oracle = run_oracle("reduced-density-grid", spec.seed, 0);
    const auto& c = oracle["cases"][0];
    check("reduced density grid", c["value_2d"].get<double>(), 5.0, 1e-4);
  }
  {
    const YieldSet seg = YieldSet::polytope({SymTensor::diag(1, -1), SymTensor::diag(-1, 1)});
    check("segment support at diag(1,-1)", seg.support(SymTensor::diag(1, -1)), 2.0, 1e-12);
  }
  {
    const double sy = 1.5;
    const SymTensor a = sym_outer(Vec(1.0, 0.0), Vec(0.0, -1.0));
    check("tangential facet slip", YieldSet::ball(sy).support(a), sy / r2, 1e-12);
  }
  {
    Scenario s;
    s.mesh = std::make_shared<const Mesh>(gen_rectangle({1.0, 1.0}, 4, kAllSides));
    SolveConfig cfg;
    cfg.max_iter = 2000;
    const SolveResult r = solve(s, cfg, admissible_start(s, cfg.mode));
    check("zero datum energy", r.report.energy.total, 0.0, 0.0);
  }
  say(spec, failures == 0 ? "selftest ok" : std::to_string(failures) + " selftest failures");
  return failures == 0 ? kOk : kAssertion;
}

int run(const RunSpec& spec) {
  try {
    spec.check();
    if (spec.command == "mesh-gen") return cmd_mesh_gen(spec);
    if (spec.command == "solve") return cmd_solve(spec);
    if (spec.command == "recover") return cmd_recover(spec);
    if (spec.command == "gamma-check") return cmd_gamma_check(spec);
    if (spec.command == "oracle") return cmd_oracle(spec);
    if (spec.command == "selftest") return cmd_selftest(spec);
    throw std::invalid_argument("unknown command '" + spec.command + "'");
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntime;
  }
}

}  // namespace hencky::cli
