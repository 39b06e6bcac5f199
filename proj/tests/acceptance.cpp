// One line per acceptance criterion; exit status 0 only when all pass.
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "commands.hpp"
#include "hencky/bogovskii.hpp"
#include "hencky/fields.hpp"
#include "hencky/functionals.hpp"
#include "hencky/material.hpp"
#include "hencky/pipeline.hpp"
#include "hencky/solver.hpp"
#include "oracles.hpp"

using namespace hencky;
namespace fs = std::filesystem;

namespace {

const std::string kScenarios = HENCKY_SCENARIO_DIR;

struct Outcome {
  bool pass = true;
  std::string detail;
};

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(4) << v;
  return os.str();
}

SymTensor random_dev(std::mt19937& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  const double a = g(rng), b = g(rng);
  SymTensor t(2);
  t.set(0, 0, a);
  t.set(1, 1, -a);
  t.set(0, 1, b);
  return t;
}

SymTensor sym2(double xx, double yy, double xy) {
  const std::vector<double> m{xx, xy, xy, yy};
  return SymTensor::from_matrix(2, m);
}

Scenario scenario(const std::string& file, int m) { return load_scenario(kScenarios + "/" + file).make_scenario(m); }

SolveConfig config(BcMode mode) {
  SolveConfig cfg;
  cfg.mode = mode;
  return cfg;
}

// ------------------------------------------------------------------ 1

Outcome support_suite() {
  const double a = 1.0 / std::sqrt(2.0);
  const std::vector<std::pair<std::string, YieldSet>> sets{
      {"ball", YieldSet::ball(1.3)},
      {"segment", YieldSet::polytope({SymTensor::diag(1, -1), SymTensor::diag(-1, 1)})},
      {"square", YieldSet::polytope({SymTensor::diag(a, -a), SymTensor::diag(-a, a), sym2(0, 0, a), sym2(0, 0, -a)})}};
  std::mt19937 rng(101);
  std::uniform_real_distribution<double> lam(0.01, 100.0), t01(0.0, 1.0);
  Outcome o;
  double worst_hom = 0.0, worst_cvx = 0.0;
  int bound_fail = 0;
  for (const auto& [name, k] : sets) {
    for (int i = 0; i < 1000; ++i) {
      const SymTensor x = random_dev(rng), y = random_dev(rng);
      const double l = lam(rng), t = t01(rng);
      const double hx = k.support(x), hy = k.support(y);
      const double hom = std::abs(k.support(x * l) - l * hx) / std::max(l * std::abs(hx), 1e-300);
      worst_hom = std::max(worst_hom, hx == 0.0 ? 0.0 : hom);
      const double cvx = k.support(x * t + y * (1 - t)) - (t * hx + (1 - t) * hy);
      worst_cvx = std::max(worst_cvx, cvx / std::max(1.0, t * hx + (1 - t) * hy));
      const double n = x.norm();
      if (!(k.inner_radius() * n <= hx && hx <= k.outer_radius() * n)) ++bound_fail;
    }
  }
  o.pass = worst_hom <= 1e-12 && worst_cvx <= 1e-12 && bound_fail == 0;
  o.detail = "homogeneity " + fmt(worst_hom) + ", convexity excess " + fmt(worst_cvx) + ", bound violations " +
             std::to_string(bound_fail) + " of 3000";
  return o;
}

// ------------------------------------------------------------------ 2

Outcome reduced_density_oracle() {
  const auto j = cli::run_oracle("reduced-density-grid", 2024, 0);
  double worst = 0.0;
  int n = 0;
  for (const auto& c : j["cases"]) {
    const auto xi = c["xi"].get<std::vector<double>>();
    const ReducedDensity f(ElasticModuli::isotropic(c["mu"], c["kappa"]), YieldSet::ball(c["sigma_y"]));
    const double v = f.value(sym2(xi[0], xi[1], xi[2]));
    for (const char* key : {"value_1d", "value_2d"}) {
      const double g = c[key].get<double>();
      worst = std::max(worst, std::abs(v - g) / std::max(std::abs(g), 1e-12));
    }
    ++n;
  }
  return {worst <= 1e-4 && n >= 200, std::to_string(n) + " inputs, worst rel err " + fmt(worst)};
}

// ------------------------------------------------------------------ 3

Outcome affine_optimum() {
  Outcome o;
  double worst = 0.0;
  for (const char* file : {"affine_elastic.conf", "affine_plastic.conf"}) {
    for (int m : {4, 8, 16}) {
      const Scenario s = scenario(file, m);
      const SolveResult r = solve(s, config(BcMode::Relaxed), admissible_start(s, BcMode::Relaxed));
      const double ex = s.density().value(s.datum.sym_gradient_if_affine()) * s.mesh->total_volume();
      worst = std::max(worst, std::abs(r.report.energy.total - ex) / ex);
    }
  }
  o.pass = worst <= 1e-3;
  o.detail = "gamma 0.2 and 2 at m = 4, 8, 16; worst rel err " + fmt(worst);
  return o;
}

// ------------------------------------------------------------------ 4

Outcome relaxation_direction() {
  const std::map<std::string, std::vector<int>> runs{{"affine_elastic.conf", {4, 8, 16}}, {"affine_plastic.conf", {4, 8, 16}},
                                                     {"bump.conf", {4, 8}},                {"lshape.conf", {4, 8}},
                                                     {"slip_shear.conf", {8}},             {"zero.conf", {4, 8}}};
  int total = 0, bad = 0;
  double min_margin = std::numeric_limits<double>::infinity();
  for (const auto& [file, levels] : runs)
    for (int m : levels) {
      const Scenario s = scenario(file, m);
      const SolveResult g = solve(s, config(BcMode::Relaxed), admissible_start(s, BcMode::Relaxed));
      const SolveResult f = solve(s, config(BcMode::Hard), admissible_start(s, BcMode::Hard));
      const double G = g.report.energy.total, F = f.report.energy.total;
      // a violation is certified only when F_h drops below the dual bound of G_h
      ++total;
      if (!(F >= g.report.lower_bound)) ++bad;
      min_margin = std::min(min_margin, (F - G) / std::max(std::abs(G), 1e-12));
    }
  return {bad == 0, std::to_string(total) + " scenario levels, violations " + std::to_string(bad) +
                        ", smallest (F_h - G_h)/G_h " + fmt(min_margin)};
}

// ------------------------------------------------------------------ 5

Outcome slip_recovery() {
  const ScenarioFile f = load_scenario(kScenarios + "/slip_shear.conf");
  const Scenario s = f.make_scenario(16);
  const SolveResult r = solve(s, config(BcMode::Relaxed), admissible_start(s, BcMode::Relaxed));
  PipelineConfig cfg;
  cfg.schedule = f.pipeline.schedule;
  const RecoveryResult rec = recover_dirichlet(s, r.triplet, cfg);
  const double G = r.report.energy.total;
  std::vector<double> gaps;
  for (const auto& row : rec.trace.rows) gaps.push_back((row.energy_F - G) / G);
  const auto& last = rec.trace.rows.back();
  const double tv = std::abs(last.tv_pk - last.tv_target) / last.tv_target;
  const bool ok = rec.trace.eventually_decreasing() && std::abs(gaps.back()) <= 0.05 && tv <= 0.05;
  std::string seq;
  for (std::size_t i = 0; i < gaps.size(); ++i) seq += (i ? " " : "") + fmt(gaps[i]);
  return {ok, "m = 16, gaps " + seq + " at k = 8..64, TV rel err " + fmt(tv)};
}

// ------------------------------------------------------------------ 6

Outcome reshetnyak() {
  const Mesh m = gen_rectangle({1.0, 1.0}, 32, YMin);
  const double a = 1.0 / std::sqrt(2.0);
  const YieldSet ball = YieldSet::ball(1.0);
  const YieldSet square = YieldSet::polytope({SymTensor::diag(a, -a), SymTensor::diag(-a, a), sym2(0, 0, a), sym2(0, 0, -a)});
  const TestFamily tests(m);
  const SymTensor d0 = SymTensor::diag(a, -a);
  std::vector<std::string> parts;
  bool ok = true;

  auto strict_tail = [&](const std::string& name, const YieldSet& k, const std::vector<PlasticMeasure>& seq,
                         const PlasticMeasure& p) {
    const double h = std::abs(dissipation(m, k, seq.back()) - dissipation(m, k, p));
    const double sg = strict_gap(m, seq, p, tests);
    ok = ok && h < 1e-6;
    parts.push_back(name + " H gap " + fmt(h) + " (strict " + fmt(sg) + ")");
  };

  // vanishing perturbation of a smooth density
  {
    PlasticMeasure p = PlasticMeasure::zero(m);
    for (std::size_t c = 0; c < m.num_cells(); ++c) p.ac[c] = d0 * (1 + m.centroid(c)[0]);
    std::vector<PlasticMeasure> seq;
    for (int k : {5, 10, 20, 30}) {
      PlasticMeasure pk = p;
      for (std::size_t c = 0; c < m.num_cells(); ++c) pk.ac[c] += sym2(0, 0, std::sin(7.0 * m.centroid(c)[1])) * std::ldexp(1.0, -k);
      seq.push_back(pk);
    }
    strict_tail("perturbed", ball, seq, p);
  }
  // absolutely continuous layers concentrating on the clamped side
  {
    const SymTensor slip = sym_outer(Vec(1.0, 0.0), Vec(0.0, -1.0));
    PlasticMeasure p = PlasticMeasure::zero(m);
    for (std::size_t f = 0; f < m.facets().size(); ++f)
      if (m.facets()[f].gamma0) p.facet[f] = slip;
    std::vector<PlasticMeasure> seq;
    for (int rows : {8, 4, 2, 1}) {
      const double w = rows / 32.0;
      PlasticMeasure pk = PlasticMeasure::zero(m);
      for (std::size_t c = 0; c < m.num_cells(); ++c)
        if (m.centroid(c)[1] < w) pk.ac[c] = slip * (1.0 / w);
      seq.push_back(pk);
    }
    strict_tail("boundary layer", ball, seq, p);
  }
  // direction converging under an anisotropic set
  {
    PlasticMeasure p = PlasticMeasure::zero(m);
    for (std::size_t c = 0; c < m.num_cells(); ++c) p.ac[c] = d0;
    std::vector<PlasticMeasure> seq;
    for (int k : {5, 10, 20, 30}) {
      const double t = std::ldexp(1.0, -k);
      PlasticMeasure pk = PlasticMeasure::zero(m);
      for (std::size_t c = 0; c < m.num_cells(); ++c) pk.ac[c] = SymTensor::diag(a * std::cos(t), -a * std::cos(t)) + sym2(0, 0, a * std::sin(t));
      seq.push_back(pk);
    }
    strict_tail("rotating", square, seq, p);
  }
  // weak* but not strict: oscillating signs
  {
    const PlasticMeasure p = PlasticMeasure::zero(m);
    std::vector<PlasticMeasure> seq;
    double liminf = std::numeric_limits<double>::infinity();
    for (int k : {2, 4, 8, 16}) {
      PlasticMeasure pk = PlasticMeasure::zero(m);
      for (std::size_t c = 0; c < m.num_cells(); ++c)
        pk.ac[c] = d0 * (std::sin(2 * M_PI * k * (m.centroid(c)[0] + 0.25 / k)) >= 0 ? 1.0 : -1.0);
      seq.push_back(pk);
      liminf = std::min(liminf, dissipation(m, ball, pk));
    }
    const double weak = weakstar_gap(m, seq, p, tests);
    const double margin = liminf - dissipation(m, ball, p);
    ok = ok && margin > 0.5 && weak < 0.1;
    parts.push_back("oscillating margin " + fmt(margin) + " (weak* gap " + fmt(weak) + ")");
  }
  std::string d;
  for (std::size_t i = 0; i < parts.size(); ++i) d += (i ? "; " : "") + parts[i];
  return {ok, d};
}

// ------------------------------------------------------------------ 7

Outcome bogovskii() {
  std::vector<double> ratios;
  double worst = 0.0, trace = 0.0;
  for (int m : {8, 16, 32}) {
    const auto j = cli::run_oracle("manufactured-div", 0, m);
    const Mesh mesh = gen_rectangle({1.0, 1.0}, m, kAllSides);
    Displacement vh = Displacement::zero(mesh);
    const auto& vv = j["cases"]["v_vertices"];
    for (std::size_t i = 0; i < mesh.num_vertices(); ++i) vh.values[i] = Vec(vv[i][0], vv[i][1]);
    const auto psi = divergence(mesh, vh);
    const DivResult r = solve_div({&mesh, psi});
    const auto d = divergence(mesh, r.v);
    std::vector<double> res(d.size());
    for (std::size_t c = 0; c < d.size(); ++c) res[c] = d[c] - psi[c];
    worst = std::max(worst, l2_norm(mesh, res) / l2_norm(mesh, psi));
    const auto bnd = mesh.boundary_vertices();
    for (std::size_t i = 0; i < bnd.size(); ++i)
      if (bnd[i]) trace = std::max(trace, r.v.values[i].norm());
    ratios.push_back(r.ratio);
  }
  const auto [lo, hi] = std::minmax_element(ratios.begin(), ratios.end());
  const double drift = *hi / *lo;
  return {worst <= 1e-8 && trace == 0.0 && drift < 2.0,
          "residual " + fmt(worst) + ", boundary trace " + fmt(trace) + ", ratio drift " + fmt(drift) + " over m = 8, 16, 32"};
}

// ------------------------------------------------------------------ 8

Outcome lifting() {
  auto u0 = [](double x) {
    const double c = 1 - x * x;
    return c * c / std::sqrt(std::abs(x));
  };
  const LiftReport r = lift_trace_cube(u0, power_schedule(0.5, 12));
  const bool finite = std::isfinite(r.l2) && std::isfinite(r.dt_l2) && std::isfinite(r.dn_l1);
  const bool ok = finite && r.l2 <= r.l2_bound && r.dt_l2 <= r.dt_l2_bound && r.dn_l1 <= r.dn_l1_sum * (1 + 1e-12) &&
                  r.max_normal == 0.0;
  return {ok, "L2^2 " + fmt(r.l2) + " <= " + fmt(r.l2_bound) + ", tangential " + fmt(r.dt_l2) + " <= " + fmt(r.dt_l2_bound) +
                  ", normal L1 " + fmt(r.dn_l1) + " <= " + fmt(r.dn_l1_sum) + ", |v.e_n| " + fmt(r.max_normal)};
}

// ------------------------------------------------------------------ 9

Outcome peeling() {
  Scenario s;
  s.mesh = std::make_shared<const Mesh>(gen_rectangle({1.0, 1.0}, 32, kAllSides));
  const Mesh& m = *s.mesh;
  auto beta = [](double x) { return std::clamp(std::min(x - 0.125, 0.875 - x) / 0.125, 0.0, 1.0); };
  auto chi = [](double y) { return std::clamp((0.5 - y) / 0.25, 0.0, 1.0); };
  Displacement v = Displacement::zero(m);
  for (std::size_t i = 0; i < m.num_vertices(); ++i) v.values[i] = Vec(beta(m.vertex(i)[0]) * chi(m.vertex(i)[1]), 0.0);
  const Triplet t = split_triplet(s, s.w(), true);
  const double facet = 0.625 / std::sqrt(2.0);
  std::string d;
  double err = 0.0;
  for (int k : {8, 16, 32}) {
    err = std::abs(peel_boundary(s, t, v, k).strip_tv - facet) / facet;
    d += (d.empty() ? "" : ", ") + ("k = " + std::to_string(k) + ": " + fmt(err));
  }
  return {err <= 0.05, "strip TV rel err " + d};
}

// ------------------------------------------------------------------ 10

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::map<std::string, std::uint64_t> hash_dir(const fs::path& dir) {
  std::map<std::string, std::uint64_t> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    std::ifstream is(e.path(), std::ios::binary);
    std::ostringstream ss;
    ss << is.rdbuf();
    out[e.path().filename().string()] = fnv1a(ss.str());
  }
  return out;
}

Outcome determinism() {
  const fs::path root = fs::temp_directory_path() / ("hencky_acceptance_" + std::to_string(::getpid()));
  std::vector<std::map<std::string, std::uint64_t>> hashes;
  int status = 0;
  for (int run = 0; run < 2; ++run) {
    const fs::path dir = root / std::to_string(run);
    auto spec = [&](const std::string& cmd, const std::string& file) {
      cli::RunSpec s;
      s.command = cmd;
      s.scenario = file.empty() ? "" : kScenarios + "/" + file;
      s.out = dir.string();
      s.seed = 17;
      s.quiet = true;
      return s;
    };
    cli::RunSpec a = spec("solve", "affine_plastic.conf");
    a.levels = {4, 8};
    cli::RunSpec b = spec("recover", "affine_elastic.conf");
    b.schedule = {2, 4};
    cli::RunSpec c = spec("mesh-gen", "lshape.conf");
    c.levels = {4, 8};
    cli::RunSpec o1 = spec("oracle", ""), o2 = spec("oracle", "");
    o1.oracle = "projection-grid";
    o2.oracle = "support-vertices";
    for (const auto& s : {a, b, c, o1, o2}) status |= cli::run(s);
    hashes.push_back(hash_dir(dir));
  }
  fs::remove_all(root);
  const bool same = hashes[0] == hashes[1] && !hashes[0].empty();
  return {same && status == 0, std::to_string(hashes[0].size()) + " files, hashes " + (same ? "identical" : "differ")};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"support function suite", support_suite},
      {"reduced density oracle equivalence", reduced_density_oracle},
      {"exact optimum for affine data", affine_optimum},
      {"relaxation direction per mesh", relaxation_direction},
      {"recovery in the slip regime", slip_recovery},
      {"Reshetnyak continuity", reshetnyak},
      {"divergence operator", bogovskii},
      {"flat trace lifting", lifting},
      {"boundary peeling", peeling},
      {"determinism", determinism}};
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!o.pass) ++failed;
    std::cout << "criterion " << (i + 1) << " " << (o.pass ? "PASS" : "FAIL") << " " << criteria[i].first << ": " << o.detail
              << " [" << std::fixed << std::setprecision(1) << secs << "s]" << std::defaultfloat << std::endl;
  }
  std::cout << (failed == 0 ? "all criteria passed" : std::to_string(failed) + " criteria failed") << std::endl;
  return failed == 0 ? 0 : 1;
}
