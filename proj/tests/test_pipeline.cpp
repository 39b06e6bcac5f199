#include <cmath>
#include <sstream>

#include "doctest.h"
#include "hencky/pipeline.hpp"
#include "hencky/solver.hpp"

using namespace hencky;

namespace {

Scenario square(int m, unsigned sides, Datum d) {
  Scenario s;
  s.mesh = std::make_shared<const Mesh>(gen_rectangle({1.0, 1.0}, m, sides));
  s.datum = d;
  return s;
}

Displacement nodal(const Mesh& m, const Datum& d) {
  Displacement u = Displacement::zero(m);
  for (std::size_t i = 0; i < m.num_vertices(); ++i) u.values[i] = d(m.vertex(i));
  return u;
}

// shear datum with the bottom vertices of |x1 - 1/2| <= half slipped tangentially
Triplet slip_triplet(const Scenario& s, double slip, double half) {
  Displacement u = s.w();
  const Mesh& m = *s.mesh;
  for (std::size_t i = 0; i < m.num_vertices(); ++i) {
    const Vec& x = m.vertex(i);
    if (x[1] < 1e-12 && std::abs(x[0] - 0.5) <= half + 1e-12) u.values[i][0] -= slip;
  }
  return eval_G_reduced(s, u).triplet;
}

double max_tr_gap(const Mesh& m, const Triplet& t) {
  const auto div = divergence(m, t.u);
  double g = 0.0;
  for (std::size_t c = 0; c < m.num_cells(); ++c) g = std::max(g, std::abs(t.e[c].trace() - div[c]));
  return g;
}

void check_regular(const Mesh& m, const Triplet& t) {
  CHECK(t.regular);
  CHECK_FALSE(t.p.has_singular_part());
  CHECK(kinematic_residual(m, t) < 1e-10);
  const auto g0 = m.gamma0_vertices();
  for (std::size_t i = 0; i < g0.size(); ++i)
    if (g0[i]) CHECK((t.u.values[i] - t.w.values[i]).norm() < 1e-12);
  for (const auto& p : t.p.ac) CHECK(std::abs(p.trace()) < 1e-12);
}

}  // namespace

TEST_CASE("hierarchy transfers") {
  const auto coarse = std::make_shared<const Mesh>(gen_rectangle({1.0, 1.0}, 2, kAllSides));
  Hierarchy h(coarse);
  const Datum aff = Datum::affine(2, {0.3, -1.0, 2.0, 0.5}, {0.1, 0.2});
  const Displacement a = nodal(*coarse, aff);
  const Displacement f = h.prolong(a, 0, 2);
  const Mesh& fine = *h.level(2);
  CHECK(fine.num_cells() == 16 * coarse->num_cells());
  const Displacement exact = nodal(fine, aff);
  for (std::size_t i = 0; i < f.values.size(); ++i) CHECK((f.values[i] - exact.values[i]).norm() < 1e-14);
  const auto root = h.root_cell(2), mid = h.ancestor(2, 1), up = h.ancestor(1, 0);
  for (std::size_t c = 0; c < root.size(); ++c) {
    CHECK(root[c] == up[static_cast<std::size_t>(mid[c])]);
    CHECK(coarse->locate(fine.centroid(c)) == root[c]);
  }
}

TEST_CASE("pipeline config validation") {
  PipelineConfig c;
  CHECK_NOTHROW(c.check());
  c.schedule = {4, 4};
  CHECK_THROWS_AS(c.check(), std::invalid_argument);
  c.schedule = {};
  CHECK_THROWS_AS(c.check(), std::invalid_argument);
  c = PipelineConfig{};
  c.eps_factor = 0.0;
  CHECK_THROWS_AS(c.check(), std::invalid_argument);
}

TEST_CASE("recovery of an elastic triplet is exact") {
  const Scenario s = square(8, kAllSides, Datum::shear(2, 0.2));
  const Triplet t = eval_G_reduced(s, s.w()).triplet;
  const RecoveryResult r = recover_dirichlet(s, t, PipelineConfig{});
  REQUIRE(r.trace.rows.size() == 4);
  for (std::size_t i = 0; i < r.stages.size(); ++i) {
    const auto& row = r.trace.rows[i];
    CHECK(row.err_u < 1e-12);
    CHECK(row.err_e < 1e-12);
    CHECK(row.tv_pk < 1e-12);
    CHECK(std::abs(row.energy_F - row.energy_G) <= 1e-3 * row.energy_G);
    check_regular(*r.stages[i].mesh, r.stages[i].triplet);
  }
}

TEST_CASE("recovery of the zero triplet is zero") {
  const Scenario s = square(4, kAllSides, Datum::zero(2));
  const Triplet t = eval_G_reduced(s, s.w()).triplet;
  const RecoveryResult r = recover_dirichlet(s, t, PipelineConfig{});
  for (const auto& st : r.stages) {
    for (const Vec& v : st.triplet.u.values) CHECK(v.norm() == 0.0);
    for (const auto& p : st.triplet.p.ac) CHECK(p.norm() == 0.0);
  }
  for (const auto& row : r.trace.rows) CHECK(row.energy_F == 0.0);
}

TEST_CASE("one-sided slip is recovered with its facet variation") {
  const Scenario s = square(16, kAllSides, Datum::shear(2, 0.5));
  const Triplet t = slip_triplet(s, 0.3, 0.125);
  REQUIRE(t.p.has_singular_part());
  const RecoveryResult r = recover_dirichlet(s, t, PipelineConfig{});
  const auto& last = r.trace.rows.back();
  CHECK(last.k == 16);
  CHECK(last.tv_target == doctest::Approx(total_variation(*s.mesh, t.p)));
  CHECK(std::abs(last.tv_pk - last.tv_target) <= 0.05 * last.tv_target);
  CHECK(last.gap <= 0.05);
  CHECK(r.trace.eventually_decreasing());
  CHECK(r.trace.budgets_ok());
  for (std::size_t i = 0; i < r.stages.size(); ++i) {
    check_regular(*r.stages[i].mesh, r.stages[i].triplet);
    CHECK(max_tr_gap(*r.stages[i].mesh, r.stages[i].triplet) < 1e-10);
    CHECK(r.trace.rows[i].div_residual <= 1.0 / r.trace.rows[i].k);
  }
  CHECK(last.err_u < r.trace.rows.front().err_u);

  std::ostringstream csv;
  write_csv(csv, r.trace);
  CHECK(csv.str().rfind("k,err_u,err_e,tv_pk,tv_target,energy_F,energy_G,gap", 0) == 0);
  const auto j = to_json(r.trace);
  CHECK(j["rows"].size() == 4);
  for (const auto& row : j["rows"])
    for (const auto& [key, val] : row.items())
      if (val.is_number()) CHECK(val.get<double>() >= 0.0);
}

TEST_CASE("recovery input validation") {
  const Scenario part = square(4, YMin, Datum::shear(2, 0.5));
  CHECK_THROWS_AS(recover_dirichlet(part, eval_G_reduced(part, part.w()).triplet, PipelineConfig{}), std::invalid_argument);
  const Scenario s = square(4, kAllSides, Datum::shear(2, 0.5));
  const Triplet t = eval_G_reduced(s, s.w()).triplet;
  PipelineConfig c;
  c.k0 = 1;
  CHECK_THROWS_AS(recover_dirichlet(s, t, c), PipelineError);
  c = PipelineConfig{};
  c.eps_factor = 2.0;
  CHECK_THROWS_AS(recover_dirichlet(s, t, c), PipelineError);
}

TEST_CASE("mollification budgets") {
  const Scenario s = square(8, kAllSides, Datum::shear(2, 1.0));
  Displacement u = s.w();
  const Mesh& m = *s.mesh;
  for (std::size_t i = 0; i < m.num_vertices(); ++i) {
    const double x = m.vertex(i)[0], y = m.vertex(i)[1];
    u.values[i] += 0.3 * Vec(std::sin(M_PI * x) * std::sin(M_PI * y), 0.5 * std::sin(2 * M_PI * x) * std::sin(M_PI * y));
  }
  const Triplet t = split_triplet(s, u, true);
  double prev_slack = std::numeric_limits<double>::infinity();
  for (int k : {2, 8, 32}) {
    CAPTURE(k);
    const BudgetResult b = mollify_budget(s, t, k);
    for (const auto& pb : b.patches)
      for (double v : pb.norms) CHECK(v <= pb.bound);
    CHECK(b.tv_input == doctest::Approx(total_variation(m, t.p)));
    CHECK(b.tv <= b.tv_input + b.slack + 1e-12);
    CHECK(b.div_error <= 1.0 / k);
    check_regular(m, b.triplet);
    CHECK(lq_norm(m, difference(b.triplet.u, t.u), 2.0) <= 2.0 / k);
    CHECK(b.slack <= prev_slack * 1.05);
    prev_slack = b.slack;
  }

  const Scenario z = square(4, kAllSides, Datum::zero(2));
  const Triplet t0 = split_triplet(z, z.w(), true);
  const BudgetResult b0 = mollify_budget(z, t0, 4);
  for (const Vec& v : b0.triplet.u.values) CHECK(v.norm() == 0.0);
  CHECK(b0.tv == 0.0);

  Displacement bad = s.w();
  bad.values[0] += Vec(0.1, 0.0);
  CHECK_THROWS_AS(mollify_budget(s, split_triplet(s, bad, false), 4), std::invalid_argument);
}

TEST_CASE("boundary peeling on the bottom side") {
  const Scenario s = square(32, kAllSides, Datum::zero(2));
  const Mesh& m = *s.mesh;
  auto beta = [](double x) { return std::clamp(std::min(x - 0.125, 0.875 - x) / 0.125, 0.0, 1.0); };
  auto chi = [](double y) { return std::clamp((0.5 - y) / 0.25, 0.0, 1.0); };
  Displacement v = Displacement::zero(m);
  for (std::size_t i = 0; i < m.num_vertices(); ++i) v.values[i] = Vec(beta(m.vertex(i)[0]) * chi(m.vertex(i)[1]), 0.0);
  const Triplet t = split_triplet(s, s.w(), true);
  const double facet = 0.625 / std::sqrt(2.0);  // int beta |e1 (.) e2|

  for (int k : {8, 16, 32}) {
    const PeelResult r = peel_boundary(s, t, v, k);
    CHECK(std::abs(r.strip_tv - facet) <= 0.05 * facet);
    CHECK(r.max_trace <= 1e-8);
    CHECK(r.max_normal <= 1e-12);
    CHECK(kinematic_residual(m, r.triplet) < 1e-12);
    CHECK(max_tr_gap(m, r.triplet) < 1e-12);
    const auto bnd = m.boundary_vertices();
    for (std::size_t i = 0; i < bnd.size(); ++i)
      if (bnd[i]) CHECK((r.triplet.u.values[i] - t.u.values[i] - v.values[i]).norm() < 1e-14);
  }
  CHECK_THROWS_AS(peel_boundary(s, t, v, 64), PipelineError);
  CHECK_THROWS_AS(peel_boundary(s, t, v, 2), std::invalid_argument);  // the strip reaches the side walls
  Displacement normal = Displacement::zero(m);
  for (std::size_t i = 0; i < m.num_vertices(); ++i) normal.values[i] = Vec(0.0, beta(m.vertex(i)[0]));
  CHECK_THROWS_AS(peel_boundary(s, t, normal, 16), std::invalid_argument);

  const PeelResult z = peel_boundary(s, t, Displacement::zero(m), 16);
  for (std::size_t i = 0; i < m.num_vertices(); ++i) CHECK((z.triplet.u.values[i] - t.u.values[i]).norm() == 0.0);
  CHECK(z.strip_tv == 0.0);
}

TEST_CASE("peeling a slip restores the boundary condition") {
  const Scenario s = square(16, kAllSides, Datum::shear(2, 0.5));
  const Triplet t = slip_triplet(s, 0.3, 0.125);
  const Mesh& m = *s.mesh;
  const Displacement v = difference(t.w, t.u);  // tangential, supported on the bottom layer
  const PeelResult r = peel_boundary(s, t, v, 16);
  check_regular(m, r.triplet);
  // the strip carries the facet variation into the bulk
  double facet_tv = 0.0;
  for (std::size_t f = 0; f < m.facets().size(); ++f) facet_tv += t.p.facet[f].norm() * m.facets()[f].measure;
  CHECK(r.strip_tv == doctest::Approx(facet_tv).epsilon(0.05));
}

TEST_CASE("flat trace lifting") {
  // u0 in L1 but not L2
  auto u0 = [](double x) {
    const double c = 1 - x * x;
    return c * c / std::sqrt(std::abs(x));
  };
  double prev_dn2 = 0.0, prev_err = std::numeric_limits<double>::infinity();
  for (int levels : {4, 8, 12}) {
    const LiftSchedule sch = power_schedule(0.5, levels);
    const LiftReport r = lift_trace_cube(u0, sch);
    CHECK(r.l2 <= r.l2_bound);
    CHECK(r.dt_l2 <= r.dt_l2_bound);
    CHECK(r.dn_l1 <= r.dn_l1_sum * (1 + 1e-12));
    CHECK(r.max_normal == 0.0);
    CHECK(std::isfinite(r.w11));
    CHECK(r.dn_l2 > 100 * prev_dn2);
    CHECK(r.trace_error.back() < prev_err);
    prev_dn2 = r.dn_l2;
    prev_err = r.trace_error.back();
  }
  CHECK(prev_dn2 > 1e8);

  // constant-in-j schedule reproduces u0 below the first layer
  LiftSchedule c;
  auto bump = [](double x) { return std::exp(-4 * x * x) * (1 - x * x); };
  auto dbump = [](double x) { return std::exp(-4 * x * x) * (-8 * x * (1 - x * x) - 2 * x); };
  for (int j = 0; j <= 5; ++j) {
    c.tau.push_back(std::ldexp(1.0, -j));
    if (j == 0) {
      c.theta.push_back([](double) { return 0.0; });
      c.dtheta.push_back([](double) { return 0.0; });
    } else {
      c.theta.push_back(bump);
      c.dtheta.push_back(dbump);
    }
  }
  const LiftReport rc = lift_trace_cube(bump, c);
  for (std::size_t j = 1; j < rc.trace_error.size(); ++j) CHECK(rc.trace_error[j] == 0.0);
  for (double x : {-0.7, 0.0, 0.4})
    for (double xn : {0.01, 0.2, 0.49}) CHECK(lift_value(c, x, xn)[0] == bump(x));

  const LiftReport rz = lift_trace_cube([](double) { return 0.0; }, power_schedule(0.0, 1));
  CHECK(rz.trace_error.front() == 0.0);
  LiftSchedule zero = c;
  for (auto& f : zero.theta) f = [](double) { return 0.0; };
  for (double x : {-0.5, 0.5}) CHECK(lift_value(zero, x, 0.3).norm() == 0.0);

  LiftSchedule bad = c;
  bad.theta[0] = bump;
  CHECK_THROWS_AS(lift_trace_cube(bump, bad), std::invalid_argument);
  bad = c;
  std::swap(bad.tau[1], bad.tau[2]);
  CHECK_THROWS_AS(lift_trace_cube(bump, bad), std::invalid_argument);
  LiftSchedule osc = c;
  for (std::size_t j = 1; j < osc.theta.size(); ++j)
    if (j % 2 == 0) osc.theta[j] = [](double) { return 0.0; };
  CHECK_THROWS_AS(lift_trace_cube(bump, osc), PipelineError);
  CHECK_THROWS_AS(power_schedule(1.0, 4), std::invalid_argument);
}
