#include <cmath>
#include <sstream>

#include "doctest.h"
#include "hencky/functionals.hpp"
#include "support.hpp"

using namespace hencky;

namespace {

Scenario unit_square(int m, unsigned sides, Datum d, double sy = 1.0) {
  Scenario s;
  s.mesh = std::make_shared<const Mesh>(gen_rectangle({1.0, 1.0}, m, sides));
  s.moduli = ElasticModuli::isotropic(1.0, 1.0);
  s.yield = YieldSet::ball(sy);
  s.datum = d;
  return s;
}

Triplet elastic_triplet(const Scenario& s, const Displacement& u) {
  Triplet t;
  t.u = u;
  t.w = s.w();
  t.e = sym_gradient(*s.mesh, u);
  t.p = PlasticMeasure::zero(*s.mesh);
  t.regular = true;
  return t;
}

SymTensor unit_dev() { return SymTensor::diag(1, -1) * (1.0 / std::sqrt(2.0)); }

}  // namespace

TEST_CASE("eval_F examples") {
  const Scenario s = unit_square(4, kAllSides, Datum::shear(2, 2.0));
  const Triplet t = elastic_triplet(s, s.w());
  const EnergyBreakdown e = eval_F(s, t);
  CHECK(e.feasible);
  CHECK(e.bulk == 0.0);
  CHECK(e.boundary == 0.0);
  double q = 0.0;
  for (std::size_t c = 0; c < s.mesh->num_cells(); ++c) q += s.moduli.energy(t.e[c]) * s.mesh->volume(c);
  CHECK(e.total == doctest::Approx(q));
  // gamma = 2: |xi_D| = sqrt(2), the plastic branch gives sqrt(2) - 1/4
  const EnergyBreakdown opt = eval_F(s, split_triplet(s, s.w(), true));
  CHECK(opt.total == doctest::Approx(std::sqrt(2.0) - 0.25).epsilon(1e-13));
  CHECK(opt.total == doctest::Approx(s.density().value(s.datum.sym_gradient_if_affine())).epsilon(1e-13));
  CHECK(opt.elastic + opt.bulk == doctest::Approx(opt.total));
  Triplet off = t;
  off.u.values[0] += Vec(0.01, 0.0);
  off.e = sym_gradient(*s.mesh, off.u);
  const EnergyBreakdown bad = eval_F(s, off);
  CHECK_FALSE(bad.feasible);
  CHECK(std::isinf(bad.total));
  CHECK(to_json(bad)["total"] == "inf");
}

TEST_CASE("eval_G examples") {
  const Scenario s = unit_square(4, kAllSides, Datum::shear(2, 2.0));
  const Triplet t = split_triplet(s, s.w(), true);
  CHECK(eval_G(s, t).total == doctest::Approx(eval_F(s, t).total).epsilon(1e-14));
  // tangential unit shift on the single Gamma0 facet of length 1
  const double sy = 1.5;
  const Scenario slip = unit_square(1, YMin, Datum::affine(2, {0, 0, 0, 0}, {1.0, 0.0}), sy);
  Triplet z;
  z.u = Displacement::zero(*slip.mesh);
  z.w = slip.w();
  z.e = ElasticStrain(slip.mesh->num_cells(), SymTensor(2));
  z.p = PlasticMeasure::zero(*slip.mesh);
  const EnergyBreakdown g = eval_G(slip, z);
  CHECK(g.boundary == doctest::Approx(sy / std::sqrt(2.0)).epsilon(1e-14));
  CHECK(g.bulk == 0.0);
  CHECK(g.elastic == 0.0);
  const Scenario zero = unit_square(3, kAllSides, Datum::zero(2));
  CHECK(eval_G(zero, elastic_triplet(zero, Displacement::zero(*zero.mesh))).total == 0.0);
  // a normal jump is rejected
  const Scenario normal = unit_square(1, YMin, Datum::affine(2, {0, 0, 0, 0}, {0.0, 1.0}));
  Triplet zn = z;
  zn.w = normal.w();
  CHECK_THROWS_AS(eval_G(normal, zn), std::invalid_argument);
}

TEST_CASE("eval_G_reduced examples and consistency") {
  for (double gamma : {0.2, 2.0}) {
    const Scenario s = unit_square(6, kAllSides, Datum::affine(2, {0.3, gamma, -0.1, 0.4}, {0.2, -0.7}));
    const ReducedEvaluation r = eval_G_reduced(s, s.w());
    CHECK(r.energy.total == doctest::Approx(s.density().value(s.datum.sym_gradient_if_affine())).epsilon(1e-13));
    CHECK(eval_G(s, r.triplet).total == doctest::Approx(r.energy.total).epsilon(1e-12));
  }
  const Scenario z = unit_square(3, kAllSides, Datum::zero(2));
  CHECK(eval_G_reduced(z, Displacement::zero(*z.mesh)).energy.total == 0.0);
  // relaxed triplet with slip on the boundary
  const Scenario s = unit_square(6, kAllSides, Datum::shear(2, 2.0));
  Displacement u = s.w();
  for (std::size_t i = 0; i < u.values.size(); ++i) {
    const Vec& x = s.mesh->vertex(i);
    if (std::abs(x[1] - 1.0) < 1e-12 && x[0] > 1e-12 && x[0] < 1 - 1e-12) u.values[i][0] -= 0.3;
  }
  const ReducedEvaluation r = eval_G_reduced(s, u);
  CHECK(r.energy.boundary > 0.0);
  validate(*s.mesh, r.triplet);
  CHECK(eval_G(s, r.triplet).total == doctest::Approx(r.energy.total).epsilon(1e-12));
}

TEST_CASE("reduced functional is a lower bound for F") {
  std::mt19937 rng(17);
  std::uniform_real_distribution<double> u(-0.2, 0.2), th(0.0, 1.0);
  const Scenario s = unit_square(6, kAllSides, Datum::shear(2, 1.0));
  const auto bnd = s.mesh->boundary_vertices();
  for (int trial = 0; trial < 20; ++trial) {
    Displacement v = s.w();
    for (std::size_t i = 0; i < v.values.size(); ++i)
      if (!bnd[i]) v.values[i] += Vec(u(rng), u(rng));
    Triplet t = elastic_triplet(s, v);
    const double theta = th(rng);
    for (auto& e : t.e) e -= theta * e.deviator();
    for (std::size_t c = 0; c < t.e.size(); ++c) t.p.ac[c] = sym_gradient(*s.mesh, v)[c] - t.e[c];
    CHECK(eval_G_reduced(s, v).energy.total <= eval_F(s, t).total + 1e-14);
  }
}

TEST_CASE("Reshetnyak continuity on strictly converging sequences") {
  const Scenario s = unit_square(8, kAllSides, Datum::zero(2), 1.3);
  const Mesh& m = *s.mesh;
  const TestFamily tests(m);
  PlasticMeasure p = PlasticMeasure::zero(m);
  for (std::size_t c = 0; c < m.num_cells(); ++c) p.ac[c] = unit_dev() * m.centroid(c)[0];
  p.facet[0] = unit_dev() * 0.5;
  PlasticMeasure osc = PlasticMeasure::zero(m);
  for (std::size_t c = 0; c < m.num_cells(); ++c) osc.ac[c] = unit_dev() * (c % 2 ? 1.0 : -1.0);
  const std::size_t cell0 = static_cast<std::size_t>(m.facets()[0].cell);
  const double ratio = m.facets()[0].measure / m.volume(cell0);
  const double hp = dissipation(m, s.yield, p);
  for (int which = 0; which < 3; ++which) {
    double last_gap = 0.0, last_strict = 0.0;
    for (int k = 1; k <= (1 << 22); k *= 4) {
      PlasticMeasure pk = p;
      const double h = 1.0 / k;
      if (which == 0) {
        for (auto& t : pk.ac) t *= 1 + h;
        for (auto& t : pk.facet) t *= 1 + h;
      } else if (which == 1) {
        for (std::size_t c = 0; c < m.num_cells(); ++c) pk.ac[c] += h * osc.ac[c];
      } else {
        pk.facet[0] *= 1 - h;
        pk.ac[cell0] += (h * ratio) * p.facet[0];
      }
      last_gap = std::abs(dissipation(m, s.yield, pk) - hp);
      last_strict = strict_gap(m, pk, p, tests);
    }
    CHECK(last_strict < 1e-5);
    CHECK(last_gap < 1e-6);
  }
}

TEST_CASE("scenario parser") {
  std::istringstream good(R"(# shear test
[mesh]
shape = rectangle
widths = 1 1
m = 4
gamma0 = bottom top
[material]
mu = 2
kappa = 3
[yield]
type = ball
radius = 0.5
[datum]
family = shear
gamma = 2
[solver]
mode = hard
tol = 1e-6
[pipeline]
schedule = 2 4 8
)");
  const ScenarioFile f = parse_scenario(good);
  CHECK(f.m == 4);
  CHECK(f.gamma0 == (YMin | YMax));
  CHECK(f.moduli.mu() == 2.0);
  CHECK(f.yield.ball_radius() == 0.5);
  CHECK(f.solver.mode == "hard");
  CHECK(f.pipeline.schedule == std::vector<int>{2, 4, 8});
  const Scenario s = f.make_scenario();
  CHECK(s.datum(Vec(0.0, 0.5))[0] == doctest::Approx(1.0));

  auto line_of = [](const std::string& text) {
    std::istringstream in(text);
    try {
      parse_scenario(in);
    } catch (const ParseError& e) {
      return e.line();
    }
    return -1;
  };
  CHECK(line_of("[mesh]\nm = 4\nbogus = 1\n") == 3);
  CHECK(line_of("[mesh]\n\nm = four\n") == 3);
  CHECK(line_of("[nowhere]\n") == 1);
  CHECK(line_of("[yield]\ntype = ball\nradius = -1\n") == 3);
  CHECK(line_of("[datum]\nfamily = spiral\n") == 2);
  CHECK(line_of("[pipeline]\nschedule = 4 2\n") == 2);
  CHECK(line_of("[mesh]\nm = 4\nm = 5\n") == 3);
  CHECK(line_of("m = 4\n") == 1);

  std::istringstream poly("[yield]\ntype = polytope\nvertex = 1 -1 0\nvertex = -1 1 0\n[datum]\nfamily = affine\nmatrix = 0 1 0 0\n");
  const ScenarioFile pf = parse_scenario(poly);
  CHECK_FALSE(pf.yield.is_ball());
  CHECK(pf.datum.affine_gradient().has_value());
}
