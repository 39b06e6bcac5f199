#include "hencky/fields.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <stdexcept>

#include "hencky/quadrature.hpp"

namespace hencky {

Displacement Displacement::zero(const Mesh& mesh) {
  return Displacement{std::vector<Vec>(mesh.num_vertices(), Vec::zero(mesh.dim()))};
}

Displacement Displacement::interpolate(const Mesh& mesh, const std::function<Vec(const Vec&)>& f) {
  Displacement d;
  d.values.reserve(mesh.num_vertices());
  for (const auto& x : mesh.vertices()) d.values.push_back(f(x));
  return d;
}

Vec Displacement::at(const Mesh& mesh, std::size_t cell, const std::array<double, 4>& bary) const {
  Vec r = Vec::zero(mesh.dim());
  for (int a = 0; a <= mesh.dim(); ++a) r += bary[static_cast<std::size_t>(a)] * values[mesh.cell(cell)[a]];
  return r;
}

Vec Displacement::facet_average(const BoundaryFacet& f, int dim) const {
  Vec r = Vec::zero(dim);
  for (int a = 0; a < dim; ++a) r += values[f.v[a]];
  return (1.0 / dim) * r;
}

PlasticMeasure PlasticMeasure::zero(const Mesh& mesh) {
  return PlasticMeasure{std::vector<SymTensor>(mesh.num_cells(), SymTensor(mesh.dim())),
                        std::vector<SymTensor>(mesh.facets().size(), SymTensor(mesh.dim()))};
}

bool PlasticMeasure::has_singular_part() const {
  return std::any_of(facet.begin(), facet.end(), [](const SymTensor& t) { return t.norm() > 0.0; });
}

ElasticStrain sym_gradient(const Mesh& mesh, const Displacement& u) {
  const int n = mesh.dim();
  if (u.values.size() != mesh.num_vertices()) throw std::invalid_argument("sym_gradient: size mismatch");
  ElasticStrain e(mesh.num_cells(), SymTensor(n));
  for (std::size_t c = 0; c < mesh.num_cells(); ++c) {
    SymTensor g(n);
    for (int a = 0; a <= n; ++a) g += sym_outer(u.values[mesh.cell(c)[a]], mesh.grad(c, a));
    e[c] = g;
  }
  return e;
}

std::vector<double> divergence(const Mesh& mesh, const Displacement& u) {
  std::vector<double> d(mesh.num_cells(), 0.0);
  for (std::size_t c = 0; c < mesh.num_cells(); ++c)
    for (int a = 0; a <= mesh.dim(); ++a) d[c] += u.values[mesh.cell(c)[a]].dot(mesh.grad(c, a));
  return d;
}

double total_variation(const Mesh& mesh, const PlasticMeasure& p) {
  double s = 0.0;
  for (std::size_t c = 0; c < p.ac.size(); ++c) s += p.ac[c].norm() * mesh.volume(c);
  for (std::size_t f = 0; f < p.facet.size(); ++f) s += p.facet[f].norm() * mesh.facets()[f].measure;
  return s;
}

double dissipation(const Mesh& mesh, const YieldSet& k, const PlasticMeasure& p) {
  double s = 0.0;
  for (std::size_t c = 0; c < p.ac.size(); ++c) s += k.support(p.ac[c]) * mesh.volume(c);
  for (std::size_t f = 0; f < p.facet.size(); ++f)
    if (p.facet[f].norm() > 0.0) s += k.support(p.facet[f]) * mesh.facets()[f].measure;
  return s;
}

std::vector<SymTensor> slip_amplitudes(const Mesh& mesh, const Displacement& w, const Displacement& u) {
  std::vector<SymTensor> amp(mesh.facets().size(), SymTensor(mesh.dim()));
  for (std::size_t i = 0; i < mesh.facets().size(); ++i) {
    const auto& f = mesh.facets()[i];
    if (!f.gamma0) continue;
    amp[i] = sym_outer(w.facet_average(f, mesh.dim()) - u.facet_average(f, mesh.dim()), f.normal);
  }
  return amp;
}

Vec slip_from_amplitude(const SymTensor& amplitude, const Vec& normal) { return 2.0 * amplitude.apply(normal); }

double kinematic_residual(const Mesh& mesh, const Triplet& t) {
  const ElasticStrain eu = sym_gradient(mesh, t.u);
  double worst = 0.0;
  for (std::size_t c = 0; c < mesh.num_cells(); ++c)
    worst = std::max(worst, (eu[c] - t.e[c] - t.p.ac[c]).norm() / std::max(1.0, eu[c].norm()));
  return worst;
}

void validate(const Mesh& mesh, const Triplet& t, double tol) {
  const int n = mesh.dim();
  auto fail = [](const std::string& what) { throw std::invalid_argument("triplet: " + what); };
  if (t.u.values.size() != mesh.num_vertices() || t.w.values.size() != mesh.num_vertices())
    fail("displacement size mismatch");
  if (t.e.size() != mesh.num_cells() || t.p.ac.size() != mesh.num_cells()) fail("cell field size mismatch");
  if (t.p.facet.size() != mesh.facets().size()) fail("facet field size mismatch");
  for (const auto& p : t.p.ac)
    if (std::abs(p.trace()) > tol * std::max(1.0, p.norm())) fail("plastic density is not trace-free");
  if (kinematic_residual(mesh, t) > tol) fail("Eu != e + p");
  const auto amp = slip_amplitudes(mesh, t.w, t.u);
  for (std::size_t i = 0; i < mesh.facets().size(); ++i) {
    const auto& f = mesh.facets()[i];
    const SymTensor& pf = t.p.facet[i];
    if (std::abs(pf.trace()) > tol * std::max(1.0, pf.norm())) fail("facet amplitude is not trace-free");
    if (!f.gamma0) {
      if (pf.norm() > 0.0) fail("singular part outside Gamma0");
      continue;
    }
    if (t.regular) {
      if (pf.norm() > 0.0) fail("regular triplet with a singular part");
    } else {
      if ((pf - amp[i]).norm() > tol * std::max(1.0, amp[i].norm())) fail("facet amplitude differs from (w-u) . nu");
      const Vec jump = t.w.facet_average(f, n) - t.u.facet_average(f, n);
      if (std::abs(jump.dot(f.normal)) > tol * std::max(1.0, jump.norm())) fail("normal trace constraint violated");
    }
  }
  if (t.regular) {
    const auto g0 = mesh.gamma0_vertices();
    for (std::size_t v = 0; v < mesh.num_vertices(); ++v)
      if (g0[v] && (t.u.values[v] - t.w.values[v]).norm() > tol * std::max(1.0, t.w.values[v].norm()))
        fail("u != w on Gamma0");
  }
}

// ---------------------------------------------------------------- norms

double lq_norm(const Mesh& mesh, const Displacement& u, double q) {
  if (!(q >= 1.0)) throw std::invalid_argument("lq_norm: q must be >= 1");
  double s = 0.0;
  for (std::size_t c = 0; c < mesh.num_cells(); ++c) {
    double cell = 0.0;
    for (const auto& qp : cell_rule(mesh.dim())) cell += qp.weight * std::pow(u.at(mesh, c, qp.bary).norm(), q);
    s += cell * mesh.volume(c);
  }
  return std::pow(s, 1.0 / q);
}

double l2_norm(const Mesh& mesh, const ElasticStrain& e) {
  double s = 0.0;
  for (std::size_t c = 0; c < e.size(); ++c) s += e[c].ddot(e[c]) * mesh.volume(c);
  return std::sqrt(s);
}

double l2_norm(const Mesh& mesh, const std::vector<double>& v) {
  double s = 0.0;
  for (std::size_t c = 0; c < v.size(); ++c) s += v[c] * v[c] * mesh.volume(c);
  return std::sqrt(s);
}

Displacement difference(const Displacement& a, const Displacement& b) {
  Displacement d = a;
  for (std::size_t i = 0; i < d.values.size(); ++i) d.values[i] -= b.values[i];
  return d;
}

ElasticStrain difference(const ElasticStrain& a, const ElasticStrain& b) {
  ElasticStrain d = a;
  for (std::size_t i = 0; i < d.size(); ++i) d[i] -= b[i];
  return d;
}

// ---------------------------------------------------------------- weak* diagnostics

TestFamily::TestFamily(const Mesh& mesh, int count, unsigned seed, double cutoff_width)
    : mesh_(&mesh), width_(cutoff_width) {
  for (const auto& f : mesh.facets())
    if (!f.gamma0) free_.push_back(f);
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::normal_distribution<double> g;
  const int n = mesh.dim();
  for (int j = 0; j < count; ++j) {
    std::array<double, 10> c{};
    for (auto& v : c) v = u(rng);
    coeffs_.push_back(c);
    SymTensor d(n);
    for (int k = 0; k < d.size(); ++k) d.component(k) = g(rng);
    dirs_.push_back(d * (1.0 / d.norm()));
  }
}

double TestFamily::cutoff(const Vec& x) const {
  if (free_.empty()) return 1.0;
  double d = std::numeric_limits<double>::infinity();
  for (const auto& f : free_) d = std::min(d, facet_distance(*mesh_, f, x));
  const double t = std::min(1.0, d / width_);
  return t * t * (3.0 - 2.0 * t);
}

SymTensor TestFamily::eval(std::size_t j, const Vec& x) const {
  const auto& c = coeffs_[j];
  double poly;
  if (x.dim == 2) {
    poly = c[0] + c[1] * x[0] + c[2] * x[1] + c[3] * x[0] * x[0] + c[4] * x[0] * x[1] + c[5] * x[1] * x[1];
  } else {
    poly = c[0] + c[1] * x[0] + c[2] * x[1] + c[3] * x[2] + c[4] * x[0] * x[0] + c[5] * x[1] * x[1] +
           c[6] * x[2] * x[2] + c[7] * x[0] * x[1] + c[8] * x[0] * x[2] + c[9] * x[1] * x[2];
  }
  return dirs_[j] * (poly * cutoff(x));
}

double pairing(const Mesh& mesh, const PlasticMeasure& p, const std::function<SymTensor(const Vec&)>& phi) {
  const int n = mesh.dim();
  double s = 0.0;
  for (std::size_t c = 0; c < mesh.num_cells(); ++c) {
    if (p.ac[c].norm() == 0.0) continue;
    const auto& cell = mesh.cell(c);
    double acc = 0.0;
    for (const auto& qp : cell_rule(n)) {
      Vec x = Vec::zero(n);
      for (int a = 0; a <= n; ++a) x += qp.bary[static_cast<std::size_t>(a)] * mesh.vertex(cell[a]);
      acc += qp.weight * phi(x).ddot(p.ac[c]);
    }
    s += acc * mesh.volume(c);
  }
  for (std::size_t i = 0; i < mesh.facets().size(); ++i) {
    if (p.facet[i].norm() == 0.0) continue;
    const auto& f = mesh.facets()[i];
    double acc = 0.0;
    for (const auto& qp : facet_rule(n)) {
      Vec x = Vec::zero(n);
      for (int a = 0; a < n; ++a) x += qp.bary[static_cast<std::size_t>(a)] * mesh.vertex(f.v[a]);
      acc += qp.weight * phi(x).ddot(p.facet[i]);
    }
    s += acc * f.measure;
  }
  return s;
}

namespace {

PlasticMeasure subtract(const PlasticMeasure& a, const PlasticMeasure& b) {
  PlasticMeasure d = a;
  for (std::size_t i = 0; i < d.ac.size(); ++i) d.ac[i] -= b.ac[i];
  for (std::size_t i = 0; i < d.facet.size(); ++i) d.facet[i] -= b.facet[i];
  return d;
}

}  // namespace

double weakstar_gap(const Mesh& mesh, const PlasticMeasure& pk, const PlasticMeasure& p, const TestFamily& tests) {
  const PlasticMeasure d = subtract(pk, p);
  double worst = 0.0;
  for (std::size_t j = 0; j < tests.size(); ++j)
    worst = std::max(worst, std::abs(pairing(mesh, d, [&](const Vec& x) { return tests.eval(j, x); })));
  return worst;
}

double weakstar_gap(const Mesh& mesh, const std::vector<PlasticMeasure>& seq, const PlasticMeasure& p,
                    const TestFamily& tests) {
  if (seq.empty()) throw std::invalid_argument("weakstar_gap: empty sequence");
  return weakstar_gap(mesh, seq.back(), p, tests);
}

double strict_gap(const Mesh& mesh, const PlasticMeasure& pk, const PlasticMeasure& p, const TestFamily& tests) {
  return weakstar_gap(mesh, pk, p, tests) + std::abs(total_variation(mesh, pk) - total_variation(mesh, p));
}

double strict_gap(const Mesh& mesh, const std::vector<PlasticMeasure>& seq, const PlasticMeasure& p,
                  const TestFamily& tests) {
  if (seq.empty()) throw std::invalid_argument("strict_gap: empty sequence");
  return strict_gap(mesh, seq.back(), p, tests);
}

// ---------------------------------------------------------------- snapshot

nlohmann::json to_json(const SymTensor& t) {
  nlohmann::json a = nlohmann::json::array();
  for (int k = 0; k < t.size(); ++k) a.push_back(t.component(k));
  return a;
}

SymTensor sym_from_json(int dim, const nlohmann::json& j) {
  const auto v = j.get<std::vector<double>>();
  return SymTensor::from_components(dim, v);
}

namespace {

nlohmann::json vec_list(const Displacement& d, int n) {
  nlohmann::json a = nlohmann::json::array();
  for (const auto& v : d.values) a.push_back(std::vector<double>(v.x.begin(), v.x.begin() + n));
  return a;
}

Displacement vec_list_from(const nlohmann::json& a, int n) {
  Displacement d;
  for (const auto& row : a) {
    const auto v = row.get<std::vector<double>>();
    if (static_cast<int>(v.size()) != n) throw std::invalid_argument("snapshot: wrong vector length");
    d.values.push_back(n == 2 ? Vec(v[0], v[1]) : Vec(v[0], v[1], v[2]));
  }
  return d;
}

std::string hex(std::uint64_t h) {
  std::ostringstream os;
  os << std::hex << h;
  return os.str();
}

}  // namespace

nlohmann::json snapshot(const Mesh& mesh, const Triplet& t) {
  const int n = mesh.dim();
  nlohmann::json j;
  j["mesh_checksum"] = hex(mesh.checksum());
  j["dim"] = n;
  j["regular"] = t.regular;
  j["u"] = vec_list(t.u, n);
  j["w"] = vec_list(t.w, n);
  j["e"] = nlohmann::json::array();
  for (const auto& e : t.e) j["e"].push_back(to_json(e));
  j["p_ac"] = nlohmann::json::array();
  for (const auto& p : t.p.ac) j["p_ac"].push_back(to_json(p));
  j["p_singular"] = nlohmann::json::array();
  for (std::size_t i = 0; i < t.p.facet.size(); ++i)
    if (mesh.facets()[i].gamma0) j["p_singular"].push_back({{"facet", i}, {"amplitude", to_json(t.p.facet[i])}});
  return j;
}

Triplet triplet_from_snapshot(const Mesh& mesh, const nlohmann::json& j) {
  const int n = mesh.dim();
  if (j.at("mesh_checksum").get<std::string>() != hex(mesh.checksum()))
    throw std::invalid_argument("snapshot: mesh checksum mismatch");
  Triplet t;
  t.regular = j.at("regular").get<bool>();
  t.u = vec_list_from(j.at("u"), n);
  t.w = vec_list_from(j.at("w"), n);
  for (const auto& e : j.at("e")) t.e.push_back(sym_from_json(n, e));
  t.p = PlasticMeasure::zero(mesh);
  t.p.ac.clear();
  for (const auto& p : j.at("p_ac")) t.p.ac.push_back(sym_from_json(n, p));
  for (const auto& s : j.at("p_singular")) {
    const auto i = s.at("facet").get<std::size_t>();
    if (i >= t.p.facet.size()) throw std::invalid_argument("snapshot: facet index out of range");
    t.p.facet[i] = sym_from_json(n, s.at("amplitude"));
  }
  return t;
}

}  // namespace hencky
