#include "hencky/functionals.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace hencky {

// ---------------------------------------------------------------- Datum

Datum Datum::affine(int dim, std::vector<double> matrix_row_major, std::vector<double> offset) {
  if (dim != 2 && dim != 3) throw std::invalid_argument("Datum: dimension must be 2 or 3");
  if (matrix_row_major.size() != static_cast<std::size_t>(dim * dim))
    throw std::invalid_argument("Datum: affine matrix needs n*n entries");
  if (offset.empty()) offset.assign(static_cast<std::size_t>(dim), 0.0);
  if (offset.size() != static_cast<std::size_t>(dim)) throw std::invalid_argument("Datum: offset needs n entries");
  Datum d;
  d.family_ = Family::Affine;
  d.dim_ = dim;
  d.a_ = std::move(matrix_row_major);
  d.b_ = Vec::zero(dim);
  for (int i = 0; i < dim; ++i) d.b_[i] = offset[static_cast<std::size_t>(i)];
  return d;
}

Datum Datum::shear(int dim, double gamma) {
  std::vector<double> a(static_cast<std::size_t>(dim * dim), 0.0);
  a[1] = gamma;
  Datum d = affine(dim, a, {});
  d.family_ = Family::Shear;
  return d;
}

Datum Datum::bump(Vec center, double radius, Vec amplitude) {
  if (!(radius > 0)) throw std::invalid_argument("Datum: bump radius must be positive");
  if (center.dim != amplitude.dim) throw std::invalid_argument("Datum: bump dimension mismatch");
  Datum d;
  d.family_ = Family::Bump;
  d.dim_ = center.dim;
  d.center_ = center;
  d.radius_ = radius;
  d.b_ = amplitude;
  return d;
}

Vec Datum::operator()(const Vec& x) const {
  if (family_ == Family::Bump) {
    const double r2 = (x - center_).dot(x - center_) / (radius_ * radius_);
    if (r2 >= 1.0) return Vec::zero(dim_);
    const double s = 1.0 - r2;
    return (s * s * s) * b_;
  }
  Vec r = b_;
  for (int i = 0; i < dim_; ++i)
    for (int j = 0; j < dim_; ++j) r[i] += a_[static_cast<std::size_t>(i * dim_ + j)] * x[j];
  return r;
}

std::optional<std::vector<double>> Datum::affine_gradient() const {
  if (family_ == Family::Bump) return std::nullopt;
  return a_;
}

SymTensor Datum::sym_gradient_if_affine() const {
  const auto a = affine_gradient();
  if (!a) throw std::logic_error("Datum: not affine");
  return SymTensor::from_matrix(dim_, *a);
}

// ---------------------------------------------------------------- Scenario

Displacement Scenario::w() const {
  return Displacement::interpolate(*mesh, [this](const Vec& x) { return datum(x); });
}

void Scenario::check() const {
  if (!mesh) throw std::invalid_argument("scenario: no mesh");
  if (!mesh->has_gamma0()) throw std::invalid_argument("scenario: Gamma0 is empty");
  if (datum.dim() != mesh->dim()) throw std::invalid_argument("scenario: datum dimension differs from mesh");
}

nlohmann::json to_json(const EnergyBreakdown& e) {
  nlohmann::json j;
  j["elastic"] = e.elastic;
  j["bulk"] = e.bulk;
  j["boundary"] = e.boundary;
  j["total"] = e.feasible ? nlohmann::json(e.total) : nlohmann::json("inf");
  j["feasible"] = e.feasible;
  return j;
}

namespace {

// Amplitude (w - u)_F (.) nu_F as a trace-free tensor; rejects a violated normal trace.
SymTensor boundary_amplitude(const Mesh& mesh, const BoundaryFacet& f, const Displacement& w, const Displacement& u,
                             double tol) {
  const Vec jump = w.facet_average(f, mesh.dim()) - u.facet_average(f, mesh.dim());
  if (std::abs(jump.dot(f.normal)) > tol * std::max(1.0, jump.norm()))
    throw std::invalid_argument("relaxed functional: normal trace constraint (w-u).nu = 0 violated");
  return sym_outer(jump, f.normal).deviator();
}

}  // namespace

EnergyBreakdown eval_F(const Scenario& s, const Triplet& t, double bc_tol) { return eval_F(s, t, s.w(), bc_tol); }

EnergyBreakdown eval_F(const Scenario& s, const Triplet& t, const Displacement& w, double bc_tol) {
  const Mesh& mesh = *s.mesh;
  if (!t.regular || t.p.has_singular_part()) throw std::invalid_argument("eval_F: triplet is not regular");
  if (w.values.size() != mesh.num_vertices()) throw std::invalid_argument("eval_F: datum size mismatch");
  EnergyBreakdown out;
  const auto g0 = mesh.gamma0_vertices();
  for (std::size_t v = 0; v < mesh.num_vertices(); ++v)
    if (g0[v] && (t.u.values[v] - w.values[v]).norm() > bc_tol * std::max(1.0, w.values[v].norm()))
      out.feasible = false;
  const ElasticStrain eu = sym_gradient(mesh, t.u);
  for (std::size_t c = 0; c < mesh.num_cells(); ++c) {
    out.elastic += s.moduli.energy(t.e[c]) * mesh.volume(c);
    SymTensor p = eu[c] - t.e[c];
    require_deviatoric(p, "eval_F: Eu - e");
    out.bulk += s.yield.support(p.deviator()) * mesh.volume(c);
  }
  out.total = out.feasible ? out.elastic + out.bulk : std::numeric_limits<double>::infinity();
  return out;
}

EnergyBreakdown eval_G(const Scenario& s, const Triplet& t, double tol) {
  const Mesh& mesh = *s.mesh;
  if (kinematic_residual(mesh, t) > tol) throw std::invalid_argument("eval_G: Eu != e + p");
  EnergyBreakdown out;
  for (std::size_t c = 0; c < mesh.num_cells(); ++c) {
    out.elastic += s.moduli.energy(t.e[c]) * mesh.volume(c);
    require_deviatoric(t.p.ac[c], "eval_G: plastic density");
    out.bulk += s.yield.support(t.p.ac[c].deviator()) * mesh.volume(c);
  }
  const Displacement w = s.w();
  for (const auto& f : mesh.facets())
    if (f.gamma0) out.boundary += s.yield.support(boundary_amplitude(mesh, f, w, t.u, tol)) * f.measure;
  out.total = out.elastic + out.bulk + out.boundary;
  return out;
}

Triplet split_triplet(const Scenario& s, const Displacement& u, bool regular) {
  const Mesh& mesh = *s.mesh;
  const ReducedDensity f = s.density();
  Triplet t;
  t.u = u;
  t.w = s.w();
  t.regular = regular;
  t.p = PlasticMeasure::zero(mesh);
  const ElasticStrain eu = sym_gradient(mesh, u);
  t.e.resize(mesh.num_cells(), SymTensor(mesh.dim()));
  for (std::size_t c = 0; c < mesh.num_cells(); ++c) {
    const StrainSplit sp = f.split(eu[c]);
    t.p.ac[c] = sp.plastic;
    t.e[c] = eu[c] - sp.plastic;
  }
  if (!regular)
    for (std::size_t i = 0; i < mesh.facets().size(); ++i) {
      const auto& fc = mesh.facets()[i];
      if (fc.gamma0) t.p.facet[i] = boundary_amplitude(mesh, fc, t.w, u, 1e-8);
    }
  return t;
}

ReducedEvaluation eval_G_reduced(const Scenario& s, const Displacement& u, double tol) {
  const Mesh& mesh = *s.mesh;
  ReducedEvaluation r;
  r.triplet = split_triplet(s, u, false);
  for (std::size_t c = 0; c < mesh.num_cells(); ++c) {
    r.energy.elastic += s.moduli.energy(r.triplet.e[c]) * mesh.volume(c);
    r.energy.bulk += s.yield.support(r.triplet.p.ac[c]) * mesh.volume(c);
  }
  for (std::size_t i = 0; i < mesh.facets().size(); ++i) {
    const auto& f = mesh.facets()[i];
    if (f.gamma0) r.energy.boundary += s.yield.support(boundary_amplitude(mesh, f, r.triplet.w, u, tol)) * f.measure;
  }
  r.energy.total = r.energy.elastic + r.energy.bulk + r.energy.boundary;
  return r;
}

}  // namespace hencky
