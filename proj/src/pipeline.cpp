#include "hencky/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>

#include "hencky/bogovskii.hpp"
#include "hencky/parallel.hpp"

namespace hencky {

// ---------------------------------------------------------------- hierarchy

Hierarchy::Hierarchy(std::shared_ptr<const Mesh> coarse) {
  if (!coarse) throw std::invalid_argument("Hierarchy: null mesh");
  meshes_.push_back(std::move(coarse));
  parent_.emplace_back();
  vertex_edge_.emplace_back();
}

const std::shared_ptr<const Mesh>& Hierarchy::level(int l) {
  if (l < 0) throw std::invalid_argument("Hierarchy: negative level");
  while (static_cast<int>(meshes_.size()) <= l) {
    Refinement r = refine(*meshes_.back());
    parent_.push_back(std::move(r.parent_cell));
    vertex_edge_.push_back(std::move(r.vertex_edge));
    meshes_.push_back(std::make_shared<const Mesh>(std::move(r.mesh)));
  }
  return meshes_[static_cast<std::size_t>(l)];
}

Displacement Hierarchy::prolong(const Displacement& u, int from, int to) {
  if (to < from) throw std::invalid_argument("Hierarchy::prolong: target is coarser");
  level(to);
  Displacement cur = u;
  for (int l = from + 1; l <= to; ++l) {
    const auto& ve = vertex_edge_[static_cast<std::size_t>(l)];
    Displacement next;
    next.values.resize(ve.size());
    for (std::size_t i = 0; i < ve.size(); ++i) {
      const auto [a, b] = ve[i];
      next.values[i] = 0.5 * (cur.values[static_cast<std::size_t>(a)] + cur.values[static_cast<std::size_t>(b)]);
    }
    cur = std::move(next);
  }
  return cur;
}

std::vector<int> Hierarchy::ancestor(int fine, int coarse) {
  if (fine < coarse) throw std::invalid_argument("Hierarchy::ancestor: levels reversed");
  level(fine);
  std::vector<int> a(meshes_[static_cast<std::size_t>(fine)]->num_cells());
  for (std::size_t c = 0; c < a.size(); ++c) a[c] = static_cast<int>(c);
  for (int l = fine; l > coarse; --l)
    for (int& c : a) c = parent_[static_cast<std::size_t>(l)][static_cast<std::size_t>(c)];
  return a;
}

std::vector<int> Hierarchy::root_cell(int l) { return ancestor(l, 0); }

namespace {

// 7-point degree-5 rule for the kernel (4/pi)(1 - |z|^2)^3 on the unit disk:
// moments 1, 1/5, 1/15 fixed by the centre and a hexagon at radius 1/sqrt(3).
struct KernelPoint {
  double x, y, w;
};

const std::array<KernelPoint, 7>& kernel_rule() {
  static const std::array<KernelPoint, 7> rule = [] {
    std::array<KernelPoint, 7> r{};
    r[0] = {0.0, 0.0, 0.4};
    const double a = 1.0 / std::sqrt(3.0);
    for (int q = 0; q < 6; ++q) r[static_cast<std::size_t>(q + 1)] = {a * std::cos(M_PI * q / 3.0), a * std::sin(M_PI * q / 3.0), 0.1};
    return r;
  }();
  return rule;
}

// Cover weights sampled on a lattice and read back bilinearly.
class WeightLattice {
 public:
  WeightLattice(const Mesh& mesh, const Cover& cover) : np_(cover.patches().size()) {
    lo_ = mesh.vertex(0);
    Vec hi = lo_;
    for (const Vec& v : mesh.vertices())
      for (int i = 0; i < 2; ++i) {
        lo_[i] = std::min(lo_[i], v[i]);
        hi[i] = std::max(hi[i], v[i]);
      }
    g_ = cover.radius() / 32.0;
    for (int i = 0; i < 2; ++i) n_[i] = static_cast<int>(std::ceil((hi[i] - lo_[i]) / g_)) + 1;
    val_.assign(static_cast<std::size_t>(n_[0]) * static_cast<std::size_t>(n_[1]) * np_, 0.0);
    for (int b = 0; b < n_[1]; ++b)
      for (int a = 0; a < n_[0]; ++a) {
        const Vec x(lo_[0] + a * g_, lo_[1] + b * g_);
        std::vector<double> w;
        try {
          w = cover.weights(x);
        } catch (const std::logic_error&) {
          continue;
        }
        std::copy(w.begin(), w.end(), val_.begin() + static_cast<std::ptrdiff_t>(index(a, b)));
      }
  }

  Vec grad(std::size_t j, const Vec& y) const {
    const double fx = (y[0] - lo_[0]) / g_, fy = (y[1] - lo_[1]) / g_;
    if (fx < 0 || fy < 0 || fx > n_[0] - 1 || fy > n_[1] - 1) return Vec::zero(2);
    const int a = std::min(static_cast<int>(fx), n_[0] - 2), b = std::min(static_cast<int>(fy), n_[1] - 2);
    const double s = fx - a, t = fy - b;
    const double v00 = val_[index(a, b) + j], v10 = val_[index(a + 1, b) + j], v01 = val_[index(a, b + 1) + j],
                 v11 = val_[index(a + 1, b + 1) + j];
    return Vec(((1 - t) * (v10 - v00) + t * (v11 - v01)) / g_, ((1 - s) * (v01 - v00) + s * (v11 - v10)) / g_);
  }

  double operator()(std::size_t j, const Vec& y) const {
    const double fx = (y[0] - lo_[0]) / g_, fy = (y[1] - lo_[1]) / g_;
    if (fx < 0 || fy < 0 || fx > n_[0] - 1 || fy > n_[1] - 1) return 0.0;
    const int a = std::min(static_cast<int>(fx), n_[0] - 2), b = std::min(static_cast<int>(fy), n_[1] - 2);
    const double s = fx - a, t = fy - b;
    return (1 - s) * (1 - t) * val_[index(a, b) + j] + s * (1 - t) * val_[index(a + 1, b) + j] +
           (1 - s) * t * val_[index(a, b + 1) + j] + s * t * val_[index(a + 1, b + 1) + j];
  }

 private:
  std::size_t np_;
  Vec lo_;
  double g_ = 1.0;
  std::array<int, 2> n_{2, 2};
  std::vector<double> val_;
  std::size_t index(int a, int b) const {
    return (static_cast<std::size_t>(b) * static_cast<std::size_t>(n_[0]) + static_cast<std::size_t>(a)) * np_;
  }
};

struct Sample {
  Vec u = Vec::zero(2);
  SymTensor eD{2};
  double tr = 0.0;
  double gu = 0.0;  // grad phi_j . (u - w)

  void add(double w, const Sample& o) {
    u += w * o.u;
    eD += w * o.eD;
    tr += w * o.tr;
    gu += w * o.gu;
  }
};

// sum_j (phi_j (u - w, e - Ew)) evaluated at x - shift d_j.
class TranslatedSource {
 public:
  TranslatedSource(const Mesh& mesh, const Cover& cover, const WeightLattice& phi, const Triplet& t, const Displacement& w,
                   double shift)
      : mesh_(mesh), cover_(cover), phi_(phi), shift_(shift) {
    du_ = difference(t.u, w);
    const ElasticStrain ew = sym_gradient(mesh, w);
    de_.resize(mesh.num_cells());
    for (std::size_t c = 0; c < de_.size(); ++c) de_[c] = t.e[c] - ew[c];
  }

  Sample operator()(const Vec& x) const {
    Sample out;
    const auto& patches = cover_.patches();
    for (std::size_t j = 0; j < patches.size(); ++j) {
      const Vec y = x - shift_ * patches[j].direction;
      const double f = phi_(j, y);
      if (f <= 0.0 && phi_.grad(j, y).norm() == 0.0) continue;
      const int c = mesh_.locate(y);
      if (c < 0) continue;
      const auto cell = static_cast<std::size_t>(c);
      const auto bary = mesh_.barycentric(cell, y);
      Sample s;
      s.u = du_.at(mesh_, cell, bary);
      s.eD = de_[cell].deviator();
      s.tr = de_[cell].trace();
      out.add(f, s);
      out.gu += phi_.grad(j, y).dot(s.u);
    }
    return out;
  }

 private:
  const Mesh& mesh_;
  const Cover& cover_;
  const WeightLattice& phi_;
  double shift_;
  Displacement du_;
  ElasticStrain de_;
};

// min over boundary-patch samples of dist(x + shift d_j, boundary) / shift; 0 when a sample leaves the domain.
double translation_depth(const Mesh& mesh, const Cover& cover, double shift) {
  std::vector<Vec> samples = mesh.vertices();
  for (std::size_t c = 0; c < mesh.num_cells(); ++c) {
    const auto& t = mesh.cell(c);
    samples.push_back(mesh.centroid(c));
    for (int a = 0; a < 3; ++a) samples.push_back(0.5 * (mesh.vertex(static_cast<std::size_t>(t[a])) + mesh.vertex(static_cast<std::size_t>(t[(a + 1) % 3]))));
  }
  for (const auto& f : mesh.facets())
    for (int k = 1; k < 8; ++k)
      samples.push_back((1.0 - k / 8.0) * mesh.vertex(static_cast<std::size_t>(f.v[0])) + (k / 8.0) * mesh.vertex(static_cast<std::size_t>(f.v[1])));
  const auto& patches = cover.patches();
  double depth = std::numeric_limits<double>::infinity();
  for (const Vec& x : samples) {
    const auto w = cover.weights(x);
    for (std::size_t j = 0; j < patches.size(); ++j) {
      if (w[j] <= 0.0 || patches[j].kind == CoverDirection::Kind::Interior) continue;
      const Vec y = x + shift * patches[j].direction;
      if (!mesh.contains(y, 0.0)) return 0.0;
      depth = std::min(depth, mesh.distance_to_boundary(y) / shift);
    }
  }
  return depth;
}

double lq_cells(const Mesh& mesh, const std::vector<double>& f, double q) {
  double s = 0.0;
  for (std::size_t c = 0; c < f.size(); ++c) s += std::pow(std::abs(f[c]), q) * mesh.volume(c);
  return std::pow(s, 1.0 / q);
}

double integral(const Mesh& mesh, const std::vector<double>& f) {
  double s = 0.0;
  for (std::size_t c = 0; c < f.size(); ++c) s += f[c] * mesh.volume(c);
  return s;
}

double tv_cells(const Mesh& mesh, const std::vector<SymTensor>& p) {
  double s = 0.0;
  for (std::size_t c = 0; c < p.size(); ++c) s += p[c].norm() * mesh.volume(c);
  return s;
}

}  // namespace

// ---------------------------------------------------------------- recovery

void PipelineConfig::check() const {
  if (schedule.empty()) throw std::invalid_argument("PipelineConfig: empty schedule");
  for (std::size_t i = 0; i < schedule.size(); ++i) {
    if (schedule[i] < 1) throw std::invalid_argument("PipelineConfig: schedule entries must be positive");
    if (i > 0 && schedule[i] <= schedule[i - 1]) throw std::invalid_argument("PipelineConfig: schedule must increase strictly");
  }
  if (k0 < 0) throw std::invalid_argument("PipelineConfig: k0 must be nonnegative");
  if (!(eps_factor > 0.0)) throw std::invalid_argument("PipelineConfig: eps_factor must be positive");
  if (!(budget_scale > 0.0)) throw std::invalid_argument("PipelineConfig: budget_scale must be positive");
  if (max_refine < 0 || max_refine > 8) throw std::invalid_argument("PipelineConfig: max_refine out of [0, 8]");
  if (div_refine < 0) throw std::invalid_argument("PipelineConfig: div_refine must be nonnegative");
}

bool RecoveryTrace::budgets_ok() const {
  return std::all_of(rows.begin(), rows.end(), [](const RecoveryRow& r) { return r.budget_ok; });
}

bool RecoveryTrace::eventually_decreasing() const {
  if (rows.size() < 2) return false;
  std::vector<double> a;
  for (const auto& r : rows) a.push_back(std::abs(r.energy_F - r.energy_G));
  const auto peak = static_cast<std::size_t>(std::max_element(a.begin(), a.end()) - a.begin());
  if (peak + 1 >= a.size()) return false;
  for (std::size_t i = peak + 1; i < a.size(); ++i)
    if (a[i] > a[i - 1]) return false;
  return true;
}

void write_csv(std::ostream& os, const RecoveryTrace& trace) {
  os << "k,err_u,err_e,tv_pk,tv_target,energy_F,energy_G,gap,weak_gap,strict_gap,div_residual,budget_ok\n";
  os << std::setprecision(12);
  for (const auto& r : trace.rows)
    os << r.k << ',' << r.err_u << ',' << r.err_e << ',' << r.tv_pk << ',' << r.tv_target << ',' << r.energy_F << ','
       << r.energy_G << ',' << r.gap << ',' << r.weak_gap << ',' << r.strict_gap << ',' << r.div_residual << ','
       << (r.budget_ok ? 1 : 0) << '\n';
}

nlohmann::json to_json(const RecoveryTrace& trace) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : trace.rows)
    rows.push_back({{"k", r.k},
                    {"shift", r.shift},
                    {"eps", r.eps},
                    {"levels", r.levels},
                    {"err_u", r.err_u},
                    {"err_e", r.err_e},
                    {"tv_pk", r.tv_pk},
                    {"tv_target", r.tv_target},
                    {"energy_F", r.energy_F},
                    {"energy_G", r.energy_G},
                    {"gap", r.gap},
                    {"weak_gap", r.weak_gap},
                    {"strict_gap", r.strict_gap},
                    {"div_residual", r.div_residual},
                    {"budgets", r.budgets},
                    {"budget", r.budget},
                    {"budget_ok", r.budget_ok}});
  return {{"rows", rows}, {"budgets_ok", trace.budgets_ok()}, {"eventually_decreasing", trace.eventually_decreasing()}};
}

RecoveryResult recover_dirichlet(const Scenario& s, const Triplet& t, const PipelineConfig& cfg) {
  cfg.check();
  s.check();
  const Mesh& mesh = *s.mesh;
  if (mesh.dim() != 2) throw std::invalid_argument("recover_dirichlet: only n = 2 is supported");
  for (const auto& f : mesh.facets())
    if (!f.gamma0) throw std::invalid_argument("recover_dirichlet: Gamma0 must be the whole boundary");
  validate(mesh, t);
  const Displacement w = t.w.values.size() == mesh.num_vertices() ? t.w : s.w();
  const int n = 2;
  const double q = static_cast<double>(n) / (n - 1);

  const Cover cover = build_cover(mesh);
  const int k0 = cfg.k0 > 0 ? cfg.k0 : cover.k0();
  if (k0 < cover.k0()) throw PipelineError("recover_dirichlet: k0 below the cover's admissible scale");
  const WeightLattice phi(mesh, cover);

  const double energy_G = eval_G(s, t).total;
  const double tv_target = total_variation(mesh, t.p);
  const TestFamily tests(mesh);
  std::vector<double> base(tests.size());
  for (std::size_t j = 0; j < tests.size(); ++j) base[j] = pairing(mesh, t.p, [&](const Vec& x) { return tests.eval(j, x); });

  Hierarchy hier(s.mesh);
  RecoveryResult out;
  for (int k : cfg.schedule) {
    RecoveryRow row;
    row.k = k;
    row.shift = 1.0 / (static_cast<double>(k) * k0);
    row.eps = cfg.eps_factor * row.shift;
    if (!(row.eps < 0.5 * translation_depth(mesh, cover, row.shift) * row.shift))
      throw PipelineError("recover_dirichlet: mollifier radius exceeds half the translation depth at k = " + std::to_string(k));
    int r = 0;
    while (r < cfg.max_refine && mesh.max_edge() / std::ldexp(1.0, r) > row.shift) ++r;
    row.levels = r;
    const auto fine_ptr = hier.level(r);
    const Mesh& fine = *fine_ptr;
    const TranslatedSource src(mesh, cover, phi, t, w, row.shift);
    const auto& rule = kernel_rule();
    auto mollified = [&](const Vec& x, Sample& centre) {
      Sample acc;
      for (std::size_t i = 0; i < rule.size(); ++i) {
        const Sample v = src(x - row.eps * Vec(rule[i].x, rule[i].y));
        if (i == 0) centre = v;
        acc.add(rule[i].w, v);
      }
      return acc;
    };

    // vertex fields
    const auto bnd = fine.boundary_vertices();
    Displacement uhat = Displacement::zero(fine), utr = Displacement::zero(fine);
    parallel_for(fine.num_vertices(), [&](std::size_t i) {
      if (bnd[i]) return;
      Sample c;
      uhat.values[i] = mollified(fine.vertex(i), c).u;
      utr.values[i] = c.u;
    }, 1024);
    // cell fields
    std::vector<SymTensor> ehat(fine.num_cells(), SymTensor(n)), etr(fine.num_cells(), SymTensor(n));
    std::vector<double> psi(fine.num_cells(), 0.0), rhs(fine.num_cells(), 0.0);
    parallel_for(fine.num_cells(), [&](std::size_t c) {
      Sample cs;
      const Sample m = mollified(fine.centroid(c), cs);
      ehat[c] = m.eD.deviator();
      etr[c] = cs.eD.deviator();
      rhs[c] = -m.gu;
    }, 1024);

    // divergence correction: psi - div uhat is the mollified cover term -sum_j grad phi_j . (u - w)
    const std::vector<double> div_hat = divergence(fine, uhat);
    const double rhs_mean = integral(fine, rhs) / fine.total_volume();
    for (std::size_t c = 0; c < rhs.size(); ++c) {
      rhs[c] -= rhs_mean;
      psi[c] = div_hat[c] + rhs[c];
    }
    const int lb = std::min(r, cfg.div_refine);
    const auto& bmesh = *hier.level(lb);
    std::vector<double> rhs_b(bmesh.num_cells(), 0.0);
    const auto anc = hier.ancestor(r, lb);
    for (std::size_t c = 0; c < rhs.size(); ++c) rhs_b[static_cast<std::size_t>(anc[c])] += rhs[c] * fine.volume(c);
    for (std::size_t c = 0; c < rhs_b.size(); ++c) rhs_b[c] /= bmesh.volume(c);
    const DivResult dr = solve_div({&bmesh, mean_project(rhs_b, bmesh)});
    const Displacement v = hier.prolong(dr.v, lb, r);

    // reassembly
    const Displacement wf = hier.prolong(w, 0, r);
    Displacement corr = uhat;
    for (std::size_t i = 0; i < corr.values.size(); ++i) corr.values[i] += v.values[i];
    Triplet tk;
    tk.u = wf;
    for (std::size_t i = 0; i < tk.u.values.size(); ++i) tk.u.values[i] += corr.values[i];
    tk.w = wf;
    tk.regular = true;
    tk.p = PlasticMeasure::zero(fine);
    const ElasticStrain eu = sym_gradient(fine, tk.u), ew = sym_gradient(fine, wf);
    const std::vector<double> div_k = divergence(fine, corr);
    tk.e.resize(fine.num_cells());
    for (std::size_t c = 0; c < tk.e.size(); ++c) {
      const SymTensor e = ew[c] + ehat[c] + (div_k[c] / n) * SymTensor::identity(n);
      tk.p.ac[c] = (eu[c] - e).deviator();
      tk.e[c] = eu[c] - tk.p.ac[c];
    }

    // measurements
    Scenario sf = s;
    sf.mesh = fine_ptr;
    row.energy_F = eval_F(sf, tk, wf).total;
    row.energy_G = energy_G;
    row.gap = std::abs(row.energy_F - energy_G) / std::max(std::abs(energy_G), std::numeric_limits<double>::min());
    row.err_u = lq_norm(fine, difference(tk.u, hier.prolong(t.u, 0, r)), q);
    const auto root = hier.root_cell(r);
    ElasticStrain de(fine.num_cells());
    for (std::size_t c = 0; c < de.size(); ++c) de[c] = tk.e[c] - t.e[static_cast<std::size_t>(root[c])];
    row.err_e = l2_norm(fine, de);
    row.tv_pk = total_variation(fine, tk.p);
    row.tv_target = tv_target;
    for (std::size_t j = 0; j < tests.size(); ++j)
      row.weak_gap = std::max(row.weak_gap, std::abs(pairing(fine, tk.p, [&](const Vec& x) { return tests.eval(j, x); }) - base[j]));
    row.strict_gap = row.weak_gap + std::abs(row.tv_pk - tv_target);
    std::vector<double> dres(psi.size());
    for (std::size_t c = 0; c < dres.size(); ++c) dres[c] = psi[c] - div_k[c];
    row.div_residual = l2_norm(fine, dres);

    // budgets against the unmollified translated fields
    const std::vector<double> div_tr = divergence(fine, utr);
    const ElasticStrain euh = sym_gradient(fine, uhat), eut = sym_gradient(fine, utr);
    std::vector<double> ddiv(psi.size());
    ElasticStrain dee(fine.num_cells());
    std::vector<SymTensor> ph(fine.num_cells()), pt(fine.num_cells());
    for (std::size_t c = 0; c < ddiv.size(); ++c) {
      ddiv[c] = div_hat[c] - div_tr[c];
      dee[c] = ehat[c] - etr[c];
      ph[c] = euh[c].deviator() - ehat[c];
      pt[c] = eut[c].deviator() - etr[c];
    }
    row.budgets = {lq_norm(fine, difference(uhat, utr), q), lq_cells(fine, ddiv, q), l2_norm(fine, dee),
                   std::abs(tv_cells(fine, ph) - tv_cells(fine, pt))};
    row.budget = cfg.budget_scale / k;
    row.budget_ok = std::all_of(row.budgets.begin(), row.budgets.end(), [&](double b) { return b <= row.budget; });

    out.trace.rows.push_back(row);
    out.stages.push_back({fine_ptr, std::move(tk)});
  }
  return out;
}

// ---------------------------------------------------------------- interior mollification

namespace {

double smoothstep(double t) {
  if (t <= 0.0) return 0.0;
  if (t >= 1.0) return 1.0;
  return t * t * t * (10.0 - 15.0 * t + 6.0 * t * t);
}

// Dyadic distance layers: phi_0 = 1 - S(t), phi_i = S(t - i + 1) - S(t - i), phi_L = S(t - L + 1),
// t = log2(rho0 / d). Patch i < L lives on rho0 2^-(i+1) <= d <= rho0 2^-(i-1).
class Layers {
 public:
  Layers(const Mesh& mesh, double rho0, int last) : mesh_(mesh), rho0_(rho0), last_(last) {}

  int last() const { return last_; }
  double inner(int i) const { return rho0_ * std::ldexp(1.0, -(i + 1)); }

  double phi(int i, const Vec& x) const {
    const double d = mesh_.distance_to_boundary(x);
    if (d <= 0.0) return i == last_ ? 1.0 : 0.0;
    const double t = std::log2(rho0_ / d);
    if (i == 0) return 1.0 - smoothstep(t);
    if (i == last_) return smoothstep(t - i + 1);
    return smoothstep(t - i + 1) - smoothstep(t - i);
  }

  Vec grad(int i, const Vec& x) const {
    const double h = 1e-7 * rho0_;
    return Vec((phi(i, x + Vec(h, 0.0)) - phi(i, x - Vec(h, 0.0))) / (2 * h),
               (phi(i, x + Vec(0.0, h)) - phi(i, x - Vec(0.0, h))) / (2 * h));
  }

 private:
  const Mesh& mesh_;
  double rho0_;
  int last_;
};

// phi_i times the fields of a triplet at a point; zero outside the domain.
struct PatchSample {
  Vec u = Vec::zero(2);
  SymTensor g{2};  // grad phi_i (.) u
  SymTensor e{2};
  SymTensor p{2};

  void add(double w, const PatchSample& o) {
    u += w * o.u;
    g += w * o.g;
    e += w * o.e;
    p += w * o.p;
  }
};

}  // namespace

BudgetResult mollify_budget(const Scenario& s, const Triplet& t, int k) {
  s.check();
  const Mesh& mesh = *s.mesh;
  if (mesh.dim() != 2) throw std::invalid_argument("mollify_budget: only n = 2 is supported");
  if (k < 1) throw std::invalid_argument("mollify_budget: k must be positive");
  validate(mesh, t);
  const Displacement w = t.w.values.size() == mesh.num_vertices() ? t.w : s.w();
  const Displacement du = difference(t.u, w);
  const auto g0 = mesh.gamma0_vertices();
  double scale = 1.0;
  for (const Vec& v : du.values) scale = std::max(scale, v.norm());
  for (std::size_t i = 0; i < g0.size(); ++i)
    if (g0[i] && du.values[i].norm() > 1e-12 * scale)
      throw std::invalid_argument("mollify_budget: u must equal w on Gamma0");
  const ElasticStrain ew = sym_gradient(mesh, w);
  ElasticStrain de(mesh.num_cells());
  for (std::size_t c = 0; c < de.size(); ++c) de[c] = t.e[c] - ew[c];

  double inr = 0.0;
  for (const Vec& x : mesh.vertices()) inr = std::max(inr, mesh.distance_to_boundary(x));
  const double rho0 = 0.5 * inr;
  int last = 1;
  while (rho0 * std::ldexp(1.0, 1 - last) > 0.25 * mesh.max_edge()) ++last;
  const Layers layers(mesh, rho0, last);
  const double q = 2.0;  // n / (n - 1)

  auto sample = [&](int i, const Vec& y) {
    PatchSample out;
    const int c = mesh.locate(y);
    if (c < 0) return out;
    const double f = layers.phi(i, y);
    const Vec gf = layers.grad(i, y);
    if (f == 0.0 && gf.norm() == 0.0) return out;
    const auto cell = static_cast<std::size_t>(c);
    const Vec u = du.at(mesh, cell, mesh.barycentric(cell, y));
    out.u = f * u;
    out.g = sym_outer(gf, u);
    out.e = f * de[cell];
    out.p = f * t.p.ac[cell];
    return out;
  };
  const auto& rule = kernel_rule();
  auto mollified = [&](int i, const Vec& x, double eps) {
    PatchSample acc;
    for (const auto& r : rule) acc.add(r.w, sample(i, x - eps * Vec(r.x, r.y)));
    return acc;
  };

  const std::size_t nv = mesh.num_vertices(), nc = mesh.num_cells();
  Displacement uhat = Displacement::zero(mesh);
  std::vector<SymTensor> pk(nc, SymTensor(2)), cut(nc, SymTensor(2));
  std::vector<double> psi(nc, 0.0);
  BudgetResult out;
  for (int i = 0; i <= last; ++i) {
    PatchBudget pb;
    pb.d = i == last ? 0.0 : layers.inner(i);
    pb.bound = std::ldexp(1.0 / k, -i);
    std::vector<Vec> ub(nv, Vec::zero(2));
    std::vector<PatchSample> cb(nc);
    if (i == last) {
      // boundary layer, kept as is
      for (std::size_t v = 0; v < nv; ++v) ub[v] = sample(i, mesh.vertex(v)).u;
      for (std::size_t c = 0; c < nc; ++c) cb[c] = sample(i, mesh.centroid(c));
    } else {
      std::vector<Vec> u0(nv);
      std::vector<PatchSample> c0(nc);
      for (std::size_t v = 0; v < nv; ++v) u0[v] = sample(i, mesh.vertex(v)).u;
      for (std::size_t c = 0; c < nc; ++c) c0[c] = sample(i, mesh.centroid(c));
      double eps = 0.25 * pb.d;
      bool ok = false;
      for (; pb.halvings <= 40; ++pb.halvings, eps *= 0.5) {
        parallel_for(nv, [&](std::size_t v) { ub[v] = mollified(i, mesh.vertex(v), eps).u; }, 256);
        parallel_for(nc, [&](std::size_t c) { cb[c] = mollified(i, mesh.centroid(c), eps); }, 256);
        Displacement diff = Displacement::zero(mesh);
        for (std::size_t v = 0; v < nv; ++v) diff.values[v] = ub[v] - u0[v];
        std::vector<double> gd(nc);
        ElasticStrain ed(nc);
        double tv_m = 0.0, tv_0 = 0.0;
        for (std::size_t c = 0; c < nc; ++c) {
          gd[c] = (cb[c].g - c0[c].g).norm();
          ed[c] = cb[c].e - c0[c].e;
          tv_m += cb[c].p.norm() * mesh.volume(c);
          tv_0 += c0[c].p.norm() * mesh.volume(c);
        }
        pb.norms = {lq_norm(mesh, diff, q), lq_cells(mesh, gd, q), l2_norm(mesh, ed), std::abs(tv_m - tv_0)};
        if (std::all_of(pb.norms.begin(), pb.norms.end(), [&](double b) { return b <= pb.bound; })) {
          ok = true;
          break;
        }
      }
      if (!ok) throw PipelineError("mollify_budget: no admissible radius for layer " + std::to_string(i));
      pb.eps = eps;
    }
    for (std::size_t v = 0; v < nv; ++v) uhat.values[v] += ub[v];
    for (std::size_t c = 0; c < nc; ++c) {
      pk[c] += cb[c].p;
      cut[c] += cb[c].g.deviator();
      psi[c] += cb[c].e.trace();
    }
    out.patches.push_back(pb);
  }

  // divergence correction
  const std::vector<double> div_hat = divergence(mesh, uhat);
  const double mean = (integral(mesh, psi) - integral(mesh, div_hat)) / mesh.total_volume();
  std::vector<double> rhs(nc);
  for (std::size_t c = 0; c < nc; ++c) {
    psi[c] -= mean;
    rhs[c] = psi[c] - div_hat[c];
  }
  const DivResult dr = solve_div({&mesh, mean_project(rhs, mesh)});
  const ElasticStrain ev = sym_gradient(mesh, dr.v);

  Triplet& tk = out.triplet;
  tk.u = w;
  for (std::size_t v = 0; v < nv; ++v) tk.u.values[v] += uhat.values[v] + dr.v.values[v];
  tk.w = w;
  tk.regular = true;
  tk.p = PlasticMeasure::zero(mesh);
  const ElasticStrain eu = sym_gradient(mesh, tk.u);
  tk.e.resize(nc);
  double cut_tv = 0.0, ev_tv = 0.0;
  for (std::size_t c = 0; c < nc; ++c) {
    tk.p.ac[c] = (pk[c] + cut[c] + ev[c].deviator()).deviator();
    tk.e[c] = eu[c] - tk.p.ac[c];
    cut_tv += cut[c].norm() * mesh.volume(c);
    ev_tv += ev[c].deviator().norm() * mesh.volume(c);
  }
  out.tv = total_variation(mesh, tk.p);
  out.tv_input = total_variation(mesh, t.p);
  out.slack = cut_tv + ev_tv;
  for (const auto& pb : out.patches) out.slack += pb.norms[3];
  const std::vector<double> div_u = divergence(mesh, t.u), div_k = divergence(mesh, tk.u);
  std::vector<double> dd(nc);
  for (std::size_t c = 0; c < nc; ++c) dd[c] = div_k[c] - div_u[c];
  out.div_error = l2_norm(mesh, dd);
  return out;
}

// ---------------------------------------------------------------- boundary peeling

PeelResult peel_boundary(const Scenario& s, const Triplet& t, const Displacement& v, int k) {
  s.check();
  const Mesh& mesh = *s.mesh;
  if (mesh.dim() != 2) throw std::invalid_argument("peel_boundary: only n = 2 is supported");
  if (k < 1) throw std::invalid_argument("peel_boundary: k must be positive");
  validate(mesh, t);
  if (v.values.size() != mesh.num_vertices()) throw std::invalid_argument("peel_boundary: v has the wrong size");
  const double strip = 1.0 / k;
  const auto bnd = mesh.boundary_vertices();
  double layer = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < bnd.size(); ++i)
    if (!bnd[i]) layer = std::min(layer, mesh.distance_to_boundary(mesh.vertex(i)));
  if (strip < layer * (1.0 - 1e-12))
    throw PipelineError("peel_boundary: strip 1/k = " + std::to_string(strip) + " is thinner than one cell layer");

  double vmax = 0.0;
  for (const Vec& a : v.values) vmax = std::max(vmax, a.norm());
  const Displacement w = t.w.values.size() == mesh.num_vertices() ? t.w : s.w();
  const ElasticStrain ev = sym_gradient(mesh, v);
  const std::size_t nc = mesh.num_cells();

  // sub-triangle centroids: 64 equal-area points per cell
  constexpr int sub = 8;
  std::vector<std::array<double, 3>> bary;
  for (int a = 0; a < sub; ++a)
    for (int b = 0; a + b < sub; ++b) {
      bary.push_back({(a + 1.0 / 3) / sub, (b + 1.0 / 3) / sub, 1.0 - (a + b + 2.0 / 3) / sub});
      if (a + b < sub - 1) bary.push_back({(a + 2.0 / 3) / sub, (b + 2.0 / 3) / sub, 1.0 - (a + b + 4.0 / 3) / sub});
    }

  PeelResult out;
  std::vector<SymTensor> pk(nc, SymTensor(2));
  for (std::size_t c = 0; c < nc; ++c) {
    const auto& cell = mesh.cell(c);
    SymTensor grad_part(2);
    double eta_avg = 0.0;
    for (const auto& l : bary) {
      Vec x = Vec::zero(2), vx = Vec::zero(2);
      for (int a = 0; a < 3; ++a) {
        const auto vi = static_cast<std::size_t>(cell[static_cast<std::size_t>(a)]);
        x += l[static_cast<std::size_t>(a)] * mesh.vertex(vi);
        vx += l[static_cast<std::size_t>(a)] * v.values[vi];
      }
      const double d = mesh.distance_to_boundary(x);
      if (d >= strip) continue;
      eta_avg += 1.0 - k * d;
      const Vec gd = -1.0 * mesh.facets()[static_cast<std::size_t>(mesh.nearest_facet(x))].normal;
      out.max_normal = std::max(out.max_normal, std::abs(vx.dot(gd)));
      grad_part += sym_outer(-static_cast<double>(k) * gd, vx);
    }
    const double inv = 1.0 / static_cast<double>(bary.size());
    grad_part = inv * grad_part;
    eta_avg *= inv;
    out.max_trace = std::max(out.max_trace, std::abs(grad_part.trace()));
    out.strip_tv += grad_part.norm() * mesh.volume(c);
    pk[c] = t.p.ac[c] + eta_avg * ev[c].deviator() + grad_part.deviator();
  }
  if (out.max_normal > 1e-8 * std::max(vmax, 1.0))
    throw std::invalid_argument("peel_boundary: v is not tangential in the boundary strip");

  Triplet& tk = out.triplet;
  tk.u = t.u;
  for (std::size_t i = 0; i < bnd.size(); ++i)
    tk.u.values[i] += std::max(0.0, 1.0 - k * mesh.distance_to_boundary(mesh.vertex(i))) * v.values[i];
  tk.w = w;
  tk.p = PlasticMeasure::zero(mesh);
  tk.p.ac = pk;
  tk.p.facet = slip_amplitudes(mesh, w, tk.u);
  tk.regular = !tk.p.has_singular_part();
  const ElasticStrain eu = sym_gradient(mesh, tk.u);
  tk.e.resize(nc);
  for (std::size_t c = 0; c < nc; ++c) tk.e[c] = eu[c] - tk.p.ac[c];
  return out;
}

// ---------------------------------------------------------------- flat trace lifting

namespace {

// Gauss-Legendre nodes and weights on [0, 1].
std::vector<std::pair<double, double>> gauss01(int n) {
  std::vector<std::pair<double, double>> out;
  for (int i = 1; i <= n; ++i) {
    double x = std::cos(M_PI * (i - 0.25) / (n + 0.5)), dp = 1.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    out.push_back({0.5 * (1.0 - x), 1.0 / ((1.0 - x * x) * dp * dp)});
  }
  return out;
}

// Quadrature on (-1, 1) graded geometrically towards 0.
const std::vector<std::pair<double, double>>& graded_rule() {
  static const std::vector<std::pair<double, double>> rule = [] {
    std::vector<std::pair<double, double>> r;
    const auto g = gauss01(10);
    auto interval = [&](double a, double b) {
      for (const auto& [x, w] : g) {
        r.push_back({a + (b - a) * x, (b - a) * w});
        r.push_back({-(a + (b - a) * x), (b - a) * w});
      }
    };
    interval(0.0, std::ldexp(1.0, -60));
    for (int i = 60; i > 0; --i) interval(std::ldexp(1.0, -i), std::ldexp(1.0, 1 - i));
    return r;
  }();
  return rule;
}

void check_schedule(const LiftSchedule& sch) {
  if (sch.tau.empty() || sch.tau.size() != sch.theta.size() || sch.theta.size() != sch.dtheta.size())
    throw std::invalid_argument("lift: tau, theta and dtheta must have the same nonzero length");
  for (std::size_t j = 0; j < sch.tau.size(); ++j) {
    if (!(sch.tau[j] > 0.0) || sch.tau[0] > 1.0) throw std::invalid_argument("lift: heights must lie in (0, 1]");
    if (j > 0 && !(sch.tau[j] < sch.tau[j - 1])) throw std::invalid_argument("lift: heights must decrease strictly");
    if (!sch.theta[j] || !sch.dtheta[j]) throw std::invalid_argument("lift: empty profile");
  }
  for (const auto& [x, w] : graded_rule())
    if (sch.theta[0](x) != 0.0) throw std::invalid_argument("lift: theta_0 must vanish");
}

}  // namespace

Vec lift_value(const LiftSchedule& sch, double x1, double xn) {
  const auto& tau = sch.tau;
  if (xn >= tau.front()) return Vec(0.0, 0.0);
  if (xn < tau.back()) return Vec(sch.theta.back()(x1), 0.0);
  std::size_t j = 0;
  while (!(xn >= tau[j + 1])) ++j;
  const double a = sch.theta[j](x1), b = sch.theta[j + 1](x1);
  return Vec(a + (xn - tau[j]) / (tau[j + 1] - tau[j]) * (b - a), 0.0);
}

LiftReport lift_trace_cube(const std::function<double(double)>& u0, const LiftSchedule& sch) {
  check_schedule(sch);
  const auto& rule = graded_rule();
  const auto gs = gauss01(6);
  const std::size_t nl = sch.tau.size();
  LiftReport rep;
  std::vector<double> inc(nl - 1, 0.0);
  // slabs tau_{j+1} <= x_n < tau_j, then the constant bottom layer below tau_last
  for (std::size_t j = 0; j < nl; ++j) {
    const bool bottom = j + 1 == nl;
    const double hi = sch.tau[j], lo = bottom ? 0.0 : sch.tau[j + 1], h = hi - lo;
    const auto& fa = sch.theta[j];
    const auto& fb = bottom ? sch.theta[j] : sch.theta[j + 1];
    const auto& da = sch.dtheta[j];
    const auto& db = bottom ? sch.dtheta[j] : sch.dtheta[j + 1];
    for (const auto& [x, w] : rule) {
      const double a = fa(x), b = fb(x), a1 = da(x), b1 = db(x);
      rep.l2_bound += w * h * (a * a + b * b);
      rep.dt_l2_bound += w * h * (a1 * a1 + b1 * b1);
      if (!bottom) {
        inc[j] += w * std::abs(a - b);
        rep.dn_l2 += w * (a - b) * (a - b) / h;
      }
      const double dn = bottom ? 0.0 : (b - a) / h;
      for (const auto& [s, ws] : gs) {
        const double xn = hi - s * h;
        const double val = lift_value(sch, x, xn)[0];
        const double dt = (1 - s) * a1 + s * b1;
        rep.l2 += w * ws * h * val * val;
        rep.dt_l2 += w * ws * h * dt * dt;
        rep.dn_l1 += w * ws * h * std::abs(dn);
        rep.w11 += w * ws * h * (std::abs(val) + std::sqrt(dt * dt + dn * dn));
        rep.max_normal = std::max(rep.max_normal, std::abs(lift_value(sch, x, xn)[1]));
      }
    }
  }
  for (double d : inc) rep.dn_l1_sum += d;
  if (!std::isfinite(rep.l2_bound) || !std::isfinite(rep.dt_l2_bound) || !std::isfinite(rep.dn_l1_sum))
    throw PipelineError("lift: schedule norms are not finite");
  // increments of a summable schedule must eventually shrink
  if (inc.size() >= 4) {
    const double peak = *std::max_element(inc.begin(), inc.end());
    if (peak > 0.0 && inc.back() > 0.5 * peak) throw PipelineError("lift: increments of theta do not decay");
  }
  for (std::size_t j = 0; j < nl; ++j) {
    double err = 0.0;
    for (const auto& [x, w] : rule) err += w * std::abs(lift_value(sch, x, sch.tau[j])[0] - u0(x));
    rep.heights.push_back(sch.tau[j]);
    rep.trace_error.push_back(err);
  }
  return rep;
}

LiftSchedule power_schedule(double a, int levels) {
  if (!(a >= 0.0 && a < 1.0)) throw std::invalid_argument("power_schedule: exponent must lie in [0, 1)");
  if (levels < 1 || levels > 18) throw std::invalid_argument("power_schedule: levels must lie in [1, 18]");
  LiftSchedule sch;
  for (int j = 0; j <= levels; ++j) {
    sch.tau.push_back(std::pow(8.0, -j));
    if (j == 0) {
      sch.theta.push_back([](double) { return 0.0; });
      sch.dtheta.push_back([](double) { return 0.0; });
      continue;
    }
    const double d2 = std::ldexp(1.0, -2 * j);
    sch.theta.push_back([a, d2](double x) {
      const double c = 1.0 - x * x;
      return std::pow(x * x + d2, -0.5 * a) * c * c;
    });
    sch.dtheta.push_back([a, d2](double x) {
      const double c = 1.0 - x * x, r = x * x + d2;
      return -a * x * std::pow(r, -0.5 * a - 1.0) * c * c - 4.0 * x * c * std::pow(r, -0.5 * a);
    });
  }
  return sch;
}

}  // namespace hencky
