#include "hencky/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>

#include <Eigen/Dense>

namespace hencky {

namespace {

using FacetKey = std::array<int, 3>;

FacetKey sorted_key(std::array<int, 3> v, int n) {
  if (n == 2) {
    v[2] = -1;
    if (v[0] > v[1]) std::swap(v[0], v[1]);
  } else {
    std::sort(v.begin(), v.end());
  }
  return v;
}

double seg_distance(const Vec& x, const Vec& a, const Vec& b) {
  const Vec ab = b - a;
  const double l2 = ab.dot(ab);
  double t = l2 > 0.0 ? (x - a).dot(ab) / l2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return (x - (a + t * ab)).norm();
}

Vec cross(const Vec& a, const Vec& b) {
  return Vec(a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]);
}

// Closest point on triangle abc (Ericson, Real-Time Collision Detection 5.1.5).
double tri_distance(const Vec& p, const Vec& a, const Vec& b, const Vec& c) {
  const Vec ab = b - a, ac = c - a, ap = p - a;
  const double d1 = ab.dot(ap), d2 = ac.dot(ap);
  if (d1 <= 0 && d2 <= 0) return ap.norm();
  const Vec bp = p - b;
  const double d3 = ab.dot(bp), d4 = ac.dot(bp);
  if (d3 >= 0 && d4 <= d3) return bp.norm();
  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0 && d1 >= 0 && d3 <= 0) return (p - (a + (d1 / (d1 - d3)) * ab)).norm();
  const Vec cp = p - c;
  const double d5 = ab.dot(cp), d6 = ac.dot(cp);
  if (d6 >= 0 && d5 <= d6) return cp.norm();
  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0 && d2 >= 0 && d6 <= 0) return (p - (a + (d2 / (d2 - d6)) * ac)).norm();
  const double va = d3 * d6 - d5 * d4;
  if (va <= 0 && (d4 - d3) >= 0 && (d5 - d6) >= 0) {
    const double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
    return (p - (b + w * (c - b))).norm();
  }
  const double denom = 1.0 / (va + vb + vc);
  const double v = vb * denom, w = vc * denom;
  return (p - (a + v * ab + w * ac)).norm();
}

}  // namespace

double facet_distance(const Mesh& m, const BoundaryFacet& f, const Vec& x) {
  if (m.dim() == 2) return seg_distance(x, m.vertex(f.v[0]), m.vertex(f.v[1]));
  return tri_distance(x, m.vertex(f.v[0]), m.vertex(f.v[1]), m.vertex(f.v[2]));
}

// ---------------------------------------------------------------- Locator

Locator::Locator(const Mesh& mesh) {
  const int n = mesh.dim();
  lo_ = Vec::zero(n);
  hi_ = Vec::zero(n);
  for (int d = 0; d < n; ++d) {
    lo_[d] = std::numeric_limits<double>::infinity();
    hi_[d] = -std::numeric_limits<double>::infinity();
  }
  for (const auto& v : mesh.vertices())
    for (int d = 0; d < n; ++d) {
      lo_[d] = std::min(lo_[d], v[d]);
      hi_[d] = std::max(hi_[d], v[d]);
    }
  const double per_axis = std::pow(static_cast<double>(mesh.num_cells()), 1.0 / n);
  for (int d = 0; d < n; ++d) n_[d] = std::max(1, static_cast<int>(std::ceil(per_axis / 2.0)));
  buckets_.assign(static_cast<std::size_t>(n_[0] * n_[1] * n_[2]), {});
  auto bucket_of = [&](double x, int d) {
    const double w = hi_[d] - lo_[d];
    int i = w > 0 ? static_cast<int>(std::floor((x - lo_[d]) / w * n_[d])) : 0;
    return std::clamp(i, 0, n_[d] - 1);
  };
  for (std::size_t c = 0; c < mesh.num_cells(); ++c) {
    std::array<int, 3> b0{0, 0, 0}, b1{0, 0, 0};
    for (int d = 0; d < n; ++d) {
      double mn = std::numeric_limits<double>::infinity(), mx = -mn;
      for (int a = 0; a <= n; ++a) {
        const double x = mesh.vertex(mesh.cell(c)[a])[d];
        mn = std::min(mn, x);
        mx = std::max(mx, x);
      }
      const double pad = 1e-9 * (hi_[d] - lo_[d] + 1.0);
      b0[d] = bucket_of(mn - pad, d);
      b1[d] = bucket_of(mx + pad, d);
    }
    for (int i = b0[0]; i <= b1[0]; ++i)
      for (int j = b0[1]; j <= b1[1]; ++j)
        for (int k = b0[2]; k <= b1[2]; ++k)
          buckets_[static_cast<std::size_t>((k * n_[1] + j) * n_[0] + i)].push_back(static_cast<int>(c));
  }
}

int Locator::locate(const Mesh& mesh, const Vec& x, double tol) const {
  const int n = mesh.dim();
  std::array<int, 3> b{0, 0, 0};
  for (int d = 0; d < n; ++d) {
    const double w = hi_[d] - lo_[d];
    const double pad = 1e-9 * (w + 1.0) + tol;
    if (x[d] < lo_[d] - pad || x[d] > hi_[d] + pad) return -1;
    int i = w > 0 ? static_cast<int>(std::floor((x[d] - lo_[d]) / w * n_[d])) : 0;
    b[d] = std::clamp(i, 0, n_[d] - 1);
  }
  int best = -1;
  double best_min = -std::numeric_limits<double>::infinity();
  for (int c : buckets_[static_cast<std::size_t>((b[2] * n_[1] + b[1]) * n_[0] + b[0])]) {
    const auto lam = mesh.barycentric(static_cast<std::size_t>(c), x);
    double mn = lam[0];
    for (int a = 1; a <= n; ++a) mn = std::min(mn, lam[a]);
    if (mn >= 0.0) return c;
    if (mn > best_min) {
      best_min = mn;
      best = c;
    }
  }
  return best_min >= -tol ? best : -1;
}

// ---------------------------------------------------------------- Mesh

Mesh::Mesh(int dim, std::vector<Vec> vertices, std::vector<std::array<int, 4>> cells, const Gamma0Rule& gamma0)
    : dim_(dim), vertices_(std::move(vertices)), cells_(std::move(cells)) {
  if (dim_ != 2 && dim_ != 3) throw std::invalid_argument("Mesh: dimension must be 2 or 3");
  const int n = dim_;
  for (auto& v : vertices_) {
    if (v.dim != n) throw std::invalid_argument("Mesh: vertex dimension mismatch");
  }
  volumes_.resize(cells_.size());
  grads_.resize(cells_.size());
  std::map<FacetKey, std::pair<int, std::array<int, 3>>> boundary;  // key -> (cell, local facet)
  double fact = n == 2 ? 2.0 : 6.0;
  for (std::size_t c = 0; c < cells_.size(); ++c) {
    auto& cell = cells_[c];
    if (n == 2) cell[3] = -1;
    for (int a = 0; a <= n; ++a) {
      if (cell[a] < 0 || static_cast<std::size_t>(cell[a]) >= vertices_.size())
        throw std::invalid_argument("Mesh: cell references a missing vertex");
    }
    Eigen::Matrix3d J = Eigen::Matrix3d::Identity();
    auto fill = [&] {
      for (int k = 0; k < n; ++k)
        for (int d = 0; d < n; ++d) J(d, k) = vertices_[cell[k + 1]][d] - vertices_[cell[0]][d];
    };
    fill();
    double det = J.topLeftCorner(n, n).determinant();
    if (det < 0) {
      std::swap(cell[1], cell[2]);
      fill();
      det = -det;
    }
    if (det <= 0) throw std::invalid_argument("Mesh: degenerate cell");
    volumes_[c] = det / fact;
    Eigen::MatrixXd inv = J.topLeftCorner(n, n).inverse();
    Vec g0 = Vec::zero(n);
    for (int a = 1; a <= n; ++a) {
      Vec g = Vec::zero(n);
      for (int d = 0; d < n; ++d) g[d] = inv(a - 1, d);
      grads_[c][a] = g;
      g0 -= g;
    }
    grads_[c][0] = g0;
    for (int a = 0; a <= n; ++a)
      for (int b = a + 1; b <= n; ++b)
        max_edge_ = std::max(max_edge_, (vertices_[cell[a]] - vertices_[cell[b]]).norm());
    for (int skip = 0; skip <= n; ++skip) {
      std::array<int, 3> fv{-1, -1, -1};
      int k = 0;
      for (int a = 0; a <= n; ++a)
        if (a != skip) fv[k++] = cell[a];
      const FacetKey key = sorted_key(fv, n);
      auto it = boundary.find(key);
      if (it == boundary.end()) {
        boundary.emplace(key, std::make_pair(static_cast<int>(c), fv));
      } else {
        boundary.erase(it);
      }
    }
  }
  for (const auto& [key, val] : boundary) {
    BoundaryFacet f;
    f.cell = val.first;
    f.v = val.second;
    const auto& cell = cells_[static_cast<std::size_t>(f.cell)];
    int opposite = -1;
    for (int a = 0; a <= n; ++a)
      if (std::find(f.v.begin(), f.v.begin() + n, cell[a]) == f.v.begin() + n) opposite = cell[a];
    const Vec& p0 = vertices_[f.v[0]];
    Vec nrm;
    if (n == 2) {
      const Vec t = vertices_[f.v[1]] - p0;
      nrm = Vec(t[1], -t[0]);
      f.measure = t.norm();
      f.centroid = 0.5 * (p0 + vertices_[f.v[1]]);
    } else {
      nrm = cross(vertices_[f.v[1]] - p0, vertices_[f.v[2]] - p0);
      f.measure = 0.5 * nrm.norm();
      f.centroid = (1.0 / 3.0) * (p0 + vertices_[f.v[1]] + vertices_[f.v[2]]);
    }
    nrm *= 1.0 / nrm.norm();
    if (nrm.dot(vertices_[opposite] - p0) > 0) nrm *= -1.0;
    f.normal = nrm;
    f.gamma0 = gamma0 ? gamma0(f) : false;
    facets_.push_back(f);
  }
  locator_ = Locator(*this);
}

Vec Mesh::centroid(std::size_t c) const {
  Vec s = Vec::zero(dim_);
  for (int a = 0; a <= dim_; ++a) s += vertices_[cells_[c][a]];
  return (1.0 / (dim_ + 1)) * s;
}

std::array<double, 4> Mesh::barycentric(std::size_t c, const Vec& x) const {
  std::array<double, 4> lam{0, 0, 0, 0};
  const Vec d = x - vertices_[cells_[c][0]];
  double s = 0.0;
  for (int a = 1; a <= dim_; ++a) {
    lam[a] = grads_[c][a].dot(d);
    s += lam[a];
  }
  lam[0] = 1.0 - s;
  return lam;
}

double Mesh::total_volume() const {
  double s = 0.0;
  for (double v : volumes_) s += v;
  return s;
}

double Mesh::boundary_measure() const {
  double s = 0.0;
  for (const auto& f : facets_) s += f.measure;
  return s;
}

std::vector<double> Mesh::lumped_mass() const {
  std::vector<double> m(vertices_.size(), 0.0);
  for (std::size_t c = 0; c < cells_.size(); ++c)
    for (int a = 0; a <= dim_; ++a) m[cells_[c][a]] += volumes_[c] / (dim_ + 1);
  return m;
}

std::vector<bool> Mesh::boundary_vertices() const {
  std::vector<bool> b(vertices_.size(), false);
  for (const auto& f : facets_)
    for (int a = 0; a < dim_; ++a) b[f.v[a]] = true;
  return b;
}

std::vector<bool> Mesh::gamma0_vertices() const {
  std::vector<bool> b(vertices_.size(), false);
  for (const auto& f : facets_)
    if (f.gamma0)
      for (int a = 0; a < dim_; ++a) b[f.v[a]] = true;
  return b;
}

bool Mesh::has_gamma0() const {
  return std::any_of(facets_.begin(), facets_.end(), [](const BoundaryFacet& f) { return f.gamma0; });
}

double Mesh::distance_to_boundary(const Vec& x) const {
  double d = std::numeric_limits<double>::infinity();
  for (const auto& f : facets_) d = std::min(d, facet_distance(*this, f, x));
  return d;
}

int Mesh::nearest_facet(const Vec& x) const {
  double d = std::numeric_limits<double>::infinity();
  int best = -1;
  for (std::size_t i = 0; i < facets_.size(); ++i) {
    const double di = facet_distance(*this, facets_[i], x);
    if (di < d) {
      d = di;
      best = static_cast<int>(i);
    }
  }
  return best;
}

std::uint64_t Mesh::checksum() const {
  std::ostringstream os;
  write_mesh(os, *this);
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : os.str()) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  return h;
}

double boundary_distance(const Mesh& mesh, const Vec& x) {
  if (x.dim != mesh.dim()) throw std::invalid_argument("boundary_distance: dimension mismatch");
  if (!mesh.contains(x, 1e-10)) throw std::domain_error("boundary_distance: point outside the domain");
  return mesh.distance_to_boundary(x);
}

// ---------------------------------------------------------------- generators

namespace {

Mesh::Gamma0Rule side_rule(const std::vector<double>& widths, unsigned sides) {
  return [widths, sides](const BoundaryFacet& f) {
    const int n = static_cast<int>(widths.size());
    for (int d = 0; d < n; ++d) {
      const double tol = 1e-9 * widths[static_cast<std::size_t>(d)];
      if ((sides & (1u << (2 * d))) && f.normal[d] < -0.5 && std::abs(f.centroid[d]) < tol) return true;
      if ((sides & (1u << (2 * d + 1))) && f.normal[d] > 0.5 &&
          std::abs(f.centroid[d] - widths[static_cast<std::size_t>(d)]) < tol)
        return true;
    }
    return false;
  };
}

}  // namespace

Mesh gen_rectangle(const std::vector<double>& widths, int m, unsigned gamma0_sides) {
  const int n = static_cast<int>(widths.size());
  if (n != 2 && n != 3) throw std::invalid_argument("gen_rectangle: dimension must be 2 or 3");
  if (m < 1) throw std::invalid_argument("gen_rectangle: subdivisions must be positive");
  for (double w : widths)
    if (!(w > 0)) throw std::invalid_argument("gen_rectangle: widths must be positive");
  const int p = m + 1;
  std::vector<Vec> verts;
  std::vector<std::array<int, 4>> cells;
  if (n == 2) {
    for (int j = 0; j < p; ++j)
      for (int i = 0; i < p; ++i) verts.emplace_back(widths[0] * i / m, widths[1] * j / m);
    auto id = [p](int i, int j) { return j * p + i; };
    for (int j = 0; j < m; ++j)
      for (int i = 0; i < m; ++i) {
        cells.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1), -1});
        cells.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1), -1});
      }
  } else {
    for (int k = 0; k < p; ++k)
      for (int j = 0; j < p; ++j)
        for (int i = 0; i < p; ++i) verts.emplace_back(widths[0] * i / m, widths[1] * j / m, widths[2] * k / m);
    auto id = [p](int i, int j, int k) { return (k * p + j) * p + i; };
    const std::array<std::array<int, 3>, 6> perms{{{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}}};
    for (int k = 0; k < m; ++k)
      for (int j = 0; j < m; ++j)
        for (int i = 0; i < m; ++i)
          for (const auto& pr : perms) {
            std::array<int, 3> c{i, j, k};
            std::array<int, 4> tet{};
            tet[0] = id(c[0], c[1], c[2]);
            for (int s = 0; s < 3; ++s) {
              ++c[static_cast<std::size_t>(pr[static_cast<std::size_t>(s)])];
              tet[static_cast<std::size_t>(s + 1)] = id(c[0], c[1], c[2]);
            }
            cells.push_back(tet);
          }
  }
  return Mesh(n, std::move(verts), std::move(cells), side_rule(widths, gamma0_sides));
}

Mesh gen_lshape(int m, bool gamma0_all) {
  if (m < 2 || m % 2 != 0) throw std::invalid_argument("gen_lshape: m must be even and >= 2");
  const int p = m + 1;
  std::vector<int> remap(static_cast<std::size_t>(p * p), -1);
  std::vector<Vec> verts;
  auto keep_vertex = [m](int i, int j) { return 2 * i <= m || 2 * j <= m; };
  for (int j = 0; j < p; ++j)
    for (int i = 0; i < p; ++i)
      if (keep_vertex(i, j)) {
        remap[static_cast<std::size_t>(j * p + i)] = static_cast<int>(verts.size());
        verts.emplace_back(static_cast<double>(i) / m, static_cast<double>(j) / m);
      }
  auto id = [&](int i, int j) { return remap[static_cast<std::size_t>(j * p + i)]; };
  std::vector<std::array<int, 4>> cells;
  for (int j = 0; j < m; ++j)
    for (int i = 0; i < m; ++i) {
      if (2 * i >= m && 2 * j >= m) continue;
      cells.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1), -1});
      cells.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1), -1});
    }
  return Mesh(2, std::move(verts), std::move(cells), [gamma0_all](const BoundaryFacet&) { return gamma0_all; });
}

// ---------------------------------------------------------------- refinement

Refinement refine(const Mesh& mesh) {
  const int n = mesh.dim();
  std::vector<Vec> verts = mesh.vertices();
  std::vector<std::pair<int, int>> origin;
  for (std::size_t i = 0; i < verts.size(); ++i) origin.emplace_back(static_cast<int>(i), static_cast<int>(i));
  std::map<std::pair<int, int>, int> mid;
  auto midpoint = [&](int a, int b) {
    const auto key = std::minmax(a, b);
    auto it = mid.find(key);
    if (it != mid.end()) return it->second;
    const int id = static_cast<int>(verts.size());
    verts.push_back(0.5 * (mesh.vertex(static_cast<std::size_t>(a)) + mesh.vertex(static_cast<std::size_t>(b))));
    origin.emplace_back(key.first, key.second);
    mid.emplace(key, id);
    return id;
  };
  std::vector<std::array<int, 4>> cells;
  std::vector<int> parent;
  for (std::size_t c = 0; c < mesh.num_cells(); ++c) {
    const auto& t = mesh.cell(c);
    if (n == 2) {
      const int m01 = midpoint(t[0], t[1]), m12 = midpoint(t[1], t[2]), m02 = midpoint(t[0], t[2]);
      cells.push_back({t[0], m01, m02, -1});
      cells.push_back({m01, t[1], m12, -1});
      cells.push_back({m02, m12, t[2], -1});
      cells.push_back({m01, m12, m02, -1});
    } else {
      const int x0 = t[0], x1 = t[1], x2 = t[2], x3 = t[3];
      const int x01 = midpoint(x0, x1), x02 = midpoint(x0, x2), x03 = midpoint(x0, x3);
      const int x12 = midpoint(x1, x2), x13 = midpoint(x1, x3), x23 = midpoint(x2, x3);
      cells.push_back({x0, x01, x02, x03});
      cells.push_back({x01, x1, x12, x13});
      cells.push_back({x02, x12, x2, x23});
      cells.push_back({x03, x13, x23, x3});
      cells.push_back({x01, x02, x03, x13});
      cells.push_back({x01, x02, x12, x13});
      cells.push_back({x02, x03, x13, x23});
      cells.push_back({x02, x12, x13, x23});
    }
    for (int k = 0; k < (n == 2 ? 4 : 8); ++k) parent.push_back(static_cast<int>(c));
  }
  // Child boundary facets inherit the mark of the parent facet containing them.
  std::map<FacetKey, bool> marks;
  for (const auto& f : mesh.facets()) {
    if (n == 2) {
      const int m = mid.at(std::minmax(f.v[0], f.v[1]));
      marks[sorted_key({f.v[0], m, -1}, 2)] = f.gamma0;
      marks[sorted_key({m, f.v[1], -1}, 2)] = f.gamma0;
    } else {
      const int a = f.v[0], b = f.v[1], c = f.v[2];
      const int ab = mid.at(std::minmax(a, b)), bc = mid.at(std::minmax(b, c)), ac = mid.at(std::minmax(a, c));
      for (const auto& child : {std::array<int, 3>{a, ab, ac}, std::array<int, 3>{ab, b, bc},
                                std::array<int, 3>{ac, bc, c}, std::array<int, 3>{ab, bc, ac}})
        marks[sorted_key(child, 3)] = f.gamma0;
    }
  }
  auto rule = [marks, n](const BoundaryFacet& f) {
    auto it = marks.find(sorted_key(f.v, n));
    return it != marks.end() && it->second;
  };
  return Refinement{Mesh(n, std::move(verts), std::move(cells), rule), std::move(parent), std::move(origin)};
}

// ---------------------------------------------------------------- text I/O

void write_mesh(std::ostream& os, const Mesh& mesh) {
  const int n = mesh.dim();
  os << n << " " << mesh.num_vertices() << " " << mesh.num_cells() << " " << mesh.facets().size() << "\n";
  os.precision(17);
  for (const auto& v : mesh.vertices()) {
    for (int d = 0; d < n; ++d) os << (d ? " " : "") << v[d];
    os << "\n";
  }
  for (const auto& c : mesh.cells()) {
    for (int a = 0; a <= n; ++a) os << (a ? " " : "") << c[a];
    os << "\n";
  }
  for (const auto& f : mesh.facets()) {
    for (int a = 0; a < n; ++a) os << f.v[a] << " ";
    os << (f.gamma0 ? 1 : 0) << "\n";
  }
}

Mesh read_mesh(std::istream& is) {
  int line_no = 0;
  std::string line;
  auto next = [&]() -> std::istringstream {
    while (std::getline(is, line)) {
      ++line_no;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      return std::istringstream(line);
    }
    throw ParseError(line_no + 1, "unexpected end of file");
  };
  auto finish = [&](std::istringstream& ss) {
    std::string extra;
    if (ss >> extra) throw ParseError(line_no, "trailing token '" + extra + "'");
  };
  long long n = 0, nv = -1, nc = -1, nf = -1;
  {
    auto ss = next();
    if (!(ss >> n >> nv >> nc >> nf)) throw ParseError(line_no, "expected header 'n V C F'");
    finish(ss);
    if (n != 2 && n != 3) throw ParseError(line_no, "dimension must be 2 or 3");
    if (nv < 0 || nc < 0 || nf < 0) throw ParseError(line_no, "negative count in header");
  }
  const int dim = static_cast<int>(n);
  std::vector<Vec> verts;
  for (long long i = 0; i < nv; ++i) {
    auto ss = next();
    Vec v = Vec::zero(dim);
    for (int d = 0; d < dim; ++d)
      if (!(ss >> v[d])) throw ParseError(line_no, "bad vertex coordinates");
    finish(ss);
    verts.push_back(v);
  }
  std::vector<std::array<int, 4>> cells;
  auto read_index = [&](std::istringstream& ss) {
    long long idx = -1;
    if (!(ss >> idx)) throw ParseError(line_no, "bad vertex index");
    if (idx < 0 || idx >= nv) throw ParseError(line_no, "vertex index out of range");
    return static_cast<int>(idx);
  };
  for (long long i = 0; i < nc; ++i) {
    auto ss = next();
    std::array<int, 4> c{-1, -1, -1, -1};
    for (int a = 0; a <= dim; ++a) c[static_cast<std::size_t>(a)] = read_index(ss);
    finish(ss);
    cells.push_back(c);
  }
  std::map<FacetKey, std::pair<bool, int>> marks;  // marker, line
  for (long long i = 0; i < nf; ++i) {
    auto ss = next();
    std::array<int, 3> f{-1, -1, -1};
    for (int a = 0; a < dim; ++a) f[static_cast<std::size_t>(a)] = read_index(ss);
    int marker = -1;
    if (!(ss >> marker) || (marker != 0 && marker != 1)) throw ParseError(line_no, "facet marker must be 0 or 1");
    finish(ss);
    marks[sorted_key(f, dim)] = {marker == 1, line_no};
  }
  std::optional<Mesh> mesh;
  try {
    mesh.emplace(dim, std::move(verts), std::move(cells), [&marks, dim](const BoundaryFacet& f) {
      auto it = marks.find(sorted_key(f.v, dim));
      return it != marks.end() && it->second.first;
    });
  } catch (const std::invalid_argument& e) {
    throw ParseError(line_no, e.what());
  }
  std::map<FacetKey, bool> actual;
  for (const auto& f : mesh->facets()) actual[sorted_key(f.v, dim)] = true;
  for (const auto& [key, val] : marks)
    if (!actual.count(key)) throw ParseError(val.second, "listed facet is not on the boundary");
  if (actual.size() != marks.size()) throw ParseError(line_no, "facet list does not cover the boundary");
  return std::move(*mesh);
}

// ---------------------------------------------------------------- cover

namespace {

// Quintic smoothstep: C^2, 1 on [0, 1/2], 0 on [1, inf).
double bump(double s) {
  if (s <= 0.5) return 1.0;
  if (s >= 1.0) return 0.0;
  const double t = (s - 0.5) / 0.5;
  return 1.0 - t * t * t * (10.0 - 15.0 * t + 6.0 * t * t);
}

}  // namespace

std::vector<double> Cover::raw(const Vec& x) const {
  std::vector<double> r(patches_.size(), 0.0);
  for (std::size_t j = 0; j < patches_.size(); ++j) {
    const auto& p = patches_[j];
    switch (p.kind) {
      case CoverDirection::Kind::Corner: r[j] = bump((x - p.anchor[0]).norm() / (3.0 * rho_)); break;
      case CoverDirection::Kind::Side: r[j] = bump(seg_distance(x, p.anchor[0], p.anchor[1]) / rho_); break;
      case CoverDirection::Kind::Interior: r[j] = 1.0 - bump(mesh_->distance_to_boundary(x) / rho_); break;
    }
  }
  return r;
}

std::vector<double> Cover::weights(const Vec& x) const {
  auto r = raw(x);
  double s = 0.0;
  for (double v : r) s += v;
  if (!(s > 0)) throw std::logic_error("Cover: point not covered by any patch");
  for (double& v : r) v /= s;
  return r;
}

double Cover::weight(std::size_t j, const Vec& x) const { return weights(x).at(j); }

Cover build_cover(const Mesh& mesh) {
  if (mesh.dim() != 2) throw std::invalid_argument("build_cover: unsupported dimension (only n = 2)");
  const auto& facets = mesh.facets();
  // Boundary vertex -> incident facets.
  std::map<int, std::vector<int>> incident;
  for (std::size_t i = 0; i < facets.size(); ++i)
    for (int a = 0; a < 2; ++a) incident[facets[i].v[a]].push_back(static_cast<int>(i));
  std::map<int, bool> corner;
  for (const auto& [v, fs] : incident) {
    if (fs.size() != 2) throw std::invalid_argument("build_cover: boundary is not a simple closed curve");
    corner[v] = facets[fs[0]].normal.dot(facets[fs[1]].normal) < 1.0 - 1e-12;
  }
  // Maximal flat sides between corners.
  std::vector<int> side_of(facets.size(), -1);
  struct SideInfo {
    Vec normal, a, b;
  };
  std::vector<SideInfo> sides;
  for (std::size_t i = 0; i < facets.size(); ++i) {
    if (side_of[i] >= 0) continue;
    const int id = static_cast<int>(sides.size());
    std::vector<int> stack{static_cast<int>(i)};
    side_of[i] = id;
    std::vector<int> ends;
    while (!stack.empty()) {
      const int f = stack.back();
      stack.pop_back();
      for (int a = 0; a < 2; ++a) {
        const int v = facets[f].v[a];
        if (corner[v]) {
          ends.push_back(v);
          continue;
        }
        for (int g : incident[v])
          if (side_of[g] < 0) {
            side_of[g] = id;
            stack.push_back(g);
          }
      }
    }
    if (ends.size() != 2) throw std::invalid_argument("build_cover: boundary has no corners on a side");
    sides.push_back({facets[i].normal, mesh.vertex(ends[0]), mesh.vertex(ends[1])});
  }
  double min_len = std::numeric_limits<double>::infinity();
  for (const auto& s : sides) min_len = std::min(min_len, (s.b - s.a).norm());

  Cover cover;
  cover.mesh_ = &mesh;
  cover.rho_ = min_len / 8.0;
  const double rho = cover.rho_;
  for (const auto& [v, is_corner] : corner) {
    if (!is_corner) continue;
    const auto& fs = incident[v];
    Vec s = facets[fs[0]].normal + facets[fs[1]].normal;
    CoverDirection p;
    p.kind = CoverDirection::Kind::Corner;
    p.direction = (-1.0 / s.norm()) * s;
    p.anchor = {mesh.vertex(v), mesh.vertex(v)};
    cover.patches_.push_back(p);
  }
  for (const auto& s : sides) {
    const Vec t = (1.0 / (s.b - s.a).norm()) * (s.b - s.a);
    CoverDirection p;
    p.kind = CoverDirection::Kind::Side;
    p.direction = -1.0 * s.normal;
    p.anchor = {s.a + 2.0 * rho * t, s.b - 2.0 * rho * t};
    cover.patches_.push_back(p);
  }
  CoverDirection interior;
  interior.direction = Vec::zero(2);
  interior.anchor = {Vec::zero(2), Vec::zero(2)};
  cover.patches_.push_back(interior);

  // Sample points of the closed domain.
  std::vector<Vec> samples = mesh.vertices();
  for (std::size_t c = 0; c < mesh.num_cells(); ++c) {
    const auto& t = mesh.cell(c);
    samples.push_back(mesh.centroid(c));
    for (int a = 0; a < 3; ++a) samples.push_back(0.5 * (mesh.vertex(t[a]) + mesh.vertex(t[(a + 1) % 3])));
  }
  for (const auto& f : facets)
    for (int k = 1; k < 8; ++k) {
      const double s = k / 8.0;
      samples.push_back((1.0 - s) * mesh.vertex(f.v[0]) + s * mesh.vertex(f.v[1]));
    }
  for (const auto& x : samples) {
    const auto r = cover.raw(x);
    double s = 0.0;
    for (double v : r) s += v;
    if (!(s > 0)) throw std::logic_error("build_cover: sample point not covered");
  }

  auto check = [&](int k0, double& depth) {
    depth = std::numeric_limits<double>::infinity();
    for (const auto& x : samples) {
      const auto r = cover.raw(x);
      for (std::size_t j = 0; j + 1 < cover.patches_.size(); ++j) {
        if (r[j] <= 0.0) continue;
        for (int q = 1; q <= 8; q *= 2) {
          const double t = 1.0 / (static_cast<double>(k0) * q);
          const Vec y = x + t * cover.patches_[j].direction;
          if (!mesh.contains(y, 0.0)) return false;
          const double d = mesh.distance_to_boundary(y);
          if (d <= 1e-9 * t) return false;
          depth = std::min(depth, d / t);
        }
      }
    }
    return true;
  };
  for (int k0 = 1; k0 <= (1 << 20); k0 *= 2) {
    double depth = 0.0;
    if (check(k0, depth)) {
      cover.k0_ = k0;
      cover.depth_ = depth;
      break;
    }
  }
  if (cover.k0_ == 0) throw std::logic_error("build_cover: no admissible translation scale");
  for (auto& p : cover.patches_) p.weight.assign(mesh.num_vertices(), 0.0);
  for (std::size_t i = 0; i < mesh.num_vertices(); ++i) {
    const auto w = cover.weights(mesh.vertex(i));
    for (std::size_t j = 0; j < w.size(); ++j) cover.patches_[j].weight[i] = w[j];
  }
  return cover;
}

}  // namespace hencky
