#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "hencky/tensor.hpp"

namespace hencky {

/// Malformed input file; carries the 1-based line number of the failure.
class ParseError : public std::runtime_error {
 public:
  ParseError(int line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

struct BoundaryFacet {
  std::array<int, 3> v{-1, -1, -1};  // n vertex indices
  int cell = -1;                     // owning cell
  Vec normal;                        // outward unit normal
  double measure = 0.0;              // (n-1)-measure
  Vec centroid;
  bool gamma0 = false;
};

/// Axis-aligned box sides, used to select the Dirichlet part of the boundary.
enum Side : unsigned { XMin = 1u, XMax = 2u, YMin = 4u, YMax = 8u, ZMin = 16u, ZMax = 32u };
constexpr unsigned kAllSides = 63u;

class Mesh;

/// Uniform bucket grid for point location in a simplicial mesh.
class Locator {
 public:
  Locator() = default;
  explicit Locator(const Mesh& mesh);
  /// Cell containing x (with barycentric tolerance) or -1.
  int locate(const Mesh& mesh, const Vec& x, double tol = 1e-12) const;

 private:
  Vec lo_, hi_;
  std::array<int, 3> n_{1, 1, 1};
  std::vector<std::vector<int>> buckets_;
};

/// Simplicial mesh of a polygonal/polyhedral domain with a marked Dirichlet part.
///
/// Immutable after construction: cells are oriented to positive volume,
/// boundary facets are extracted and oriented outward, and P1 shape gradients
/// are precomputed per cell.
class Mesh {
 public:
  using Gamma0Rule = std::function<bool(const BoundaryFacet&)>;

  Mesh(int dim, std::vector<Vec> vertices, std::vector<std::array<int, 4>> cells, const Gamma0Rule& gamma0);

  int dim() const { return dim_; }
  std::size_t num_vertices() const { return vertices_.size(); }
  std::size_t num_cells() const { return cells_.size(); }
  const std::vector<Vec>& vertices() const { return vertices_; }
  const Vec& vertex(std::size_t i) const { return vertices_[i]; }
  const std::vector<std::array<int, 4>>& cells() const { return cells_; }
  const std::array<int, 4>& cell(std::size_t c) const { return cells_[c]; }
  double volume(std::size_t c) const { return volumes_[c]; }
  const std::vector<BoundaryFacet>& facets() const { return facets_; }
  /// Gradient of the P1 hat function of local vertex a in cell c.
  const Vec& grad(std::size_t c, int a) const { return grads_[c][static_cast<std::size_t>(a)]; }
  Vec centroid(std::size_t c) const;
  /// Barycentric coordinates of x with respect to cell c.
  std::array<double, 4> barycentric(std::size_t c, const Vec& x) const;

  double total_volume() const;
  double boundary_measure() const;
  /// Longest edge length.
  double max_edge() const { return max_edge_; }
  /// Lumped P1 mass per vertex.
  std::vector<double> lumped_mass() const;
  std::vector<bool> boundary_vertices() const;
  std::vector<bool> gamma0_vertices() const;
  bool has_gamma0() const;

  int locate(const Vec& x, double tol = 1e-12) const { return locator_.locate(*this, x, tol); }
  bool contains(const Vec& x, double tol = 1e-12) const { return locate(x, tol) >= 0; }
  /// Unsigned distance from x to the boundary facets (no containment check).
  double distance_to_boundary(const Vec& x) const;
  /// Nearest boundary facet index.
  int nearest_facet(const Vec& x) const;

  /// FNV-1a hash of the text serialisation.
  std::uint64_t checksum() const;

 private:
  int dim_;
  std::vector<Vec> vertices_;
  std::vector<std::array<int, 4>> cells_;
  std::vector<double> volumes_;
  std::vector<std::array<Vec, 4>> grads_;
  std::vector<BoundaryFacet> facets_;
  double max_edge_ = 0.0;
  Locator locator_;
};

/// Structured simplicial mesh of [0,w_1] x ... x [0,w_n] with m subdivisions per axis.
Mesh gen_rectangle(const std::vector<double>& widths, int m, unsigned gamma0_sides);
/// L-shaped domain [0,1]^2 minus (1/2,1]^2; m must be even.
Mesh gen_lshape(int m, bool gamma0_all = true);

struct Refinement {
  Mesh mesh;
  std::vector<int> parent_cell;                  // per child cell
  std::vector<std::pair<int, int>> vertex_edge;  // per new-mesh vertex: parent edge (a, a) for old vertices
};
/// Uniform midpoint subdivision (2^n children per cell); Dirichlet marks are inherited.
Refinement refine(const Mesh& mesh);

/// Euclidean distance from x to one boundary facet.
double facet_distance(const Mesh& mesh, const BoundaryFacet& f, const Vec& x);

/// dist(x, boundary) for x in the closed domain; throws for points outside.
double boundary_distance(const Mesh& mesh, const Vec& x);

void write_mesh(std::ostream& os, const Mesh& mesh);
Mesh read_mesh(std::istream& is);

// ---------------------------------------------------------------- cover

/// One patch of a boundary cover with its translation direction.
struct CoverDirection {
  enum class Kind { Interior, Side, Corner };
  Kind kind = Kind::Interior;
  Vec direction;               // inward unit vector (zero for the interior patch)
  std::array<Vec, 2> anchor;   // corner point, or the shrunk side segment
  std::vector<double> weight;  // partition-of-unity values at mesh vertices
};

/// Partition of unity subordinate to corner, side and interior patches of a
/// polygon. The weights are smooth functions of position; the per-vertex
/// values stored in each patch are their nodal samples.
class Cover {
 public:
  const std::vector<CoverDirection>& patches() const { return patches_; }
  /// Smallest k0 such that translating every boundary patch by direction/k
  /// maps its support strictly inside the domain for k >= k0.
  int k0() const { return k0_; }
  /// Minimum over patches and samples of dist(x + t direction, boundary) / t.
  double depth_factor() const { return depth_; }
  double radius() const { return rho_; }
  /// Value of weight j at x (x inside the closed domain).
  double weight(std::size_t j, const Vec& x) const;
  /// All weights at x (one boundary-distance evaluation).
  std::vector<double> weights(const Vec& x) const;

 private:
  friend Cover build_cover(const Mesh& mesh);
  const Mesh* mesh_ = nullptr;
  std::vector<CoverDirection> patches_;
  int k0_ = 0;
  double depth_ = 0.0;
  double rho_ = 0.0;
  std::vector<double> raw(const Vec& x) const;
};

/// Builds and validates a translation cover of a polygonal (n = 2) domain.
/// The mesh must outlive the returned cover.
Cover build_cover(const Mesh& mesh);

}  // namespace hencky
