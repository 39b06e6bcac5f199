#pragma once

#include <array>
#include <vector>

namespace hencky {

/// Quadrature point in barycentric coordinates; weights sum to one.
struct QuadPoint {
  std::array<double, 4> bary;
  double weight;
};

/// Cell rule: 7-point degree 5 on triangles, 4-point degree 2 on tetrahedra.
const std::vector<QuadPoint>& cell_rule(int dim);
/// Facet rule: 3-point Gauss on segments, 3-point degree 2 on triangles.
const std::vector<QuadPoint>& facet_rule(int dim);

}  // namespace hencky
