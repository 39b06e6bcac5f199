#include "hencky/quadrature.hpp"

#include <cmath>

namespace hencky {

namespace {

std::vector<QuadPoint> make_triangle() {
  std::vector<QuadPoint> q;
  q.push_back({{1.0 / 3, 1.0 / 3, 1.0 / 3, 0.0}, 0.225});
  const double a1 = 0.059715871789770, b1 = 0.470142064105115, w1 = 0.132394152788506;
  const double a2 = 0.797426985353087, b2 = 0.101286507323456, w2 = 0.125939180544827;
  for (auto [a, b, w] : {std::array<double, 3>{a1, b1, w1}, std::array<double, 3>{a2, b2, w2}}) {
    q.push_back({{a, b, b, 0.0}, w});
    q.push_back({{b, a, b, 0.0}, w});
    q.push_back({{b, b, a, 0.0}, w});
  }
  return q;
}

std::vector<QuadPoint> make_tet() {
  const double a = 0.5854101966249685, b = 0.1381966011250105;
  return {{{a, b, b, b}, 0.25}, {{b, a, b, b}, 0.25}, {{b, b, a, b}, 0.25}, {{b, b, b, a}, 0.25}};
}

std::vector<QuadPoint> make_segment() {
  const double g = 0.5 * std::sqrt(3.0 / 5.0);
  return {{{0.5 - g, 0.5 + g, 0.0, 0.0}, 5.0 / 18}, {{0.5, 0.5, 0.0, 0.0}, 8.0 / 18},
          {{0.5 + g, 0.5 - g, 0.0, 0.0}, 5.0 / 18}};
}

std::vector<QuadPoint> make_facet_triangle() {
  const double a = 2.0 / 3, b = 1.0 / 6;
  return {{{a, b, b, 0.0}, 1.0 / 3}, {{b, a, b, 0.0}, 1.0 / 3}, {{b, b, a, 0.0}, 1.0 / 3}};
}

}  // namespace

const std::vector<QuadPoint>& cell_rule(int dim) {
  static const std::vector<QuadPoint> tri = make_triangle();
  static const std::vector<QuadPoint> tet = make_tet();
  return dim == 2 ? tri : tet;
}

const std::vector<QuadPoint>& facet_rule(int dim) {
  static const std::vector<QuadPoint> seg = make_segment();
  static const std::vector<QuadPoint> tri = make_facet_triangle();
  return dim == 2 ? seg : tri;
}

}  // namespace hencky
