#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <stdexcept>

#include "hencky/mesh.hpp"

namespace hencky::cli {

namespace {

using P2 = std::array<double, 2>;

// orthonormal basis of trace-free symmetric 2x2 matrices: diag(1,-1)/sqrt2 and offdiag(1,1)/sqrt2
struct Dev {
  double a = 0.0, b = 0.0;  // coordinates
  double xx() const { return a / std::sqrt(2.0); }
  double xy() const { return b / std::sqrt(2.0); }
};

Dev dev_of(double xx, double yy, double xy) {
  const double d = 0.5 * (xx - yy);
  return {d * std::sqrt(2.0), xy * std::sqrt(2.0)};
}

// minimise f over the square [cx - r, cx + r] x [cy - r, cy + r] by repeated zooming
P2 zoom2(const std::function<double(double, double)>& f, P2 c, double r, int n = 201, int rounds = 12) {
  for (int it = 0; it < rounds; ++it) {
    double best = std::numeric_limits<double>::infinity();
    P2 arg = c;
    const double h = 2 * r / (n - 1);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        const double x = c[0] - r + i * h, y = c[1] - r + j * h, v = f(x, y);
        if (v < best) {
          best = v;
          arg = {x, y};
        }
      }
    c = arg;
    r = 2 * h;
  }
  return c;
}

double zoom1(const std::function<double(double)>& f, double lo, double hi, int n = 2001, int rounds = 10) {
  double arg = lo;
  for (int it = 0; it < rounds; ++it) {
    double best = std::numeric_limits<double>::infinity();
    const double h = (hi - lo) / (n - 1);
    for (int i = 0; i < n; ++i) {
      const double x = lo + i * h, v = f(x);
      if (v < best) {
        best = v;
        arg = x;
      }
    }
    lo = std::max(lo, arg - 2 * h);
    hi = std::min(hi, arg + 2 * h);
  }
  return f(arg);
}

nlohmann::json reduced_density_grid(unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> pos(0.2, 3.0), comp(-3.0, 3.0);
  struct In {
    double mu, kappa, sy, xx, yy, xy;
  };
  std::vector<In> ins{{1.0, 1.0, 2.0, 1.5 * std::sqrt(2.0), -1.5 * std::sqrt(2.0), 0.0}};  // |xi_D| = 3
  for (int i = 0; i < 200; ++i) ins.push_back({pos(rng), pos(rng), pos(rng), comp(rng), comp(rng), comp(rng)});
  nlohmann::json cases = nlohmann::json::array();
  for (const In& in : ins) {
    const double tr = in.xx + in.yy;
    const Dev xd = dev_of(in.xx, in.yy, in.xy);
    const double nd = std::hypot(xd.a, xd.b), vol = 0.5 * in.kappa * tr * tr;
    // 2-D grid over the plastic strain in the trace-free plane
    auto obj2 = [&](double a, double b) {
      const double ea = xd.a - a, eb = xd.b - b;
      return in.mu * (ea * ea + eb * eb) + in.sy * std::hypot(a, b);
    };
    const P2 p = zoom2(obj2, {0.0, 0.0}, nd + 1e-9);
    const double v2 = vol + obj2(p[0], p[1]);
    // 1-D grid along the deviator
    const double v1 = vol + zoom1([&](double t) { return in.mu * (nd - t) * (nd - t) + in.sy * t; }, 0.0, nd);
    cases.push_back({{"mu", in.mu}, {"kappa", in.kappa}, {"sigma_y", in.sy}, {"xi", {in.xx, in.yy, in.xy}},
                     {"norm_dev", nd}, {"value_1d", v1}, {"value_2d", v2}});
  }
  return cases;
}

struct Poly {
  std::string name;
  std::vector<std::array<double, 3>> vertices;  // xx, yy, xy
};

std::vector<Poly> polytopes() {
  const double a = 1.0 / std::sqrt(2.0);
  return {{"segment", {{1, -1, 0}, {-1, 1, 0}}}, {"square", {{a, -a, 0}, {-a, a, 0}, {0, 0, a}, {0, 0, -a}}}};
}

nlohmann::json support_vertices(unsigned seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  nlohmann::json cases = nlohmann::json::array();
  for (const Poly& p : polytopes()) {
    std::vector<std::array<double, 3>> xs{{1, -1, 0}};
    for (int i = 0; i < 50; ++i) {
      const double d = g(rng);
      xs.push_back({d, -d, g(rng)});
    }
    for (const auto& x : xs) {
      double best = -std::numeric_limits<double>::infinity();
      for (const auto& v : p.vertices) best = std::max(best, v[0] * x[0] + v[1] * x[1] + 2 * v[2] * x[2]);
      cases.push_back({{"polytope", p.name}, {"xi", {x[0], x[1], x[2]}}, {"value", best}});
    }
  }
  return cases;
}

// convex hull membership in deviatoric coordinates (vertices may be collinear)
bool inside(const std::vector<P2>& hull, double a, double b) {
  if (hull.size() == 2) {
    const double dx = hull[1][0] - hull[0][0], dy = hull[1][1] - hull[0][1];
    const double t = ((a - hull[0][0]) * dx + (b - hull[0][1]) * dy) / (dx * dx + dy * dy);
    const double px = hull[0][0] + t * dx - a, py = hull[0][1] + t * dy - b;
    return t >= 0 && t <= 1 && std::hypot(px, py) <= 1e-12;
  }
  for (std::size_t i = 0; i < hull.size(); ++i) {
    const P2& p = hull[i];
    const P2& q = hull[(i + 1) % hull.size()];
    if ((q[0] - p[0]) * (b - p[1]) - (q[1] - p[1]) * (a - p[0]) < 0) return false;
  }
  return true;
}

std::vector<P2> hull_of(const Poly& poly) {
  std::vector<P2> pts;
  for (const auto& v : poly.vertices) {
    const Dev d = dev_of(v[0], v[1], v[2]);
    pts.push_back({d.a, d.b});
  }
  std::sort(pts.begin(), pts.end());
  if (pts.size() <= 2) return pts;
  auto cross = [](const P2& o, const P2& a, const P2& b) { return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]); };
  std::vector<P2> h(2 * pts.size());
  std::size_t k = 0;
  for (const auto& p : pts) {
    while (k >= 2 && cross(h[k - 2], h[k - 1], p) <= 0) --k;
    h[k++] = p;
  }
  for (std::size_t i = pts.size() - 1, t = k + 1; i-- > 0;) {
    while (k >= t && cross(h[k - 2], h[k - 1], pts[i]) <= 0) --k;
    h[k++] = pts[i];
  }
  h.resize(k - 1);
  return h;
}

nlohmann::json projection_grid(unsigned seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> g(0.0, 1.5);
  nlohmann::json cases = nlohmann::json::array();
  std::vector<std::array<double, 3>> sig;
  for (int i = 0; i < 40; ++i) {
    const double d = g(rng);
    sig.push_back({d, -d, g(rng)});
  }
  for (const auto& s : sig) {
    const Dev sd = dev_of(s[0], s[1], s[2]);
    // ball of radius 1: grid over the disc
    auto ball = [&](double a, double b) {
      if (std::hypot(a, b) > 1.0) return std::numeric_limits<double>::infinity();
      return std::hypot(a - sd.a, b - sd.b);
    };
    const P2 pb = zoom2(ball, {0.0, 0.0}, 1.0);
    const Dev db{pb[0], pb[1]};
    cases.push_back({{"set", "ball"}, {"sigma", {s[0], s[1], s[2]}}, {"projection", {db.xx(), -db.xx(), db.xy()}}});
    for (const Poly& p : polytopes()) {
      const auto hull = hull_of(p);
      if (hull.size() == 2) {
        // segment: closed form is itself a 1-D minimisation
        const double dx = hull[1][0] - hull[0][0], dy = hull[1][1] - hull[0][1];
        double best = std::numeric_limits<double>::infinity(), bt = 0.0;
        for (int i = 0; i <= 200000; ++i) {
          const double t = i / 200000.0, v = std::hypot(hull[0][0] + t * dx - sd.a, hull[0][1] + t * dy - sd.b);
          if (v < best) {
            best = v;
            bt = t;
          }
        }
        const Dev d{hull[0][0] + bt * dx, hull[0][1] + bt * dy};
        cases.push_back({{"set", p.name}, {"sigma", {s[0], s[1], s[2]}}, {"projection", {d.xx(), -d.xx(), d.xy()}}});
        continue;
      }
      auto obj = [&](double a, double b) {
        if (!inside(hull, a, b)) return std::numeric_limits<double>::infinity();
        return std::hypot(a - sd.a, b - sd.b);
      };
      const P2 pp = zoom2(obj, {0.0, 0.0}, 1.5);
      const Dev d{pp[0], pp[1]};
      cases.push_back({{"set", p.name}, {"sigma", {s[0], s[1], s[2]}}, {"projection", {d.xx(), -d.xx(), d.xy()}}});
    }
  }
  return cases;
}

nlohmann::json manufactured_div(int m) {
  const Mesh mesh = gen_rectangle({1.0, 1.0}, m, kAllSides);
  const double pi = M_PI;
  auto v = [&](double x, double y) { return std::array<double, 2>{std::sin(pi * x) * std::sin(pi * y), std::sin(2 * pi * x) * std::sin(pi * y)}; };
  auto psi = [&](double x, double y) { return pi * std::cos(pi * x) * std::sin(pi * y) + pi * std::sin(2 * pi * x) * std::cos(pi * y); };
  nlohmann::json cells = nlohmann::json::array(), verts = nlohmann::json::array();
  constexpr int sub = 6;
  for (std::size_t c = 0; c < mesh.num_cells(); ++c) {
    const auto& t = mesh.cell(c);
    const Vec& a = mesh.vertex(static_cast<std::size_t>(t[0]));
    const Vec& b = mesh.vertex(static_cast<std::size_t>(t[1]));
    const Vec& d = mesh.vertex(static_cast<std::size_t>(t[2]));
    double s = 0.0;
    int cnt = 0;
    for (int i = 0; i < sub; ++i)
      for (int j = 0; i + j < sub; ++j)
        for (int up = 0; up < (i + j < sub - 1 ? 2 : 1); ++up) {
          const double l1 = (i + (up ? 2.0 : 1.0) / 3) / sub, l2 = (j + (up ? 2.0 : 1.0) / 3) / sub;
          const Vec x = (1 - l1 - l2) * a + l1 * b + l2 * d;
          s += psi(x[0], x[1]);
          ++cnt;
        }
    cells.push_back(s / cnt);
  }
  for (const Vec& x : mesh.vertices()) {
    const auto val = v(x[0], x[1]);
    verts.push_back({val[0], val[1]});
  }
  return {{"m", m}, {"v", "(sin(pi x) sin(pi y), sin(2 pi x) sin(pi y))"}, {"psi_cells", cells}, {"v_vertices", verts}};
}

nlohmann::json facet_slip(unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> ang(0.0, 2 * M_PI), sy(0.5, 3.0);
  nlohmann::json cases = nlohmann::json::array();
  for (int i = 0; i < 50; ++i) {
    const double th = i == 0 ? 1.5 * M_PI : ang(rng), s = i == 0 ? 1.0 : sy(rng);
    const double nx = std::cos(th), ny = std::sin(th), ax = -ny, ay = nx;  // |a| = 1, a . nu = 0
    const double m11 = ax * nx, m22 = ay * ny, m12 = 0.5 * (ax * ny + ay * nx);
    const double frob = std::sqrt(m11 * m11 + m22 * m22 + 2 * m12 * m12);
    cases.push_back({{"sigma_y", s}, {"normal", {nx, ny}}, {"a", {ax, ay}}, {"value", s * frob}});
  }
  return cases;
}

}  // namespace

const std::vector<std::string>& oracle_names() {
  static const std::vector<std::string> names{"reduced-density-grid", "support-vertices", "projection-grid", "manufactured-div",
                                              "facet-slip-closed-form"};
  return names;
}

nlohmann::json run_oracle(const std::string& name, unsigned seed, int m) {
  nlohmann::json out{{"oracle", name}, {"seed", seed}};
  if (name == "reduced-density-grid") out["cases"] = reduced_density_grid(seed);
  else if (name == "support-vertices") out["cases"] = support_vertices(seed);
  else if (name == "projection-grid") out["cases"] = projection_grid(seed);
  else if (name == "manufactured-div") out["cases"] = manufactured_div(m);
  else if (name == "facet-slip-closed-form") out["cases"] = facet_slip(seed);
  else throw std::invalid_argument("unknown oracle '" + name + "'");
  return out;
}

}  // namespace hencky::cli
