#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "hencky/functionals.hpp"

namespace hencky {

namespace {

struct Entry {
  std::string value;
  int line;
};

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::vector<double> numbers(const Entry& e) {
  std::istringstream ss(e.value);
  std::vector<double> out;
  std::string tok;
  while (ss >> tok) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(tok, &used));
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw ParseError(e.line, "not a number: '" + tok + "'");
    }
  }
  if (out.empty()) throw ParseError(e.line, "expected a number");
  return out;
}

double number(const Entry& e) {
  const auto v = numbers(e);
  if (v.size() != 1) throw ParseError(e.line, "expected a single number");
  return v[0];
}

Vec to_vec(const std::vector<double>& v, int line) {
  if (v.size() == 2) return Vec(v[0], v[1]);
  if (v.size() == 3) return Vec(v[0], v[1], v[2]);
  throw ParseError(line, "expected 2 or 3 components");
}

const std::map<std::string, std::set<std::string>>& schema() {
  static const std::map<std::string, std::set<std::string>> s{
      {"mesh", {"shape", "widths", "m", "gamma0"}},
      {"material", {"mu", "kappa", "matrix"}},
      {"yield", {"type", "radius", "vertex"}},
      {"datum", {"family", "matrix", "offset", "gamma", "center", "radius", "amplitude"}},
      {"solver", {"mode", "tol", "max_iter"}},
      {"pipeline", {"schedule"}},
  };
  return s;
}

}  // namespace

Mesh ScenarioFile::make_mesh(int m_override) const {
  const int mm = m_override > 0 ? m_override : m;
  if (shape == "lshape") return gen_lshape(mm, gamma0_all);
  return gen_rectangle(widths, mm, gamma0);
}

Scenario ScenarioFile::make_scenario(int m_override) const {
  Scenario s;
  s.mesh = std::make_shared<const Mesh>(make_mesh(m_override));
  s.moduli = moduli;
  s.yield = yield;
  s.datum = datum;
  s.check();
  return s;
}

ScenarioFile parse_scenario(std::istream& is) {
  std::map<std::string, std::map<std::string, Entry>> sec;
  std::vector<Entry> vertices;
  std::string section, raw;
  int line_no = 0;
  while (std::getline(is, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ParseError(line_no, "unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      if (!schema().count(section)) throw ParseError(line_no, "unknown section [" + section + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(line_no, "expected 'key = value'");
    if (section.empty()) throw ParseError(line_no, "key outside of a section");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (!schema().at(section).count(key)) throw ParseError(line_no, "unknown key '" + key + "' in [" + section + "]");
    if (value.empty()) throw ParseError(line_no, "empty value for '" + key + "'");
    if (section == "yield" && key == "vertex") {
      vertices.push_back({value, line_no});
      continue;
    }
    if (sec[section].count(key)) throw ParseError(line_no, "duplicate key '" + key + "'");
    sec[section][key] = {value, line_no};
  }

  ScenarioFile f;
  auto get = [&](const std::string& s, const std::string& k) -> const Entry* {
    auto it = sec.find(s);
    if (it == sec.end()) return nullptr;
    auto jt = it->second.find(k);
    return jt == it->second.end() ? nullptr : &jt->second;
  };

  // [mesh]
  if (const Entry* e = get("mesh", "shape")) {
    if (e->value != "rectangle" && e->value != "lshape") throw ParseError(e->line, "shape must be rectangle or lshape");
    f.shape = e->value;
  }
  if (const Entry* e = get("mesh", "widths")) {
    f.widths = numbers(*e);
    if (f.widths.size() != 2 && f.widths.size() != 3) throw ParseError(e->line, "widths needs 2 or 3 entries");
    for (double w : f.widths)
      if (!(w > 0)) throw ParseError(e->line, "widths must be positive");
    if (f.shape == "lshape" && f.widths.size() != 2) throw ParseError(e->line, "lshape is two-dimensional");
  }
  if (f.shape == "lshape") f.widths = {1.0, 1.0};
  const int n = f.dim();
  if (const Entry* e = get("mesh", "m")) {
    const double m = number(*e);
    if (m < 1 || m != std::floor(m)) throw ParseError(e->line, "m must be a positive integer");
    if (f.shape == "lshape" && static_cast<int>(m) % 2) throw ParseError(e->line, "lshape needs an even m");
    f.m = static_cast<int>(m);
  } else if (f.shape == "lshape") {
    f.m = 8;
  }
  if (const Entry* e = get("mesh", "gamma0")) {
    std::istringstream ss(e->value);
    std::string tok;
    unsigned mask = 0;
    static const std::map<std::string, unsigned> names{{"xmin", XMin}, {"xmax", XMax}, {"ymin", YMin},
                                                       {"ymax", YMax}, {"zmin", ZMin}, {"zmax", ZMax},
                                                       {"all", kAllSides}, {"left", XMin}, {"right", XMax},
                                                       {"bottom", YMin}, {"top", YMax}};
    while (ss >> tok) {
      auto it = names.find(tok);
      if (it == names.end()) throw ParseError(e->line, "unknown side '" + tok + "'");
      mask |= it->second;
    }
    if (f.shape == "lshape" && mask != kAllSides) throw ParseError(e->line, "lshape supports gamma0 = all only");
    f.gamma0 = mask;
  }

  // [material]
  const Entry* mu = get("material", "mu");
  const Entry* kappa = get("material", "kappa");
  if (const Entry* e = get("material", "matrix")) {
    if (mu || kappa) throw ParseError(e->line, "give either mu/kappa or matrix");
    const auto v = numbers(*e);
    const int s = SymTensor::size_for(n);
    if (v.size() != static_cast<std::size_t>(s * s)) throw ParseError(e->line, "matrix needs s*s entries");
    Eigen::MatrixXd m(s, s);
    for (int i = 0; i < s; ++i)
      for (int j = 0; j < s; ++j) m(i, j) = v[static_cast<std::size_t>(i * s + j)];
    try {
      f.moduli = ElasticModuli::general(n, m);
    } catch (const std::invalid_argument& ex) {
      throw ParseError(e->line, ex.what());
    }
  } else {
    const double vm = mu ? number(*mu) : 1.0, vk = kappa ? number(*kappa) : 1.0;
    if (!(vm > 0)) throw ParseError(mu->line, "mu must be positive");
    if (!(vk > 0)) throw ParseError(kappa->line, "kappa must be positive");
    f.moduli = ElasticModuli::isotropic(vm, vk);
  }

  // [yield]
  const Entry* type = get("yield", "type");
  const std::string ytype = type ? type->value : "ball";
  if (ytype == "ball") {
    if (!vertices.empty()) throw ParseError(vertices.front().line, "vertex given for a ball yield set");
    const Entry* r = get("yield", "radius");
    const double rv = r ? number(*r) : 1.0;
    if (!(rv > 0)) throw ParseError(r->line, "radius must be positive");
    f.yield = YieldSet::ball(rv);
  } else if (ytype == "polytope") {
    if (vertices.empty()) throw ParseError(type->line, "polytope needs vertex lines");
    std::vector<SymTensor> vs;
    for (const auto& v : vertices) {
      const auto c = numbers(v);
      if (c.size() != static_cast<std::size_t>(SymTensor::size_for(n)))
        throw ParseError(v.line, "vertex needs n(n+1)/2 components");
      vs.push_back(SymTensor::from_components(n, c));
    }
    try {
      f.yield = YieldSet::polytope(vs);
    } catch (const std::invalid_argument& ex) {
      throw ParseError(vertices.front().line, ex.what());
    }
  } else {
    throw ParseError(type->line, "yield type must be ball or polytope");
  }

  // [datum]
  const Entry* fam = get("datum", "family");
  const std::string family = fam ? fam->value : "shear";
  auto require = [&](const char* key) -> const Entry& {
    const Entry* e = get("datum", key);
    if (!e) throw ParseError(fam ? fam->line : line_no, std::string("datum needs '") + key + "'");
    return *e;
  };
  if (family == "shear") {
    const Entry* g = get("datum", "gamma");
    f.datum = Datum::shear(n, g ? number(*g) : 0.0);
  } else if (family == "affine") {
    const Entry& m = require("matrix");
    const auto a = numbers(m);
    if (a.size() != static_cast<std::size_t>(n * n)) throw ParseError(m.line, "matrix needs n*n entries");
    std::vector<double> b(static_cast<std::size_t>(n), 0.0);
    if (const Entry* o = get("datum", "offset")) {
      b = numbers(*o);
      if (b.size() != static_cast<std::size_t>(n)) throw ParseError(o->line, "offset needs n entries");
    }
    f.datum = Datum::affine(n, a, b);
  } else if (family == "bump") {
    const Entry& c = require("center");
    const Entry& r = require("radius");
    const Entry& a = require("amplitude");
    const Vec center = to_vec(numbers(c), c.line), amp = to_vec(numbers(a), a.line);
    if (center.dim != n || amp.dim != n) throw ParseError(c.line, "bump vectors need n components");
    const double rv = number(r);
    if (!(rv > 0)) throw ParseError(r.line, "radius must be positive");
    f.datum = Datum::bump(center, rv, amp);
  } else {
    throw ParseError(fam->line, "family must be affine, shear or bump");
  }

  // [solver]
  if (const Entry* e = get("solver", "mode")) {
    if (e->value != "relaxed" && e->value != "hard") throw ParseError(e->line, "mode must be relaxed or hard");
    f.solver.mode = e->value;
  }
  if (const Entry* e = get("solver", "tol")) {
    f.solver.tol = number(*e);
    if (!(f.solver.tol > 0)) throw ParseError(e->line, "tol must be positive");
  }
  if (const Entry* e = get("solver", "max_iter")) {
    const double v = number(*e);
    if (v < 1 || v != std::floor(v)) throw ParseError(e->line, "max_iter must be a positive integer");
    f.solver.max_iter = static_cast<long>(v);
  }

  // [pipeline]
  if (const Entry* e = get("pipeline", "schedule")) {
    f.pipeline.schedule.clear();
    for (double v : numbers(*e)) {
      if (v < 1 || v != std::floor(v)) throw ParseError(e->line, "schedule entries must be positive integers");
      if (!f.pipeline.schedule.empty() && v <= f.pipeline.schedule.back())
        throw ParseError(e->line, "schedule must be strictly increasing");
      f.pipeline.schedule.push_back(static_cast<int>(v));
    }
  }
  return f;
}

ScenarioFile load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open scenario file '" + path + "'");
  return parse_scenario(in);
}

}  // namespace hencky
