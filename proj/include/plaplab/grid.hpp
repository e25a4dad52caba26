#pragma once

// Rectangular node-centered grids (1D/2D), sampled scalar fields, and the
// boundary-distance masks used to restrict checks to shrunk domains.

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace plaplab {

using Point = std::array<double, 2>;

// Symmetric 2x2 (or 1x1 when dim==1, then only xx is meaningful).
struct SymMat {
  double xx = 0.0, xy = 0.0, yy = 0.0;
};

inline double dot(const Point& a, const Point& b, int dim) {
  return dim == 1 ? a[0] * b[0] : a[0] * b[0] + a[1] * b[1];
}

inline double norm(const Point& a, int dim) { return std::sqrt(dot(a, a, dim)); }

inline double quad_form(const SymMat& m, const Point& v, int dim) {
  if (dim == 1) return m.xx * v[0] * v[0];
  return m.xx * v[0] * v[0] + 2.0 * m.xy * v[0] * v[1] + m.yy * v[1] * v[1];
}

inline double trace(const SymMat& m, int dim) { return dim == 1 ? m.xx : m.xx + m.yy; }

// Node-centered grid over a closed box; endpoints are nodes.
struct Grid {
  int dim = 1;
  std::array<double, 2> lo{0.0, 0.0};
  std::array<double, 2> hi{1.0, 0.0};
  std::array<int, 2> n{2, 1};  // n[1] == 1 when dim == 1

  static Grid line(double lo, double hi, int n) {
    Grid g;
    g.dim = 1;
    g.lo = {lo, 0.0};
    g.hi = {hi, 0.0};
    g.n = {n, 1};
    g.validate();
    return g;
  }

  static Grid box(Point lo, Point hi, int nx, int ny) {
    Grid g;
    g.dim = 2;
    g.lo = lo;
    g.hi = hi;
    g.n = {nx, ny};
    g.validate();
    return g;
  }

  void validate() const {
    if (dim != 1 && dim != 2) throw std::invalid_argument("grid: dim must be 1 or 2");
    for (int a = 0; a < dim; ++a) {
      if (!(hi[a] > lo[a])) throw std::invalid_argument("grid: hi must exceed lo");
      if (n[a] < 3) throw std::invalid_argument("grid: need at least 3 nodes per axis");
    }
    if (dim == 1 && n[1] != 1) throw std::invalid_argument("grid: 1D grids use n[1] == 1");
  }

  double h(int axis) const { return (hi[axis] - lo[axis]) / (n[axis] - 1); }
  double h_max() const { return dim == 1 ? h(0) : std::max(h(0), h(1)); }
  double h_min() const { return dim == 1 ? h(0) : std::min(h(0), h(1)); }
  double cell_volume() const { return dim == 1 ? h(0) : h(0) * h(1); }

  std::size_t size() const { return static_cast<std::size_t>(n[0]) * n[1]; }

  std::size_t flat(int i, int j = 0) const { return static_cast<std::size_t>(i) * n[1] + j; }

  std::array<int, 2> unflat(std::size_t k) const {
    return {static_cast<int>(k / n[1]), static_cast<int>(k % n[1])};
  }

  double coord(int axis, int i) const { return lo[axis] + i * h(axis); }

  Point point(std::size_t k) const {
    auto ij = unflat(k);
    Point x{coord(0, ij[0]), 0.0};
    if (dim == 2) x[1] = coord(1, ij[1]);
    return x;
  }

  // Nearest node index along an axis; exact inverse of coord() at nodes.
  int axis_index(int axis, double x) const {
    return static_cast<int>(std::llround((x - lo[axis]) / h(axis)));
  }

  bool interior(std::size_t k, int margin = 1) const {
    auto ij = unflat(k);
    for (int a = 0; a < dim; ++a)
      if (ij[a] < margin || ij[a] > n[a] - 1 - margin) return false;
    return true;
  }

  // Distance from a node to the boundary of the box domain.
  double boundary_distance(std::size_t k) const {
    Point x = point(k);
    double d = std::min(x[0] - lo[0], hi[0] - x[0]);
    if (dim == 2) d = std::min(d, std::min(x[1] - lo[1], hi[1] - x[1]));
    return d;
  }

  bool same_geometry(const Grid& o) const {
    return dim == o.dim && lo == o.lo && hi == o.hi && n == o.n;
  }
};

struct ScalarField {
  Grid grid;
  std::vector<double> values;
  std::string meta;  // analytic-source tag, empty for synthetic data

  ScalarField() = default;
  ScalarField(Grid g, std::vector<double> v, std::string m = {})
      : grid(std::move(g)), values(std::move(v)), meta(std::move(m)) {
    if (values.size() != grid.size())
      throw std::invalid_argument("field: value count must equal node count");
    for (double x : values)
      if (!std::isfinite(x)) throw std::invalid_argument("field: values must be finite");
  }
};

// (max, min) over the sampled values.
inline std::pair<double, double> oscillation(const ScalarField& u) {
  double M = u.values[0], m = u.values[0];
  for (double v : u.values) {
    M = std::max(M, v);
    m = std::min(m, v);
  }
  return {M, m};
}

// Pointwise min(u, k).
inline ScalarField truncate(const ScalarField& u, double k) {
  std::vector<double> v(u.values.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::min(u.values[i], k);
  return ScalarField(u.grid, std::move(v), u.meta);
}

// Nodes strictly farther than `radius` from the domain boundary.
struct ShrunkDomain {
  double radius = 0.0;
  std::vector<std::uint8_t> mask;

  bool empty() const {
    for (auto b : mask)
      if (b) return false;
    return true;
  }
  std::size_t count() const {
    std::size_t c = 0;
    for (auto b : mask) c += b;
    return c;
  }
};

inline ShrunkDomain shrink(const Grid& g, double radius) {
  if (radius < 0.0) throw std::invalid_argument("shrink: radius must be >= 0");
  ShrunkDomain s;
  s.radius = radius;
  s.mask.resize(g.size());
  for (std::size_t k = 0; k < g.size(); ++k) s.mask[k] = g.boundary_distance(k) > radius;
  return s;
}

// ---------------------------------------------------------------------------
// CSV serialization. Header `# grid: dim,lo...,hi...,n...`, then one
// `index,x(,y),value` row per node. Doubles are printed with 17 significant
// digits so the round-trip is bit-exact.

namespace detail {
inline std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}
}  // namespace detail

inline void write_field_csv(const ScalarField& u, std::ostream& os) {
  const Grid& g = u.grid;
  os << "# grid: " << g.dim;
  for (int a = 0; a < g.dim; ++a) os << ',' << detail::fmt_double(g.lo[a]);
  for (int a = 0; a < g.dim; ++a) os << ',' << detail::fmt_double(g.hi[a]);
  for (int a = 0; a < g.dim; ++a) os << ',' << g.n[a];
  os << '\n';
  os << (g.dim == 1 ? "index,x,value" : "index,x,y,value") << '\n';
  for (std::size_t k = 0; k < g.size(); ++k) {
    Point x = g.point(k);
    os << k << ',' << detail::fmt_double(x[0]);
    if (g.dim == 2) os << ',' << detail::fmt_double(x[1]);
    os << ',' << detail::fmt_double(u.values[k]) << '\n';
  }
}

inline void write_field_csv(const ScalarField& u, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  write_field_csv(u, os);
}

inline ScalarField read_field_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("field csv: empty input");
  const std::string tag = "# grid: ";
  if (line.rfind(tag, 0) != 0) throw std::runtime_error("field csv: missing grid header");
  std::stringstream hs(line.substr(tag.size()));
  std::vector<std::string> tok;
  for (std::string t; std::getline(hs, t, ',');) tok.push_back(t);
  if (tok.empty()) throw std::runtime_error("field csv: bad grid header");
  int dim = std::stoi(tok[0]);
  if ((dim != 1 && dim != 2) || tok.size() != static_cast<std::size_t>(1 + 3 * dim))
    throw std::runtime_error("field csv: bad grid header");
  Grid g;
  g.dim = dim;
  for (int a = 0; a < dim; ++a) g.lo[a] = std::stod(tok[1 + a]);
  for (int a = 0; a < dim; ++a) g.hi[a] = std::stod(tok[1 + dim + a]);
  for (int a = 0; a < dim; ++a) g.n[a] = std::stoi(tok[1 + 2 * dim + a]);
  if (dim == 1) {
    g.n[1] = 1;
    g.lo[1] = g.hi[1] = 0.0;
  }
  g.validate();
  if (!std::getline(is, line)) throw std::runtime_error("field csv: missing column header");
  std::vector<double> vals(g.size());
  std::vector<bool> seen(g.size(), false);
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::stringstream rs(line);
    std::vector<std::string> c;
    for (std::string t; std::getline(rs, t, ',');) c.push_back(t);
    if (c.size() != static_cast<std::size_t>(dim + 2))
      throw std::runtime_error("field csv: bad row: " + line);
    std::size_t k = std::stoull(c[0]);
    if (k >= g.size()) throw std::runtime_error("field csv: index out of range");
    vals[k] = std::stod(c.back());
    seen[k] = true;
  }
  for (std::size_t k = 0; k < g.size(); ++k)
    if (!seen[k]) throw std::runtime_error("field csv: missing node " + std::to_string(k));
  return ScalarField(g, std::move(vals));
}

inline ScalarField read_field_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open for reading: " + path);
  return read_field_csv(is);
}

}  // namespace plaplab
