#pragma once

// Closed-form example functions with analytic gradients/Hessians and
// ground-truth role labels (harmonic / supersolution with datum f /
// subsolution). These seed every check with a known answer.

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "plaplab/grid.hpp"

namespace plaplab {

enum class Role { Harmonic, Supersolution, Subsolution };

inline const char* role_name(Role r) {
  switch (r) {
    case Role::Harmonic: return "harmonic";
    case Role::Supersolution: return "supersolution";
    case Role::Subsolution: return "subsolution";
  }
  return "?";
}

struct Label {
  Role role = Role::Harmonic;
  double p_lo = 1.0;  // label applies for p_lo <= p <= p_hi (and always p > 1)
  double p_hi = std::numeric_limits<double>::infinity();
  // Datum f of -div(|Du|^{p-2}Du) = f; null means f == 0.
  std::function<double(Point, int, double)> f;
  std::string f_desc = "0";
  std::optional<Point> strict_at;  // witness point where a subsolution is strict

  Label() = default;
  explicit Label(Role r, double lo = 1.0,
                 double hi = std::numeric_limits<double>::infinity())
      : role(r), p_lo(lo), p_hi(hi) {}

  bool covers(double p) const { return p > 1.0 && p >= p_lo && p <= p_hi; }
};

struct GalleryEntry {
  std::string name;
  std::array<bool, 2> dims{true, true};  // supports dim 1 / dim 2
  std::function<double(Point, int)> value;
  std::function<Point(Point, int)> grad;
  std::function<SymMat(Point, int)> hess;
  std::vector<Point> singular_points;  // sampling must avoid these by 2h
  // Distance from x to the nearest point where the entry fails to be C^2;
  // +inf for globally smooth entries. FD cross-checks stay clear of it.
  std::function<double(Point, int)> smooth_distance;
  Point box_lo{-1.0, -1.0}, box_hi{1.0, 1.0};  // reference box
  std::array<double, 2> lip{0.0, 0.0};         // Lipschitz constant per dim (NaN: none)
  std::vector<Label> labels;

  bool supports(int dim) const { return dims[dim - 1]; }
  double lipschitz(int dim) const { return lip[dim - 1]; }
};

namespace detail {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

inline double smooth_everywhere(Point, int) { return kInf; }

inline double dist_to_origin(Point x, int dim) { return norm(x, dim); }

// Radial profile u(x) = f(|x|) from scalar derivatives f', f''.
struct RadialProfile {
  double (*f)(double);
  double (*f1)(double);
  double (*f2)(double);

  double value(Point x, int dim) const { return f(norm(x, dim)); }
  Point grad(Point x, int dim) const {
    double r = norm(x, dim);
    if (r == 0.0) return {kNaN, kNaN};
    double s = f1(r) / r;
    return {s * x[0], dim == 2 ? s * x[1] : 0.0};
  }
  SymMat hess(Point x, int dim) const {
    double r = norm(x, dim);
    if (r == 0.0) return {kNaN, kNaN, kNaN};
    if (dim == 1) return {f2(r), 0.0, 0.0};
    double a = f2(r), b = f1(r) / r;
    double ux = x[0] / r, uy = x[1] / r;
    SymMat m;
    m.xx = a * ux * ux + b * (1.0 - ux * ux);
    m.yy = a * uy * uy + b * (1.0 - uy * uy);
    m.xy = (a - b) * ux * uy;
    return m;
  }
};

}  // namespace detail

inline const std::vector<GalleryEntry>& gallery_entries() {
  static const std::vector<GalleryEntry> entries = [] {
    using detail::kInf;
    using detail::kNaN;
    std::vector<GalleryEntry> es;

    {
      GalleryEntry e;
      e.name = "constant";
      e.value = [](Point, int) { return 3.0; };
      e.grad = [](Point, int) { return Point{0.0, 0.0}; };
      e.hess = [](Point, int) { return SymMat{}; };
      e.smooth_distance = detail::smooth_everywhere;
      e.lip = {0.0, 0.0};
      e.labels.push_back(Label(Role::Harmonic));
      es.push_back(std::move(e));
    }

    {
      // x in 1D; 0.6x - 0.8y + 0.25 in 2D (unit gradient either way).
      GalleryEntry e;
      e.name = "affine";
      e.value = [](Point x, int dim) {
        return dim == 1 ? x[0] : 0.6 * x[0] - 0.8 * x[1] + 0.25;
      };
      e.grad = [](Point, int dim) {
        return dim == 1 ? Point{1.0, 0.0} : Point{0.6, -0.8};
      };
      e.hess = [](Point, int) { return SymMat{}; };
      e.smooth_distance = detail::smooth_everywhere;
      e.lip = {1.0, 1.0};
      e.labels.push_back(Label(Role::Harmonic));
      es.push_back(std::move(e));
    }

    {
      GalleryEntry e;
      e.name = "quadratic_bowl";  // |x|^2 / 2
      e.value = [](Point x, int dim) { return 0.5 * dot(x, x, dim); };
      e.grad = [](Point x, int) { return x; };
      e.hess = [](Point, int dim) { return dim == 1 ? SymMat{1, 0, 0} : SymMat{1, 0, 1}; };
      e.smooth_distance = detail::smooth_everywhere;
      e.lip = {1.0, std::sqrt(2.0)};
      Label sub(Role::Subsolution);
      sub.strict_at = Point{0.0, 0.0};
      e.labels.push_back(sub);
      Label sup(Role::Supersolution, 2.0);
      sup.f = [](Point x, int dim, double p) {
        return -(dim + p - 2.0) * std::pow(dot(x, x, dim), 0.5 * (p - 2.0));
      };
      sup.f_desc = "-(n+p-2)|x|^(p-2)";
      e.labels.push_back(sup);
      es.push_back(std::move(e));
    }

    {
      GalleryEntry e;
      e.name = "neg_quadratic";  // -|x|^2 / 2
      e.value = [](Point x, int dim) { return -0.5 * dot(x, x, dim); };
      e.grad = [](Point x, int dim) { return dim == 1 ? Point{-x[0], 0.0} : Point{-x[0], -x[1]}; };
      e.hess = [](Point, int dim) { return dim == 1 ? SymMat{-1, 0, 0} : SymMat{-1, 0, -1}; };
      e.smooth_distance = detail::smooth_everywhere;
      e.lip = {1.0, std::sqrt(2.0)};
      e.labels.push_back(Label(Role::Supersolution));
      es.push_back(std::move(e));
    }

    {
      GalleryEntry e;
      e.name = "quartic";  // sum_i x_i^4
      e.value = [](Point x, int dim) {
        double v = x[0] * x[0] * x[0] * x[0];
        if (dim == 2) v += x[1] * x[1] * x[1] * x[1];
        return v;
      };
      e.grad = [](Point x, int dim) {
        return Point{4.0 * x[0] * x[0] * x[0], dim == 2 ? 4.0 * x[1] * x[1] * x[1] : 0.0};
      };
      e.hess = [](Point x, int dim) {
        SymMat m;
        m.xx = 12.0 * x[0] * x[0];
        if (dim == 2) m.yy = 12.0 * x[1] * x[1];
        return m;
      };
      e.smooth_distance = detail::smooth_everywhere;
      e.lip = {4.0, 4.0 * std::sqrt(2.0)};
      Label sub(Role::Subsolution);
      sub.strict_at = Point{0.5, 0.5};
      e.labels.push_back(sub);
      es.push_back(std::move(e));
    }

    {
      static const detail::RadialProfile cone{
          [](double r) { return r; }, [](double) { return 1.0; }, [](double) { return 0.0; }};
      GalleryEntry e;
      e.name = "pos_cone";  // |x|
      e.value = [](Point x, int dim) { return cone.value(x, dim); };
      e.grad = [](Point x, int dim) { return cone.grad(x, dim); };
      e.hess = [](Point x, int dim) { return cone.hess(x, dim); };
      e.smooth_distance = detail::dist_to_origin;
      e.lip = {1.0, 1.0};
      Label sub(Role::Subsolution);
      sub.strict_at = Point{0.0, 0.0};
      e.labels.push_back(sub);
      es.push_back(std::move(e));
    }

    {
      static const detail::RadialProfile ncone{
          [](double r) { return -r; }, [](double) { return -1.0; }, [](double) { return 0.0; }};
      GalleryEntry e;
      e.name = "neg_cone";  // -|x|
      e.value = [](Point x, int dim) { return ncone.value(x, dim); };
      e.grad = [](Point x, int dim) { return ncone.grad(x, dim); };
      e.hess = [](Point x, int dim) { return ncone.hess(x, dim); };
      e.smooth_distance = detail::dist_to_origin;
      e.lip = {1.0, 1.0};
      e.labels.push_back(Label(Role::Supersolution));
      es.push_back(std::move(e));
    }

    {
      // Moreau envelope of |x| at parameter 1/2; the closed-form reference
      // for the q = 2 envelope tests.
      constexpr double e0 = 0.5;
      GalleryEntry e;
      e.name = "huber";
      e.value = [](Point x, int dim) {
        double r = norm(x, dim);
        return r <= e0 ? 0.5 * r * r / e0 : r - 0.5 * e0;
      };
      e.grad = [](Point x, int dim) {
        double r = norm(x, dim);
        double s = r <= e0 ? 1.0 / e0 : 1.0 / r;
        return Point{s * x[0], dim == 2 ? s * x[1] : 0.0};
      };
      e.hess = [](Point x, int dim) {
        double r = norm(x, dim);
        if (r <= e0) return dim == 1 ? SymMat{1.0 / e0, 0, 0} : SymMat{1.0 / e0, 0, 1.0 / e0};
        static const detail::RadialProfile outer{
            [](double r) { return r - 0.5 * e0; }, [](double) { return 1.0; },
            [](double) { return 0.0; }};
        return outer.hess(x, dim);
      };
      // C^1 everywhere, C^2 except on the sphere |x| = e0.
      e.smooth_distance = [](Point x, int dim) { return std::fabs(norm(x, dim) - e0); };
      e.box_lo = {-2.0, -2.0};
      e.box_hi = {2.0, 2.0};
      e.lip = {1.0, 1.0};
      Label sub(Role::Subsolution);
      sub.strict_at = Point{0.25, 0.0};
      e.labels.push_back(sub);
      es.push_back(std::move(e));
    }

    {
      // 1D step with the lower-semicontinuous convention u(0) = 0.
      GalleryEntry e;
      e.name = "step";
      e.dims = {true, false};
      e.value = [](Point x, int) { return x[0] > 0.0 ? 1.0 : 0.0; };
      e.grad = [](Point x, int) { return Point{x[0] == 0.0 ? kNaN : 0.0, 0.0}; };
      e.hess = [](Point x, int) { return SymMat{x[0] == 0.0 ? kNaN : 0.0, 0, 0}; };
      e.smooth_distance = [](Point x, int) { return std::fabs(x[0]); };
      e.lip = {kNaN, kNaN};
      es.push_back(std::move(e));
    }

    // Radial profiles on a box inside an annulus around the origin. The
    // exponent (p-n)/(p-1) makes |x|^b p-harmonic away from the origin.
    {
      static const detail::RadialProfile prof{
          [](double r) { return 1.0 / r; }, [](double r) { return -1.0 / (r * r); },
          [](double r) { return 2.0 / (r * r * r); }};
      GalleryEntry e;
      e.name = "radial_p15";  // |x|^{-1}: p = 1.5, n = 2
      e.dims = {false, true};
      e.value = [](Point x, int dim) { return prof.value(x, dim); };
      e.grad = [](Point x, int dim) { return prof.grad(x, dim); };
      e.hess = [](Point x, int dim) { return prof.hess(x, dim); };
      e.singular_points = {Point{0.0, 0.0}};
      e.smooth_distance = detail::dist_to_origin;
      e.box_lo = {0.25, 0.25};
      e.box_hi = {1.25, 1.25};
      e.lip = {kNaN, 8.0};  // sup 1/|x|^2 at the near corner, |x|^2 = 1/8
      e.labels.push_back(Label(Role::Harmonic, 1.5, 1.5));
      es.push_back(std::move(e));
    }

    {
      static const detail::RadialProfile prof{
          [](double r) { return std::sqrt(r); }, [](double r) { return 0.5 / std::sqrt(r); },
          [](double r) { return -0.25 / (r * std::sqrt(r)); }};
      GalleryEntry e;
      e.name = "radial_p3";  // |x|^{1/2}: p = 3, n = 2
      e.dims = {false, true};
      e.value = [](Point x, int dim) { return prof.value(x, dim); };
      e.grad = [](Point x, int dim) { return prof.grad(x, dim); };
      e.hess = [](Point x, int dim) { return prof.hess(x, dim); };
      e.singular_points = {Point{0.0, 0.0}};
      e.smooth_distance = detail::dist_to_origin;
      e.box_lo = {0.25, 0.25};
      e.box_hi = {1.25, 1.25};
      e.lip = {kNaN, 0.5 * std::pow(0.125, -0.25)};
      e.labels.push_back(Label(Role::Harmonic, 3.0, 3.0));
      es.push_back(std::move(e));
    }

    {
      static const detail::RadialProfile prof{
          [](double r) { return -std::log(r); }, [](double r) { return -1.0 / r; },
          [](double r) { return 1.0 / (r * r); }};
      GalleryEntry e;
      e.name = "neg_log";  // -log|x|: p = n = 2
      e.dims = {false, true};
      e.value = [](Point x, int dim) { return prof.value(x, dim); };
      e.grad = [](Point x, int dim) { return prof.grad(x, dim); };
      e.hess = [](Point x, int dim) { return prof.hess(x, dim); };
      e.singular_points = {Point{0.0, 0.0}};
      e.smooth_distance = detail::dist_to_origin;
      e.box_lo = {0.25, 0.25};
      e.box_hi = {1.25, 1.25};
      e.lip = {kNaN, std::sqrt(8.0)};
      e.labels.push_back(Label(Role::Harmonic, 2.0, 2.0));
      es.push_back(std::move(e));
    }

    return es;
  }();
  return entries;
}

inline const GalleryEntry& gallery_entry(const std::string& name) {
  for (const auto& e : gallery_entries())
    if (e.name == name) return e;
  throw std::invalid_argument("unknown gallery entry: " + name);
}

// Labels applicable at a given p; rejects p outside every labeled range.
inline std::vector<Label> labels_for(const GalleryEntry& e, double p) {
  std::vector<Label> out;
  for (const auto& l : e.labels)
    if (l.covers(p)) out.push_back(l);
  if (out.empty())
    throw std::invalid_argument("entry '" + e.name + "' has no label covering p=" +
                                std::to_string(p));
  return out;
}

inline bool has_role(const GalleryEntry& e, double p, Role r) {
  for (const auto& l : e.labels)
    if (l.covers(p) && l.role == r) return true;
  return false;
}

// Default grid over the entry's reference box.
inline Grid default_grid(const GalleryEntry& e, int dim, int n) {
  if (!e.supports(dim))
    throw std::invalid_argument("entry '" + e.name + "' does not support dim " +
                                std::to_string(dim));
  if (dim == 1) return Grid::line(e.box_lo[0], e.box_hi[0], n);
  return Grid::box(e.box_lo, e.box_hi, n, n);
}

// Evaluate the entry at every node. Grids whose nodes come within 2h of a
// singular point are rejected.
inline ScalarField sample(const GalleryEntry& e, const Grid& g) {
  if (!e.supports(g.dim))
    throw std::invalid_argument("entry '" + e.name + "' does not support dim " +
                                std::to_string(g.dim));
  for (const Point& s : e.singular_points) {
    Point nearest{0.0, 0.0};
    for (int a = 0; a < g.dim; ++a) {
      int i = g.axis_index(a, s[a]);
      if (i < 0) i = 0;
      if (i > g.n[a] - 1) i = g.n[a] - 1;
      nearest[a] = g.coord(a, i);
    }
    Point d{nearest[0] - s[0], g.dim == 2 ? nearest[1] - s[1] : 0.0};
    if (norm(d, g.dim) < 2.0 * g.h_max()) {
      char buf[160];
      std::snprintf(buf, sizeof(buf),
                    "entry '%s': singular point (%g, %g) too close to grid node (%g, %g)",
                    e.name.c_str(), s[0], s[1], nearest[0], nearest[1]);
      throw std::invalid_argument(buf);
    }
  }
  std::vector<double> v(g.size());
  for (std::size_t k = 0; k < g.size(); ++k) v[k] = e.value(g.point(k), g.dim);
  return ScalarField(g, std::move(v), e.name);
}

inline ScalarField sample(const std::string& name, const Grid& g) {
  return sample(gallery_entry(name), g);
}

}  // namespace plaplab
