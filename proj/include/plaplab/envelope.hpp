#pragma once

// q-power infimal convolution u_eps(x) = min_y [ u(y) + |x-y|^q / (q eps^{q-1}) ]
// on sampled fields: a brute-force oracle, a fast engine (separable
// lower-envelope-of-parabolas scans for q = 2, shrink-radius windows
// otherwise), discrete argmin sets, and the quantitative envelope checks
// (semiconcavity, Hessian bound, critical-set behavior, argmin distances).
//
// Both engines read every candidate cost from one precomputed table, so
// their minima agree bit for bit.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include <json.hpp>

#include "plaplab/calculus.hpp"
#include "plaplab/grid.hpp"
#include "plaplab/report.hpp"

namespace plaplab {

struct EnvelopeParams {
  double eps = 0.1;
  double q = 2.0;

  void validate() const {
    if (!(eps > 0.0)) throw std::invalid_argument("envelope: need eps > 0");
    if (!(q >= 2.0)) throw std::invalid_argument("envelope: need q >= 2");
  }
};

// Radius within which the infimum is attained: (1/q) r^q / eps^{q-1} = M - m.
inline double shrink_radius(double q, double eps, double M, double m) {
  if (!(q >= 2.0) || !(eps > 0.0) || !(M >= m))
    throw std::invalid_argument("shrink_radius: bad arguments");
  return std::pow(q * std::pow(eps, q - 1.0) * (M - m), 1.0 / q);
}

// Semiconcavity constant C = (q-1)/(2 eps^{q-1}) r^{q-2}.
inline double semiconcavity_constant(double q, double eps, double r_eps) {
  return (q - 1.0) / (2.0 * std::pow(eps, q - 1.0)) * std::pow(r_eps, q - 2.0);
}

struct EnvelopeResult {
  ScalarField u_eps;
  // Discrete argmin set Y_eps(x): all grid minimizers within
  // 1e-12 (1 + |min|) of the attained minimum, ascending flat indices.
  std::vector<std::vector<std::uint32_t>> argmin;
  double eps = 0.0, q = 2.0;
  double r_eps = 0.0;
  double C = 0.0;
  ShrunkDomain valid;
};

namespace detail {

constexpr double kTieRel = 1e-12;

inline double tie_tolerance(double best) { return kTieRel * (1.0 + std::fabs(best)); }

// Shared candidate-cost kernel. For q = 2 the cost accumulates per axis,
// last axis first, matching the separable transform; otherwise a radial
// table over absolute index offsets.
class CostTable {
 public:
  CostTable(const Grid& g, double q, double eps) : q_(q), dim_(g.dim), n1_(g.n[1]) {
    if (q == 2.0) {
      for (int a = 0; a < dim_; ++a) {
        w_[a] = g.h(a) * g.h(a) / (2.0 * eps);
        ax_[a].resize(g.n[a]);
        for (int d = 0; d < g.n[a]; ++d)
          ax_[a][d] = w_[a] * (static_cast<double>(d) * static_cast<double>(d));
      }
    } else {
      const double scale = 1.0 / (q * std::pow(eps, q - 1.0));
      radial_.resize(static_cast<std::size_t>(g.n[0]) * g.n[1]);
      for (int d0 = 0; d0 < g.n[0]; ++d0)
        for (int d1 = 0; d1 < g.n[1]; ++d1) {
          double dist2 = 0.0;
          for (int a = dim_ - 1; a >= 0; --a) {
            const int d = a == 0 ? d0 : d1;
            const double t = g.h(a) * d;
            dist2 += t * t;
          }
          radial_[static_cast<std::size_t>(d0) * n1_ + d1] = std::pow(dist2, 0.5 * q) * scale;
        }
    }
  }

  double cost(double base, int ad0, int ad1) const {
    if (q_ == 2.0) {
      double c = base;
      if (dim_ == 2) c += ax_[1][ad1];
      c += ax_[0][ad0];
      return c;
    }
    return base + radial_[static_cast<std::size_t>(ad0) * n1_ + ad1];
  }

  double axis_weight(int a) const { return w_[a]; }
  const std::vector<double>& axis_lut(int a) const { return ax_[a]; }

 private:
  double q_;
  int dim_;
  int n1_;
  double w_[2] = {0.0, 0.0};
  std::vector<double> ax_[2];
  std::vector<double> radial_;
};

// Lower envelope of the parabolas j -> f[j] + w (i-j)^2, evaluated at the
// integers. Values are read back through the shared axis table.
inline void lower_envelope_line(const std::vector<double>& f, int n, double w,
                                const std::vector<double>& lut, std::vector<double>& out,
                                std::vector<int>& hull, std::vector<double>& breaks) {
  int k = 0;
  hull[0] = 0;
  breaks[0] = -std::numeric_limits<double>::infinity();
  breaks[1] = std::numeric_limits<double>::infinity();
  for (int j = 1; j < n; ++j) {
    double s;
    for (;;) {
      const int v = hull[k];
      s = ((f[j] + w * j * j) - (f[v] + w * v * v)) / (2.0 * w * (j - v));
      if (s > breaks[k]) break;
      --k;
    }
    ++k;
    hull[k] = j;
    breaks[k] = s;
    breaks[k + 1] = std::numeric_limits<double>::infinity();
  }
  k = 0;
  for (int i = 0; i < n; ++i) {
    while (breaks[k + 1] < i) ++k;
    const int v = hull[k];
    out[i] = f[v] + lut[std::abs(i - v)];
  }
}

// Separable q = 2 transform: axis 1 lines first, then axis 0.
inline std::vector<double> separable_envelope(const ScalarField& u, const CostTable& tab) {
  const Grid& g = u.grid;
  const int n0 = g.n[0], n1 = g.n[1];
  std::vector<double> cur = u.values;
  const int nmax = std::max(n0, n1);
  std::vector<double> line(nmax), out(nmax);
  std::vector<int> hull(nmax);
  std::vector<double> breaks(nmax + 1);
  if (g.dim == 2) {
    for (int i0 = 0; i0 < n0; ++i0) {
      const std::size_t row = static_cast<std::size_t>(i0) * n1;
      std::copy_n(cur.begin() + row, n1, line.begin());
      lower_envelope_line(line, n1, tab.axis_weight(1), tab.axis_lut(1), out, hull, breaks);
      std::copy_n(out.begin(), n1, cur.begin() + row);
    }
  }
  for (int i1 = 0; i1 < n1; ++i1) {
    for (int i0 = 0; i0 < n0; ++i0) line[i0] = cur[static_cast<std::size_t>(i0) * n1 + i1];
    lower_envelope_line(line, n0, tab.axis_weight(0), tab.axis_lut(0), out, hull, breaks);
    for (int i0 = 0; i0 < n0; ++i0) cur[static_cast<std::size_t>(i0) * n1 + i1] = out[i0];
  }
  return cur;
}

struct WindowBox {
  int lo0, hi0, lo1, hi1;
};

inline WindowBox window_box(const Grid& g, int i0, int i1, double radius) {
  WindowBox b{0, g.n[0] - 1, 0, g.n[1] - 1};
  const int w0 = static_cast<int>(std::min<double>(g.n[0], radius / g.h(0))) + 2;
  b.lo0 = std::max(0, i0 - w0);
  b.hi0 = std::min(g.n[0] - 1, i0 + w0);
  if (g.dim == 2) {
    const int w1 = static_cast<int>(std::min<double>(g.n[1], radius / g.h(1))) + 2;
    b.lo1 = std::max(0, i1 - w1);
    b.hi1 = std::min(g.n[1] - 1, i1 + w1);
  }
  return b;
}

}  // namespace detail

// Brute force: the infimum is taken over every grid node, ties kept.
inline EnvelopeResult inf_convolve_oracle(const ScalarField& u, const EnvelopeParams& prm) {
  prm.validate();
  const Grid& g = u.grid;
  const detail::CostTable tab(g, prm.q, prm.eps);
  auto [M, m] = oscillation(u);

  EnvelopeResult res;
  res.eps = prm.eps;
  res.q = prm.q;
  res.r_eps = shrink_radius(prm.q, prm.eps, M, m);
  res.C = semiconcavity_constant(prm.q, prm.eps, res.r_eps);
  res.valid = shrink(g, res.r_eps);
  res.argmin.resize(g.size());

  std::vector<double> vals(g.size());
  const int n0 = g.n[0], n1 = g.n[1];
  for (int i0 = 0; i0 < n0; ++i0)
    for (int i1 = 0; i1 < n1; ++i1) {
      const std::size_t k = g.flat(i0, i1);
      double best = std::numeric_limits<double>::infinity();
      for (int j0 = 0; j0 < n0; ++j0)
        for (int j1 = 0; j1 < n1; ++j1) {
          const double c =
              tab.cost(u.values[g.flat(j0, j1)], std::abs(i0 - j0), std::abs(i1 - j1));
          if (c < best) best = c;
        }
      const double tol = detail::tie_tolerance(best);
      auto& am = res.argmin[k];
      for (int j0 = 0; j0 < n0; ++j0)
        for (int j1 = 0; j1 < n1; ++j1) {
          const std::size_t ky = g.flat(j0, j1);
          if (tab.cost(u.values[ky], std::abs(i0 - j0), std::abs(i1 - j1)) <= best + tol)
            am.push_back(static_cast<std::uint32_t>(ky));
        }
      vals[k] = best;
    }
  res.u_eps = ScalarField(g, std::move(vals), u.meta.empty() ? "" : u.meta + "_eps");
  return res;
}

// Fast engine. Values: separable scans for q = 2, shrink-radius window
// otherwise. Argmin collection re-minimizes over a per-node window sized
// from the attained value, which also pins the minima to the oracle's
// exactly. With collect_argmins = false the q = 2 values come straight from
// the scans and may differ from the oracle in the last ulp near parabola
// ties.
inline EnvelopeResult inf_convolve_fast(const ScalarField& u, const EnvelopeParams& prm,
                                        bool collect_argmins = true) {
  prm.validate();
  const Grid& g = u.grid;
  const detail::CostTable tab(g, prm.q, prm.eps);
  auto [M, m] = oscillation(u);

  EnvelopeResult res;
  res.eps = prm.eps;
  res.q = prm.q;
  res.r_eps = shrink_radius(prm.q, prm.eps, M, m);
  res.C = semiconcavity_constant(prm.q, prm.eps, res.r_eps);
  res.valid = shrink(g, res.r_eps);

  const int n0 = g.n[0], n1 = g.n[1];
  std::vector<double> vals;
  if (prm.q == 2.0) {
    vals = detail::separable_envelope(u, tab);
  } else {
    vals.resize(g.size());
    for (int i0 = 0; i0 < n0; ++i0)
      for (int i1 = 0; i1 < n1; ++i1) {
        const auto b = detail::window_box(g, i0, i1, res.r_eps);
        double best = std::numeric_limits<double>::infinity();
        for (int j0 = b.lo0; j0 <= b.hi0; ++j0)
          for (int j1 = b.lo1; j1 <= b.hi1; ++j1) {
            const double c =
                tab.cost(u.values[g.flat(j0, j1)], std::abs(i0 - j0), std::abs(i1 - j1));
            if (c < best) best = c;
          }
        vals[g.flat(i0, i1)] = best;
      }
  }

  if (collect_argmins) {
    res.argmin.resize(g.size());
    for (int i0 = 0; i0 < n0; ++i0)
      for (int i1 = 0; i1 < n1; ++i1) {
        const std::size_t k = g.flat(i0, i1);
        const double prov = vals[k];
        const double slack = 4.0 * detail::kTieRel * (1.0 + std::fabs(prov) + std::fabs(m));
        const double gap = std::max(0.0, prov - m) + slack;
        const double radius = shrink_radius(prm.q, prm.eps, gap, 0.0);
        const auto b = detail::window_box(g, i0, i1, radius);
        double best = prov;
        for (int j0 = b.lo0; j0 <= b.hi0; ++j0)
          for (int j1 = b.lo1; j1 <= b.hi1; ++j1) {
            const double c =
                tab.cost(u.values[g.flat(j0, j1)], std::abs(i0 - j0), std::abs(i1 - j1));
            if (c < best) best = c;
          }
        const double tol = detail::tie_tolerance(best);
        auto& am = res.argmin[k];
        for (int j0 = b.lo0; j0 <= b.hi0; ++j0)
          for (int j1 = b.lo1; j1 <= b.hi1; ++j1) {
            const std::size_t ky = g.flat(j0, j1);
            if (tab.cost(u.values[ky], std::abs(i0 - j0), std::abs(i1 - j1)) <= best + tol)
              am.push_back(static_cast<std::uint32_t>(ky));
          }
        vals[k] = best;
      }
  }

  res.u_eps = ScalarField(g, std::move(vals), u.meta.empty() ? "" : u.meta + "_eps");
  return res;
}

// ---------------------------------------------------------------------------
// Envelope checks.

namespace detail {

struct Direction {
  std::ptrdiff_t stride;
  int d0, d1;
  double step2;  // squared step length
};

inline std::vector<Direction> second_difference_directions(const Grid& g) {
  std::vector<Direction> dirs;
  const double hx = g.h(0);
  dirs.push_back({static_cast<std::ptrdiff_t>(g.n[1]), 1, 0, hx * hx});
  if (g.dim == 2) {
    const double hy = g.h(1);
    dirs.push_back({1, 0, 1, hy * hy});
    dirs.push_back({static_cast<std::ptrdiff_t>(g.n[1]) + 1, 1, 1, hx * hx + hy * hy});
    dirs.push_back({static_cast<std::ptrdiff_t>(g.n[1]) - 1, 1, -1, hx * hx + hy * hy});
  }
  return dirs;
}

inline bool offset_in_grid(const Grid& g, int i0, int i1, int d0, int d1) {
  const int a0 = i0 + d0, a1 = i1 + d1, b0 = i0 - d0, b1 = i1 - d1;
  return a0 >= 0 && a0 < g.n[0] && b0 >= 0 && b0 < g.n[0] && a1 >= 0 && a1 < g.n[1] &&
         b1 >= 0 && b1 < g.n[1];
}

}  // namespace detail

// Basic well-formedness: u_eps <= u, argmin sets nonempty, each recorded
// argmin reproduces the attained minimum within the tie tolerance.
inline CheckResult check_envelope_wellformed(const EnvelopeResult& res, const ScalarField& u) {
  CheckResult c;
  c.name = "envelope_wellformed";
  c.params["eps"] = res.eps;
  c.params["q"] = res.q;
  const Grid& g = u.grid;
  const detail::CostTable tab(g, res.q, res.eps);
  for (std::size_t k = 0; k < g.size(); ++k) {
    if (res.u_eps.values[k] > u.values[k])
      c.add_violation(k, g.point(k), res.u_eps.values[k] - u.values[k]);
    if (res.argmin.empty()) continue;
    if (res.argmin[k].empty()) {
      c.add_violation(k, g.point(k), 0.0);
      continue;
    }
    const auto xi = g.unflat(k);
    const double tol = detail::tie_tolerance(res.u_eps.values[k]);
    for (std::uint32_t y : res.argmin[k]) {
      const auto yi = g.unflat(y);
      const double cost = tab.cost(u.values[y], std::abs(xi[0] - yi[0]), std::abs(xi[1] - yi[1]));
      const double err = std::fabs(cost - res.u_eps.values[k]);
      if (err > tol) c.add_violation(k, g.point(k), err);
    }
  }
  return c;
}

// Exact monotonicity u_{eps1} <= u_{eps2} <= u for eps1 > eps2. The table
// also records the gap max(u - u_eps) per eps.
inline CheckResult check_monotone_in_eps(const ScalarField& u, double q,
                                         std::vector<double> eps_schedule) {
  CheckResult c;
  c.name = "monotone_in_eps";
  c.params["q"] = q;
  std::sort(eps_schedule.begin(), eps_schedule.end(), std::greater<>());
  std::vector<double> prev;  // envelope at the previous (larger) eps
  for (double eps : eps_schedule) {
    EnvelopeResult res = inf_convolve_fast(u, {eps, q});
    double gap = 0.0;
    for (std::size_t k = 0; k < u.grid.size(); ++k) {
      const double ue = res.u_eps.values[k];
      if (ue > u.values[k]) c.add_violation(k, u.grid.point(k), ue - u.values[k]);
      if (!prev.empty() && prev[k] > ue) c.add_violation(k, u.grid.point(k), prev[k] - ue);
      gap = std::max(gap, u.values[k] - ue);
    }
    c.table.push_back({eps, gap});
    prev = res.u_eps.values;
  }
  return c;
}

// Gap bound for L-Lipschitz u: max(u - u_eps) <= (1 - 1/q) L^{q/(q-1)} eps + 10h.
inline CheckResult check_lipschitz_gap(const ScalarField& u, double q,
                                       const std::vector<double>& eps_schedule, double lip,
                                       double tol1_factor = 10.0) {
  CheckResult c;
  c.name = "lipschitz_gap";
  c.params["q"] = q;
  c.params["lip"] = lip;
  const double rate = (1.0 - 1.0 / q) * std::pow(lip, q / (q - 1.0));
  c.params["rate_constant"] = rate;
  for (double eps : eps_schedule) {
    EnvelopeResult res = inf_convolve_fast(u, {eps, q}, false);
    double gap = 0.0;
    std::size_t worst = 0;
    for (std::size_t k = 0; k < u.grid.size(); ++k) {
      const double d = u.values[k] - res.u_eps.values[k];
      if (d > gap) {
        gap = d;
        worst = k;
      }
    }
    c.table.push_back({eps, gap});
    const double bound = rate * eps + tol1_factor * u.grid.h_max();
    if (gap > bound) c.add_violation(worst, u.grid.point(worst), gap - bound);
  }
  return c;
}

// Second differences of u_eps against 2C|h|^2 on the valid mask (axis and
// diagonal steps).
inline CheckResult check_semiconcavity(const EnvelopeResult& res, double tol2_factor = 10.0) {
  CheckResult c;
  c.name = "semiconcavity";
  c.params["eps"] = res.eps;
  c.params["q"] = res.q;
  c.params["C"] = res.C;
  const Grid& g = res.u_eps.grid;
  const auto dirs = detail::second_difference_directions(g);
  const auto& v = res.u_eps.values;
  double worst_margin = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < g.size(); ++k) {
    if (!res.valid.mask[k]) continue;
    const auto ij = g.unflat(k);
    for (const auto& d : dirs) {
      if (!detail::offset_in_grid(g, ij[0], ij[1], d.d0, d.d1)) continue;
      const double sd = v[k + d.stride] + v[k - d.stride] - 2.0 * v[k];
      const double bound = (2.0 * res.C + tol2_factor) * d.step2;
      worst_margin = std::min(worst_margin, bound - sd);
      if (sd > bound) c.add_violation(k, g.point(k), sd - bound);
    }
  }
  if (std::isfinite(worst_margin)) c.min_residual = worst_margin;
  c.params["mask_nodes"] = res.valid.count();
  return c;
}

// Refined Hessian bound: second differences <= (q-1)/eps |Du_eps|^{(q-2)/(q-1)} |h|^2
// at nodes with a reliable finite-difference gradient.
inline CheckResult check_hessian_bound(const EnvelopeResult& res, double grad_tol,
                                       double tol2_factor = 10.0) {
  CheckResult c;
  c.name = "hessian_bound";
  c.params["eps"] = res.eps;
  c.params["q"] = res.q;
  c.params["grad_tol"] = grad_tol;
  const Grid& g = res.u_eps.grid;
  const auto dirs = detail::second_difference_directions(g);
  const auto& v = res.u_eps.values;
  for (std::size_t k = 0; k < g.size(); ++k) {
    if (!res.valid.mask[k] || !g.interior(k)) continue;
    const Point grad = fd_gradient(res.u_eps, k);
    const double gn = norm(grad, g.dim);
    if (gn <= grad_tol) continue;
    const double B = (res.q - 1.0) / res.eps * std::pow(gn, (res.q - 2.0) / (res.q - 1.0));
    const auto ij = g.unflat(k);
    for (const auto& d : dirs) {
      if (!detail::offset_in_grid(g, ij[0], ij[1], d.d0, d.d1)) continue;
      const double sd = v[k + d.stride] + v[k - d.stride] - 2.0 * v[k];
      const double bound = (B + tol2_factor) * d.step2;
      if (sd > bound) c.add_violation(k, g.point(k), sd - bound);
    }
  }
  return c;
}

// D^2 u_eps <= 0 on the discrete critical set {|Du_eps| <= grad_tol}.
inline CheckResult check_critical_concavity(const EnvelopeResult& res, double grad_tol,
                                            double tol2_factor = 10.0) {
  CheckResult c;
  c.name = "critical_concavity";
  c.params["eps"] = res.eps;
  c.params["q"] = res.q;
  c.params["grad_tol"] = grad_tol;
  const Grid& g = res.u_eps.grid;
  const auto dirs = detail::second_difference_directions(g);
  const auto& v = res.u_eps.values;
  std::size_t critical = 0;
  for (std::size_t k = 0; k < g.size(); ++k) {
    if (!res.valid.mask[k] || !g.interior(k)) continue;
    const Point grad = fd_gradient(res.u_eps, k);
    if (norm(grad, g.dim) > grad_tol) continue;
    ++critical;
    const auto ij = g.unflat(k);
    for (const auto& d : dirs) {
      if (!detail::offset_in_grid(g, ij[0], ij[1], d.d0, d.d1)) continue;
      const double sd = v[k + d.stride] + v[k - d.stride] - 2.0 * v[k];
      const double bound = tol2_factor * d.step2;
      if (sd > bound) c.add_violation(k, g.point(k), sd - bound);
    }
  }
  c.params["critical_nodes"] = critical;
  return c;
}

// u_eps touches u on the critical set: u - u_eps <= eps lip grad_tol^{1/(q-1)} + 10h.
// The tolerance is the quantitative content of the argmin distance bound for
// an L-Lipschitz u. Pass lip = NaN to estimate L from the envelope gradient.
inline CheckResult check_critical_touch(const EnvelopeResult& res, const ScalarField& u,
                                        double grad_tol, double lip,
                                        double tol1_factor = 10.0) {
  CheckResult c;
  c.name = "critical_touch";
  c.params["eps"] = res.eps;
  c.params["q"] = res.q;
  c.params["grad_tol"] = grad_tol;
  const Grid& g = u.grid;
  if (std::isnan(lip)) {
    lip = 0.0;
    for (std::size_t k = 0; k < g.size(); ++k)
      if (res.valid.mask[k] && g.interior(k))
        lip = std::max(lip, norm(fd_gradient(res.u_eps, k), g.dim));
    lip += grad_tol;
  }
  c.params["lip"] = lip;
  const double tol =
      res.eps * lip * std::pow(grad_tol, 1.0 / (res.q - 1.0)) + tol1_factor * g.h_max();
  c.params["tol"] = tol;
  for (std::size_t k = 0; k < g.size(); ++k) {
    if (!res.valid.mask[k] || !g.interior(k)) continue;
    if (norm(fd_gradient(res.u_eps, k), g.dim) > grad_tol) continue;
    const double gap = u.values[k] - res.u_eps.values[k];
    if (gap > tol) c.add_violation(k, g.point(k), gap - tol);
  }
  return c;
}

// (|x-y|/eps)^{q-1} <= |Du_eps(x)| + tol for every recorded argmin y. The
// continuum statement assumes the gradient exists; nodes that sit on a
// concave kink (near-zero FD gradient with a one-sided slope jump above the
// grad_tol scale) are skipped and counted instead.
inline CheckResult argmin_distance_bound_check(const EnvelopeResult& res,
                                               const GradientField& gf,
                                               double tol1_factor = 10.0) {
  if (res.argmin.empty())
    throw std::invalid_argument("argmin_distance_bound_check: argmins not collected");
  CheckResult c;
  c.name = "argmin_distance_bound";
  c.params["eps"] = res.eps;
  c.params["q"] = res.q;
  const Grid& g = res.u_eps.grid;
  const double tol = tol1_factor * g.h_max();
  const double grad_tol = tol;
  c.params["tol"] = tol;
  const auto dirs = detail::second_difference_directions(g);
  const auto& v = res.u_eps.values;
  std::size_t skipped = 0;
  for (std::size_t k = 0; k < g.size(); ++k) {
    if (!res.valid.mask[k] || !gf.valid[k]) continue;
    const double gn = norm(gf.grad[k], g.dim);
    if (gn <= grad_tol) {
      const auto ij = g.unflat(k);
      bool kink = false;
      for (const auto& d : dirs) {
        if (!detail::offset_in_grid(g, ij[0], ij[1], d.d0, d.d1)) continue;
        const double sd = v[k + d.stride] + v[k - d.stride] - 2.0 * v[k];
        if (sd < -grad_tol * std::sqrt(d.step2)) kink = true;
      }
      if (kink) {
        ++skipped;
        continue;
      }
    }
    const Point x = g.point(k);
    for (std::uint32_t y : res.argmin[k]) {
      const Point py = g.point(y);
      const Point d{x[0] - py[0], x[1] - py[1]};
      const double lhs = std::pow(norm(d, g.dim) / res.eps, res.q - 1.0);
      if (lhs > gn + tol) c.add_violation(k, x, lhs - (gn + tol));
    }
  }
  c.params["skipped_kink_nodes"] = skipped;
  return c;
}

// Empirical modulus of the map x -> max_{y in Y_eps(x)} |y - x|: the largest
// one-step increase between adjacent nodes of the valid mask. The continuum
// statement is upper semicontinuity; the discrete surrogate reports how far
// the map can jump up per grid step (to be driven over an h-refinement sweep).
inline double usc_modulus(const EnvelopeResult& res) {
  if (res.argmin.empty()) throw std::invalid_argument("usc_modulus: argmins not collected");
  const Grid& g = res.u_eps.grid;
  std::vector<double> maxdist(g.size(), 0.0);
  for (std::size_t k = 0; k < g.size(); ++k) {
    const Point x = g.point(k);
    double md = 0.0;
    for (std::uint32_t y : res.argmin[k]) {
      const Point py = g.point(y);
      const Point d{x[0] - py[0], x[1] - py[1]};
      md = std::max(md, norm(d, g.dim));
    }
    maxdist[k] = md;
  }
  double modulus = 0.0;
  for (std::size_t k = 0; k < g.size(); ++k) {
    if (!res.valid.mask[k]) continue;
    const auto ij = g.unflat(k);
    const std::ptrdiff_t strides[2] = {g.n[1], 1};
    for (int a = 0; a < g.dim; ++a)
      for (int s : {-1, 1}) {
        const int ia = ij[a] + s;
        if (ia < 0 || ia >= g.n[a]) continue;
        const std::size_t knb = k + s * strides[a];
        if (!res.valid.mask[knb]) continue;
        modulus = std::max(modulus, maxdist[knb] - maxdist[k]);
      }
  }
  return modulus;
}

// ---------------------------------------------------------------------------
// Serialization: u_eps in the field CSV format, an argmin sidecar CSV, and a
// JSON summary.

inline void write_envelope_sidecar_csv(const EnvelopeResult& res, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  os << "index,r_eps,C,n_argmins,argmin_indices\n";
  for (std::size_t k = 0; k < res.u_eps.grid.size(); ++k) {
    os << k << ',' << detail::fmt_double(res.r_eps) << ',' << detail::fmt_double(res.C) << ','
       << (res.argmin.empty() ? 0 : res.argmin[k].size());
    if (!res.argmin.empty())
      for (std::uint32_t y : res.argmin[k]) os << ',' << y;
    os << '\n';
  }
}

inline Json envelope_summary_json(const EnvelopeResult& res, const ScalarField& u) {
  double gap = 0.0;
  for (std::size_t k = 0; k < u.grid.size(); ++k)
    gap = std::max(gap, u.values[k] - res.u_eps.values[k]);
  Json j = Json::object();
  j["eps"] = res.eps;
  j["q"] = res.q;
  j["r_eps"] = res.r_eps;
  j["C"] = res.C;
  j["max_gap_u_minus_ueps"] = gap;
  return j;
}

}  // namespace plaplab
