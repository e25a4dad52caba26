#pragma once

// Weak-form residuals against smooth bumps, the supersolution scan over a
// deterministic quasi-random test-function family, windowed infima of the
// datum f, the critical-set sign condition, the touching-test decay rates,
// and generic parameter sweeps.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "plaplab/calculus.hpp"
#include "plaplab/envelope.hpp"
#include "plaplab/grid.hpp"
#include "plaplab/report.hpp"
#include "plaplab/rng.hpp"

namespace plaplab {

// Smooth nonnegative bump supported on B_rho(center):
//   psi(x) = amplitude * exp(-1 / (1 - |x-center|^2/rho^2)).
struct TestFunction {
  Point center{0.0, 0.0};
  double rho = 1.0;
  double amplitude = 1.0;
  int dim = 1;

  TestFunction(Point c, double r, double a, int d) : center(c), rho(r), amplitude(a), dim(d) {
    if (!(r > 0.0) || !(a > 0.0)) throw std::invalid_argument("bump: need rho > 0, amplitude > 0");
  }

  double value(Point x) const {
    const double t = 1.0 - s2(x);
    if (t <= 1e-12) return 0.0;
    return amplitude * std::exp(-1.0 / t);
  }

  Point grad(Point x) const {
    const double t = 1.0 - s2(x);
    if (t <= 1e-12) return {0.0, 0.0};
    const double v = amplitude * std::exp(-1.0 / t);
    const double s = -2.0 * v / (rho * rho * t * t);
    return {s * (x[0] - center[0]), dim == 2 ? s * (x[1] - center[1]) : 0.0};
  }

  // Support must sit strictly inside [lo + margin, hi - margin] per axis.
  void require_inside(const Grid& g, double margin) const {
    if (dim != g.dim) throw std::invalid_argument("bump: dimension mismatch");
    for (int a = 0; a < g.dim; ++a)
      if (!(center[a] - rho > g.lo[a] + margin && center[a] + rho < g.hi[a] - margin))
        throw std::invalid_argument("bump: support not inside the valid region");
  }

 private:
  double s2(Point x) const {
    const Point d{x[0] - center[0], dim == 2 ? x[1] - center[1] : 0.0};
    return dot(d, d, dim) / (rho * rho);
  }
};

// ---------------------------------------------------------------------------
// Weak-form residual
//   R = sum_nodes [ |Du|^{p-2} Du . Dpsi - f psi ] h^d,
// node-sum quadrature, FD gradients. For 1 < p < 2 the integrand is zeroed
// where |Du| <= grad_tol (the continuous extension by 0); for p >= 2 the
// flux is evaluated directly, it has no singularity.
// A weak supersolution has R >= -tol for every admissible psi.

inline double weak_residual(const GradientField& gf, const TestFunction& psi, double p,
                            const ScalarField* f, double grad_tol,
                            double extra_margin = 0.0) {
  const Grid& g = gf.grid;
  psi.require_inside(g, g.h_max() + extra_margin);
  if (f && !f->grid.same_geometry(g))
    throw std::invalid_argument("weak_residual: f lives on a different grid");

  // Node box covering the support.
  int lo[2] = {0, 0}, hi[2] = {g.n[0] - 1, 0};
  for (int a = 0; a < g.dim; ++a) {
    lo[a] = std::max(0, static_cast<int>(std::ceil((psi.center[a] - psi.rho - g.lo[a]) / g.h(a))));
    hi[a] = std::min(g.n[a] - 1,
                     static_cast<int>(std::floor((psi.center[a] + psi.rho - g.lo[a]) / g.h(a))));
  }
  if (g.dim == 1) {
    lo[1] = 0;
    hi[1] = 0;
  }

  double acc = 0.0;
  for (int i0 = lo[0]; i0 <= hi[0]; ++i0)
    for (int i1 = lo[1]; i1 <= hi[1]; ++i1) {
      const std::size_t k = g.flat(i0, i1);
      const Point x = g.point(k);
      double term = 0.0;
      if (gf.valid[k]) {
        const Point grad = gf.grad[k];
        const double gn = norm(grad, g.dim);
        if (p >= 2.0 ? gn > 0.0 : gn > grad_tol) {
          const Point dpsi = psi.grad(x);
          term += std::pow(gn, p - 2.0) * dot(grad, dpsi, g.dim);
        }
      }
      if (f) term -= f->values[k] * psi.value(x);
      acc += term;
    }
  return acc * g.cell_volume();
}

inline double weak_residual(const ScalarField& u, const TestFunction& psi, double p,
                            const ScalarField* f, double grad_tol,
                            double extra_margin = 0.0) {
  return weak_residual(gradient_field(u), psi, p, f, grad_tol, extra_margin);
}

// ---------------------------------------------------------------------------
// Supersolution scan: weak_residual over a deterministic trial family.
// Trial 0 is the canonical centered bump; the rest draw (rho, center,
// amplitude) from the counter RNG.

struct ScanParams {
  int trials = 100;
  double tol = 0.0;        // PASS iff min residual >= -tol
  double grad_tol = 0.0;
  double extra_margin = 0.0;  // keep supports this far inside (e.g. r_eps)
  std::uint64_t seed = 0;
};

inline TestFunction scan_trial(const Grid& g, const ScanParams& sp, int t) {
  const double margin = g.h_max() + sp.extra_margin;
  double half = std::numeric_limits<double>::infinity();
  for (int a = 0; a < g.dim; ++a) half = std::min(half, 0.5 * (g.hi[a] - g.lo[a]));
  const double avail = half - margin;
  const double rho_max = 0.6 * avail;
  // bumps need ~10 nodes per radius or the node-sum quadrature goes noisy
  const double rho_min = std::max(10.0 * g.h_max(), 0.15 * rho_max);
  if (!(rho_min < rho_max))
    throw std::invalid_argument("scan: margin leaves no room for test functions");

  if (t == 0) {
    Point c{0.5 * (g.lo[0] + g.hi[0]), g.dim == 2 ? 0.5 * (g.lo[1] + g.hi[1]) : 0.0};
    return TestFunction(c, std::clamp(0.3 * half, rho_min, rho_max), 1.0, g.dim);
  }
  const CounterRng rng(sp.seed, "scan_trials");
  const std::uint64_t base = 4ULL * static_cast<std::uint64_t>(t);
  const double rho = rng.uniform(base, rho_min, rho_max);
  Point c{0.0, 0.0};
  for (int a = 0; a < g.dim; ++a)
    c[a] = rng.uniform(base + 1 + a, g.lo[a] + margin + rho, g.hi[a] - margin - rho);
  const double amp = rng.uniform(base + 3, 0.5, 2.0);
  return TestFunction(c, rho, amp, g.dim);
}

inline CheckResult supersolution_scan(const ScalarField& u, double p, const ScalarField* f,
                                      const ScanParams& sp) {
  if (sp.trials < 1) throw std::invalid_argument("scan: need at least one trial");
  CheckResult c;
  c.name = "supersolution_scan";
  c.params["p"] = p;
  c.params["trials"] = sp.trials;
  c.params["tol"] = sp.tol;
  c.params["grad_tol"] = sp.grad_tol;
  const GradientField gf = gradient_field(u);
  double worst = std::numeric_limits<double>::infinity();
  for (int t = 0; t < sp.trials; ++t) {
    const TestFunction psi = scan_trial(u.grid, sp, t);
    const double r = weak_residual(gf, psi, p, f, sp.grad_tol, sp.extra_margin);
    c.table.push_back({static_cast<double>(t), r});
    worst = std::min(worst, r);
    if (r < -sp.tol) {
      Point w{psi.center[0], psi.center[1]};
      c.add_violation(static_cast<std::size_t>(t), w, -sp.tol - r);
    }
  }
  c.min_residual = worst;
  return c;
}

// Left-hand side of the regularized weak form:
//   sum (|Du|^2 + delta)^{(p-2)/2} Du . Dpsi h^d.
// delta == 0 gives the unregularized sum with the integrand zeroed on the
// discrete critical set, the limit object of the delta sweep.
inline double regularized_flux_sum(const GradientField& gf, const TestFunction& psi, double p,
                                   double delta, double grad_tol, double extra_margin = 0.0) {
  const Grid& g = gf.grid;
  psi.require_inside(g, g.h_max() + extra_margin);
  int lo[2] = {0, 0}, hi[2] = {g.n[0] - 1, 0};
  for (int a = 0; a < g.dim; ++a) {
    lo[a] = std::max(0, static_cast<int>(std::ceil((psi.center[a] - psi.rho - g.lo[a]) / g.h(a))));
    hi[a] = std::min(g.n[a] - 1,
                     static_cast<int>(std::floor((psi.center[a] + psi.rho - g.lo[a]) / g.h(a))));
  }
  if (g.dim == 1) {
    lo[1] = 0;
    hi[1] = 0;
  }
  double acc = 0.0;
  for (int i0 = lo[0]; i0 <= hi[0]; ++i0)
    for (int i1 = lo[1]; i1 <= hi[1]; ++i1) {
      const std::size_t k = g.flat(i0, i1);
      if (!gf.valid[k]) continue;
      const Point grad = gf.grad[k];
      const double gn = norm(grad, g.dim);
      const Point dpsi = psi.grad(g.point(k));
      if (delta > 0.0)
        acc += std::pow(gn * gn + delta, 0.5 * (p - 2.0)) * dot(grad, dpsi, g.dim);
      else if (p >= 2.0 ? gn > 0.0 : gn > grad_tol)
        acc += std::pow(gn, p - 2.0) * dot(grad, dpsi, g.dim);
    }
  return acc * g.cell_volume();
}

// ---------------------------------------------------------------------------
// Windowed infimum f_eps(x) = min over the grid ball |y-x| <= r of f(y).

inline ScalarField f_window_inf(const ScalarField& f, double r) {
  if (r < 0.0) throw std::invalid_argument("f_window_inf: need r >= 0");
  const Grid& g = f.grid;
  std::vector<double> out(g.size());
  for (int i0 = 0; i0 < g.n[0]; ++i0)
    for (int i1 = 0; i1 < g.n[1]; ++i1) {
      const std::size_t k = g.flat(i0, i1);
      const auto b = detail::window_box(g, i0, i1, r);
      double best = f.values[k];
      for (int j0 = b.lo0; j0 <= b.hi0; ++j0)
        for (int j1 = b.lo1; j1 <= b.hi1; ++j1) {
          double d2 = 0.0;
          const double dx = (i0 - j0) * g.h(0);
          d2 += dx * dx;
          if (g.dim == 2) {
            const double dy = (i1 - j1) * g.h(1);
            d2 += dy * dy;
          }
          if (d2 <= r * r) best = std::min(best, f.values[g.flat(j0, j1)]);
        }
      out[k] = best;
    }
  return ScalarField(g, std::move(out), f.meta);
}

// ---------------------------------------------------------------------------
// Critical-set sign condition: on {|Du_eps| <= grad_tol} inside the valid
// mask, the datum must satisfy f <= f_tol and the envelope must touch u.

inline CheckResult critical_sign_check(const ScalarField& u, const EnvelopeResult& res,
                                       const ScalarField* f, double p, double q,
                                       double grad_tol, double lip,
                                       double tol1_factor = 10.0) {
  if (p < 2.0 && !(q > p / (p - 1.0)))
    throw std::invalid_argument("critical_sign_check: need q > p/(p-1)");
  CheckResult c;
  c.name = "critical_sign";
  c.params["p"] = p;
  c.params["q"] = q;
  c.params["eps"] = res.eps;
  c.params["grad_tol"] = grad_tol;
  const Grid& g = u.grid;
  const double f_tol = tol1_factor * g.h_max();
  if (std::isnan(lip)) {
    lip = 0.0;
    for (std::size_t k = 0; k < g.size(); ++k)
      if (res.valid.mask[k] && g.interior(k))
        lip = std::max(lip, norm(fd_gradient(res.u_eps, k), g.dim));
    lip += grad_tol;
  }
  const double touch_tol =
      res.eps * lip * std::pow(grad_tol, 1.0 / (res.q - 1.0)) + tol1_factor * g.h_max();
  c.params["f_tol"] = f_tol;
  c.params["touch_tol"] = touch_tol;
  std::size_t critical = 0;
  for (std::size_t k = 0; k < g.size(); ++k) {
    if (!res.valid.mask[k] || !g.interior(k)) continue;
    if (norm(fd_gradient(res.u_eps, k), g.dim) > grad_tol) continue;
    ++critical;
    const double fv = f ? f->values[k] : 0.0;
    if (fv > f_tol) c.add_violation(k, g.point(k), fv - f_tol);
    const double gap = u.values[k] - res.u_eps.values[k];
    if (gap > touch_tol) c.add_violation(k, g.point(k), gap - touch_tol);
  }
  c.params["critical_nodes"] = critical;
  return c;
}

// ---------------------------------------------------------------------------
// Touching test decay. For psi(y) = u(xhat) - |xhat-y|^q / (q eps^{q-1}),
//   -Delta_p psi on the shell |y-xhat| = r equals
//   [(p-1)(q-1) + n - 1] * r^{(q-1)(p-1)-1} / eps^{(q-1)(p-1)},
// so the sup decays iff the exponent (q-1)(p-1)-1 is positive, i.e.
// q > p/(p-1).

inline double touching_shell_sup(double p, double q, double eps, int dim, double r) {
  const double beta = (q - 1.0) * (p - 1.0);
  const double coef = (p - 1.0) * (q - 1.0) + dim - 1.0;
  return coef * std::pow(r, beta - 1.0) * std::pow(eps, -beta);
}

// Independent route for the same quantity: analytic gradient/Hessian of psi
// fed through the expanded operator.
inline double touching_shell_sup_via_operator(double p, double q, double eps, int dim,
                                              Point offset) {
  const double r2 = dot(offset, offset, dim);
  const double r = std::sqrt(r2);
  if (!(r > 0.0)) throw std::invalid_argument("touching: offset must be nonzero");
  const double scale = 1.0 / std::pow(eps, q - 1.0);
  const double a = std::pow(r, q - 2.0) * scale;        // |d|^{q-2}/eps^{q-1}
  const double b = (q - 2.0) * std::pow(r, q - 4.0) * scale;
  Point grad{-a * offset[0], dim == 2 ? -a * offset[1] : 0.0};
  SymMat H;
  H.xx = -(a + b * offset[0] * offset[0]);
  if (dim == 2) {
    H.yy = -(a + b * offset[1] * offset[1]);
    H.xy = -b * offset[0] * offset[1];
  }
  auto v = p_laplacian_expanded(grad, H, p, dim);
  if (!v) throw std::runtime_error("touching: operator undefined");
  return *v;
}

inline CheckResult touching_test_decay(double p, double q, double eps, int dim,
                                       const std::vector<double>& radii) {
  if (!(q >= 2.0)) throw std::invalid_argument("touching_test_decay: need q >= 2");
  CheckResult c;
  c.name = "touching_test_decay";
  c.params["p"] = p;
  c.params["q"] = q;
  c.params["eps"] = eps;
  c.params["dim"] = dim;
  const double expected = (q - 1.0) * (p - 1.0) - 1.0;
  c.params["expected_exponent"] = expected;
  c.params["decays"] = expected > 0.0;
  for (double r : radii) c.table.push_back({r, touching_shell_sup(p, q, eps, dim, r)});
  const double observed = fit_order(c.table);
  c.params["observed_exponent"] = observed;
  c.min_residual = std::fabs(observed - expected);
  c.pass = c.min_residual <= 0.05;
  if (!c.pass) c.add_violation(0, Point{0, 0}, c.min_residual);
  return c;
}

// ---------------------------------------------------------------------------
// Generic sweep driver: run a residual at each schedule point, report the
// table and the fitted convergence order.

inline void require_strictly_monotone(const std::vector<double>& s, const char* what) {
  if (s.size() < 2) return;
  const bool inc = s[1] > s[0];
  for (std::size_t i = 1; i < s.size(); ++i)
    if (!(inc ? s[i] > s[i - 1] : s[i] < s[i - 1]))
      throw std::invalid_argument(std::string(what) + ": schedule must be strictly monotone");
}

inline CheckResult run_sweep(const std::string& name, const std::vector<double>& schedule,
                             const std::function<double(double)>& residual) {
  require_strictly_monotone(schedule, name.c_str());
  CheckResult c;
  c.name = name;
  for (double s : schedule) c.table.push_back({s, residual(s)});
  c.params["order"] = fit_order(c.table);
  return c;
}

}  // namespace plaplab
