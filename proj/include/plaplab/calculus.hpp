#pragma once

// Finite-difference differential operators and the p-Laplacian forms:
// the expanded (negative) operator, its delta-regularization, the uniform
// lower bounds used with Fatou's lemma, and the three-exponent pointwise
// identity.

#include <cmath>
#include <cstddef>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <vector>

#include "plaplab/gallery.hpp"
#include "plaplab/grid.hpp"

namespace plaplab {

// Central second-order differences; interior nodes only.
inline Point fd_gradient(const ScalarField& u, std::size_t k) {
  const Grid& g = u.grid;
  if (!g.interior(k)) throw std::invalid_argument("fd_gradient: boundary node");
  Point out{0.0, 0.0};
  const std::size_t sx = static_cast<std::size_t>(g.n[1]);
  out[0] = (u.values[k + sx] - u.values[k - sx]) / (2.0 * g.h(0));
  if (g.dim == 2) out[1] = (u.values[k + 1] - u.values[k - 1]) / (2.0 * g.h(1));
  return out;
}

// 3-point diagonal, 4-corner off-diagonal stencils; symmetric by construction.
inline SymMat fd_hessian(const ScalarField& u, std::size_t k) {
  const Grid& g = u.grid;
  if (!g.interior(k)) throw std::invalid_argument("fd_hessian: boundary node");
  const std::size_t sx = static_cast<std::size_t>(g.n[1]);
  const double hx = g.h(0);
  SymMat m;
  m.xx = (u.values[k + sx] - 2.0 * u.values[k] + u.values[k - sx]) / (hx * hx);
  if (g.dim == 2) {
    const double hy = g.h(1);
    m.yy = (u.values[k + 1] - 2.0 * u.values[k] + u.values[k - 1]) / (hy * hy);
    m.xy = (u.values[k + sx + 1] - u.values[k + sx - 1] - u.values[k - sx + 1] +
            u.values[k - sx - 1]) /
           (4.0 * hx * hy);
  }
  return m;
}

// Gradient field evaluated at every interior node (zero elsewhere, flagged).
struct GradientField {
  Grid grid;
  std::vector<Point> grad;
  std::vector<std::uint8_t> valid;
};

inline GradientField gradient_field(const ScalarField& u) {
  GradientField gf;
  gf.grid = u.grid;
  gf.grad.assign(u.grid.size(), Point{0.0, 0.0});
  gf.valid.assign(u.grid.size(), 0);
  for (std::size_t k = 0; k < u.grid.size(); ++k) {
    if (!u.grid.interior(k)) continue;
    gf.grad[k] = fd_gradient(u, k);
    gf.valid[k] = 1;
  }
  return gf;
}

// Value of -Delta_p u = -|Du|^{p-2}(tr D^2u + (p-2) D^2u Du/|Du| . Du/|Du|).
// For 1 < p < 2 the value is undefined (nullopt) when |grad| <= grad_tol.
// p == 2 reduces to -tr D^2u everywhere; p > 2 extends continuously by 0 at
// vanishing gradient.
inline std::optional<double> p_laplacian_expanded(const Point& grad, const SymMat& hess,
                                                  double p, int dim, double grad_tol = 0.0) {
  if (!(p > 1.0)) throw std::invalid_argument("p_laplacian_expanded: need p > 1");
  const double tr = trace(hess, dim);
  if (p == 2.0) return -tr;
  const double g2 = dot(grad, grad, dim);
  const double gn = std::sqrt(g2);
  if (p < 2.0) {
    if (gn <= grad_tol) return std::nullopt;
  } else if (gn == 0.0) {
    return 0.0;
  }
  const double aniso = quad_form(hess, grad, dim) / g2;
  return -std::pow(gn, p - 2.0) * (tr + (p - 2.0) * aniso);
}

// -(|Du|^2 + delta)^{(p-2)/2} (tr D^2u + (p-2)/(|Du|^2+delta) D^2u Du . Du).
// Defined for every gradient, including zero.
inline double regularized_divergence(const Point& grad, const SymMat& hess, double p,
                                     double delta, int dim) {
  if (!(delta > 0.0)) throw std::invalid_argument("regularized_divergence: need delta > 0");
  const double s = dot(grad, grad, dim) + delta;
  return -std::pow(s, 0.5 * (p - 2.0)) * (trace(hess, dim) + (p - 2.0) / s * quad_form(hess, grad, dim));
}

// Magnitude C of the uniform lower bound -C for the regularized operator on
// the envelope, singular case: C = (n+p-2)(q-1)/eps * lip^{p-2+(q-2)/(q-1)}.
// Requires q > p/(p-1), which makes the exponent positive.
inline double fatou_lower_bound(double p, double q, double eps, double lip, int dim) {
  if (!(p > 1.0 && p < 2.0)) throw std::invalid_argument("fatou_lower_bound: need 1 < p < 2");
  if (!(q > p / (p - 1.0)))
    throw std::invalid_argument("fatou_lower_bound: need q > p/(p-1)");
  if (!(eps > 0.0) || lip < 0.0) throw std::invalid_argument("fatou_lower_bound: bad eps/lip");
  const double expo = p - 2.0 + (q - 2.0) / (q - 1.0);
  return (dim + p - 2.0) * (q - 1.0) / eps * std::pow(lip, expo);
}

// Degenerate case p >= 2: magnitude of the bound grad_bound^{p-2}(n+p-2)/eps.
inline double degenerate_lower_bound(double p, double eps, double grad_bound, int dim) {
  if (!(p >= 2.0)) throw std::invalid_argument("degenerate_lower_bound: need p >= 2");
  if (!(eps > 0.0) || grad_bound < 0.0)
    throw std::invalid_argument("degenerate_lower_bound: bad eps/grad_bound");
  return std::pow(grad_bound, p - 2.0) * (dim + p - 2.0) / eps;
}

// Exponent triple 1 < q < p < r for the pointwise identity.
struct ExponentTriple {
  double q, p, r;
  ExponentTriple(double q_, double p_, double r_) : q(q_), p(p_), r(r_) {
    if (!(1.0 < q && q < p && p < r))
      throw std::invalid_argument("exponent triple must satisfy 1 < q < p < r");
  }
};

// Normalized residual |LHS - RHS| / (1 + |LHS|) of
//   (r-q)|Du|^{2-p} D_p u = (r-p)|Du|^{2-q} D_q u + (p-q)|Du|^{2-r} D_r u
// evaluated with analytic derivatives. Rejects critical points.
inline double pointwise_identity_residual(const GalleryEntry& e, Point x, int dim,
                                          const ExponentTriple& t) {
  const Point g = e.grad(x, dim);
  const SymMat H = e.hess(x, dim);
  const double gn = norm(g, dim);
  if (!(gn > 0.0)) throw std::invalid_argument("pointwise_identity_residual: zero gradient");
  const double tr = trace(H, dim);
  const double aniso = quad_form(H, g, dim) / (gn * gn);
  auto plap = [&](double s) { return std::pow(gn, s - 2.0) * (tr + (s - 2.0) * aniso); };
  const double lhs = (t.r - t.q) * std::pow(gn, 2.0 - t.p) * plap(t.p);
  const double rhs = (t.r - t.p) * std::pow(gn, 2.0 - t.q) * plap(t.q) +
                     (t.p - t.q) * std::pow(gn, 2.0 - t.r) * plap(t.r);
  return std::fabs(lhs - rhs) / (1.0 + std::fabs(lhs));
}

// A full operator evaluation at one node.
struct OperatorSample {
  std::size_t index = 0;
  Point x{0.0, 0.0};
  Point grad{0.0, 0.0};
  SymMat hess;
  bool plap_defined = false;
  double plap = 0.0;  // value of -Delta_p when defined
  double regdiv = 0.0;
};

inline OperatorSample sample_operator(const ScalarField& u, std::size_t k, double p,
                                      double delta, double grad_tol) {
  OperatorSample s;
  s.index = k;
  s.x = u.grid.point(k);
  s.grad = fd_gradient(u, k);
  s.hess = fd_hessian(u, k);
  auto v = p_laplacian_expanded(s.grad, s.hess, p, u.grid.dim, grad_tol);
  s.plap_defined = v.has_value();
  s.plap = v.value_or(0.0);
  s.regdiv = regularized_divergence(s.grad, s.hess, p, delta, u.grid.dim);
  return s;
}

inline void write_operator_csv(const ScalarField& u, double p, double delta, double grad_tol,
                               const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  const int dim = u.grid.dim;
  char head[96];
  std::snprintf(head, sizeof(head), "regdiv(delta=%.17g)", delta);
  if (dim == 1)
    os << "index,gx,hxx,plap_defined,plap," << head << '\n';
  else
    os << "index,gx,gy,hxx,hxy,hyy,plap_defined,plap," << head << '\n';
  for (std::size_t k = 0; k < u.grid.size(); ++k) {
    if (!u.grid.interior(k)) continue;
    OperatorSample s = sample_operator(u, k, p, delta, grad_tol);
    os << s.index << ',' << detail::fmt_double(s.grad[0]);
    if (dim == 2) os << ',' << detail::fmt_double(s.grad[1]);
    os << ',' << detail::fmt_double(s.hess.xx);
    if (dim == 2)
      os << ',' << detail::fmt_double(s.hess.xy) << ',' << detail::fmt_double(s.hess.yy);
    os << ',' << (s.plap_defined ? 1 : 0) << ','
       << detail::fmt_double(s.plap_defined ? s.plap : 0.0) << ','
       << detail::fmt_double(s.regdiv) << '\n';
  }
}

}  // namespace plaplab
