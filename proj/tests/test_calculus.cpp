#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "plaplab/calculus.hpp"
#include "plaplab/gallery.hpp"
#include "plaplab/report.hpp"
#include "plaplab/rng.hpp"
#include "test_util.hpp"

using namespace plaplab;

namespace {

// Independent oracle for -Delta_p at a point: central finite differences of
// the analytic flux |Du|^{p-2} Du, with one step of Richardson extrapolation.
double neg_div_flux_fd(const GalleryEntry& e, Point x, int dim, double p, double step) {
  auto flux = [&](Point y, int i) {
    Point g = e.grad(y, dim);
    return std::pow(norm(g, dim), p - 2.0) * g[i];
  };
  auto div_at = [&](double d) {
    double s = 0.0;
    for (int i = 0; i < dim; ++i) {
      Point a = x, b = x;
      a[i] += d;
      b[i] -= d;
      s += (flux(a, i) - flux(b, i)) / (2.0 * d);
    }
    return s;
  };
  return -(4.0 * div_at(0.5 * step) - div_at(step)) / 3.0;
}

double lambda_max(const SymMat& m, int dim) {
  if (dim == 1) return m.xx;
  double tr = m.xx + m.yy;
  double disc = std::sqrt((m.xx - m.yy) * (m.xx - m.yy) + 4.0 * m.xy * m.xy);
  return 0.5 * (tr + disc);
}

}  // namespace

TEST_CASE("FD gradient and Hessian are exact on polynomials of degree <= 2") {
  for (int dim : {1, 2}) {
    for (const char* name : {"constant", "affine", "quadratic_bowl", "neg_quadratic"}) {
      const GalleryEntry& e = gallery_entry(name);
      Grid g = default_grid(e, dim, dim == 1 ? 17 : 9);
      ScalarField u = sample(e, g);
      for (std::size_t k = 0; k < g.size(); ++k) {
        if (!g.interior(k)) continue;
        Point x = g.point(k);
        Point gr = fd_gradient(u, k);
        Point ga = e.grad(x, dim);
        SymMat hf = fd_hessian(u, k);
        SymMat ha = e.hess(x, dim);
        for (int a = 0; a < dim; ++a) REQUIRE(gr[a] == Catch::Approx(ga[a]).margin(1e-12));
        REQUIRE(hf.xx == Catch::Approx(ha.xx).margin(1e-9));
        if (dim == 2) {
          REQUIRE(hf.yy == Catch::Approx(ha.yy).margin(1e-9));
          REQUIRE(hf.xy == Catch::Approx(ha.xy).margin(1e-9));
        }
      }
    }
  }
}

TEST_CASE("FD operators reject boundary nodes") {
  ScalarField u = sample("affine", Grid::line(0.0, 1.0, 5));
  REQUIRE_THROWS_AS(fd_gradient(u, 0), std::invalid_argument);
  REQUIRE_THROWS_AS(fd_hessian(u, u.grid.size() - 1), std::invalid_argument);
}

TEST_CASE("FD matches analytic derivatives at second order on curved entries") {
  for (const char* name : {"radial_p15", "neg_log", "radial_p3"}) {
    const GalleryEntry& e = gallery_entry(name);
    std::vector<SweepRow> gerr, herr;
    for (int n : {65, 129, 257, 513}) {
      Grid g = default_grid(e, 2, n);
      ScalarField u = sample(e, g);
      double ge = 0.0, he = 0.0;
      for (std::size_t k = 0; k < g.size(); ++k) {
        if (!g.interior(k)) continue;
        Point x = g.point(k);
        Point gf = fd_gradient(u, k);
        Point ga = e.grad(x, 2);
        Point d{gf[0] - ga[0], gf[1] - ga[1]};
        ge = std::max(ge, norm(d, 2));
        SymMat hf = fd_hessian(u, k);
        SymMat ha = e.hess(x, 2);
        he = std::max({he, std::fabs(hf.xx - ha.xx), std::fabs(hf.xy - ha.xy),
                       std::fabs(hf.yy - ha.yy)});
      }
      gerr.push_back({g.h(0), ge});
      herr.push_back({g.h(0), he});
    }
    // the error peaks next to the excluded corner, where the third
    // derivatives are large; the asymptotic order shows on the finest pair
    auto last_pair_order = [](const std::vector<SweepRow>& rows) {
      const auto& a = rows[rows.size() - 2];
      const auto& b = rows.back();
      return std::log(a.residual / b.residual) / std::log(a.param / b.param);
    };
    INFO(name);
    REQUIRE(last_pair_order(gerr) >= 1.9);
    REQUIRE(last_pair_order(herr) >= 1.9);
    REQUIRE(fit_order(gerr) >= 1.7);
    REQUIRE(fit_order(herr) >= 1.7);
  }
}

TEST_CASE("expanded p-Laplacian") {
  SECTION("affine: zero for every p") {
    for (double p : {1.5, 2.0, 3.0}) {
      auto v = p_laplacian_expanded(Point{0.6, -0.8}, SymMat{}, p, 2);
      REQUIRE(v.has_value());
      REQUIRE(*v == 0.0);
    }
  }
  SECTION("quadratic bowl at |x| = 1: -(n+p-2), against the flux oracle") {
    const GalleryEntry& e = gallery_entry("quadratic_bowl");
    for (int dim : {1, 2}) {
      Point x = dim == 1 ? Point{1.0, 0.0} : Point{std::sqrt(0.5), std::sqrt(0.5)};
      for (double p : {1.5, 2.0, 3.0, 3.7}) {
        auto v = p_laplacian_expanded(e.grad(x, dim), e.hess(x, dim), p, dim);
        REQUIRE(v.has_value());
        REQUIRE(*v == Catch::Approx(-(dim + p - 2.0)).margin(1e-12));
        REQUIRE(*v == Catch::Approx(neg_div_flux_fd(e, x, dim, p, 1e-4)).margin(1e-7));
      }
    }
  }
  SECTION("radial gallery profiles are p-harmonic off the origin") {
    struct Case {
      const char* name;
      double p;
    } cases[] = {{"radial_p15", 1.5}, {"radial_p3", 3.0}, {"neg_log", 2.0}};
    for (const auto& c : cases) {
      const GalleryEntry& e = gallery_entry(c.name);
      for (Point x : {Point{0.5, 0.4}, Point{0.9, 1.1}, Point{1.2, 0.3}}) {
        auto v = p_laplacian_expanded(e.grad(x, 2), e.hess(x, 2), c.p, 2);
        REQUIRE(v.has_value());
        REQUIRE(*v == Catch::Approx(0.0).margin(1e-10));
        REQUIRE(neg_div_flux_fd(e, x, 2, c.p, 1e-4) == Catch::Approx(0.0).margin(1e-6));
      }
    }
  }
  SECTION("p = 2 reduces to -trace everywhere, including critical points") {
    auto v = p_laplacian_expanded(Point{0.0, 0.0}, SymMat{2.0, 0.5, -1.0}, 2.0, 2);
    REQUIRE(v.has_value());
    REQUIRE(*v == -1.0);
  }
  SECTION("p > 2 extends by zero at a vanishing gradient") {
    auto v = p_laplacian_expanded(Point{0.0, 0.0}, SymMat{1.0, 0.0, 1.0}, 3.0, 2);
    REQUIRE(v.has_value());
    REQUIRE(*v == 0.0);
  }
  SECTION("1 < p < 2 is undefined on the discrete critical set") {
    double grad_tol = 0.05;
    REQUIRE_FALSE(
        p_laplacian_expanded(Point{0.01, 0.0}, SymMat{1, 0, 1}, 1.5, 2, grad_tol).has_value());
    REQUIRE(
        p_laplacian_expanded(Point{0.2, 0.0}, SymMat{1, 0, 1}, 1.5, 2, grad_tol).has_value());
  }
}

TEST_CASE("regularized divergence") {
  SECTION("zero Hessian: zero for every delta") {
    for (double d : {1e-6, 1e-2, 1.0})
      REQUIRE(regularized_divergence(Point{0.3, 0.1}, SymMat{}, 1.5, d, 2) == 0.0);
  }
  SECTION("critical point of the bowl: -delta^{(p-2)/2} * n") {
    // direct substitution: grad = 0, hess = I
    for (int dim : {1, 2}) {
      SymMat id = dim == 1 ? SymMat{1, 0, 0} : SymMat{1, 0, 1};
      for (double p : {1.5, 3.0}) {
        for (double d : {1e-4, 1e-2}) {
          double expect = -std::pow(d, 0.5 * (p - 2.0)) * dim;
          REQUIRE(regularized_divergence(Point{0, 0}, id, p, d, dim) ==
                  Catch::Approx(expect).epsilon(1e-14));
        }
      }
    }
  }
  SECTION("delta -> 0 recovers the expanded operator at first order") {
    Point g{0.3, -0.2};
    SymMat H{1.2, -0.4, 0.7};
    for (double p : {1.5, 2.7}) {
      double target = *p_laplacian_expanded(g, H, p, 2);
      std::vector<SweepRow> rows;
      for (double d : {1e-2, 1e-3, 1e-4, 1e-5})
        rows.push_back({d, std::fabs(regularized_divergence(g, H, p, d, 2) - target)});
      double order = fit_order(rows);
      REQUIRE(order == Catch::Approx(1.0).margin(0.1));
    }
  }
  SECTION("rejects delta <= 0") {
    REQUIRE_THROWS_AS(regularized_divergence(Point{1, 0}, SymMat{}, 1.5, 0.0, 2),
                      std::invalid_argument);
  }
}

TEST_CASE("Fatou lower bound, singular case") {
  // dual exponent boundary: q must exceed p/(p-1)
  REQUIRE_THROWS_AS(fatou_lower_bound(1.5, 3.0, 1.0, 1.0, 2), std::invalid_argument);
  REQUIRE_THROWS_AS(fatou_lower_bound(1.5, 2.8, 1.0, 1.0, 2), std::invalid_argument);
  REQUIRE_NOTHROW(fatou_lower_bound(1.5, 3.2, 1.0, 1.0, 2));

  // (n+p-2)(q-1)/eps with lip = 1: exponent p-2+(q-2)/(q-1) = 1/6
  REQUIRE(fatou_lower_bound(1.5, 4.0, 1.0, 1.0, 2) == Catch::Approx(4.5).epsilon(1e-14));
  REQUIRE(fatou_lower_bound(1.5, 4.0, 1.0, 0.0, 2) == 0.0);
}

TEST_CASE("degenerate-case lower bound") {
  REQUIRE(degenerate_lower_bound(2.0, 0.25, 7.0, 2) == Catch::Approx(8.0));   // n/eps
  REQUIRE(degenerate_lower_bound(2.0, 0.25, 0.0, 2) == Catch::Approx(8.0));   // exponent 0
  REQUIRE(degenerate_lower_bound(3.0, 0.5, 2.0, 1) == Catch::Approx(8.0));    // 2*2/0.5
  REQUIRE(degenerate_lower_bound(4.0, 0.5, 0.0, 1) == 0.0);
  REQUIRE_THROWS_AS(degenerate_lower_bound(1.5, 0.5, 1.0, 1), std::invalid_argument);
}

TEST_CASE("regularized operator never falls below the Fatou bound on admissible data") {
  // hess <= (q-1)/eps |grad|^{(q-2)/(q-1)} I, |grad| <= lip
  const double p = 1.5, q = 4.0, eps = 0.35, lip = 1.0;
  const int dim = 2;
  const double C = fatou_lower_bound(p, q, eps, lip, dim);
  CounterRng rng(2024, "fatou_pairs");
  for (std::uint64_t t = 0; t < 10000; ++t) {
    const std::uint64_t b = 8 * t;
    double ang = rng.uniform(b, 0.0, 6.283185307179586);
    double gn = lip * rng.uniform(b + 1);
    Point g{gn * std::cos(ang), gn * std::sin(ang)};
    SymMat H{rng.uniform(b + 2, -3.0, 3.0), rng.uniform(b + 3, -3.0, 3.0),
             rng.uniform(b + 4, -3.0, 3.0)};
    double B = (q - 1.0) / eps * std::pow(gn, (q - 2.0) / (q - 1.0));
    double excess = lambda_max(H, dim) - B;
    if (excess > 0.0) {  // shift the spectrum under the admissible cap
      H.xx -= excess;
      H.yy -= excess;
    }
    double delta = std::pow(10.0, rng.uniform(b + 5, -6.0, 0.0));
    double v = regularized_divergence(g, H, p, delta, dim);
    REQUIRE(v >= -C - 1e-9 * (1.0 + C));
  }
}

TEST_CASE("three-exponent pointwise identity") {
  SECTION("exponent triple validation") {
    REQUIRE_THROWS_AS(ExponentTriple(2.0, 2.0, 3.0), std::invalid_argument);
    REQUIRE_THROWS_AS(ExponentTriple(0.9, 2.0, 3.0), std::invalid_argument);
  }
  SECTION("affine: both sides vanish") {
    const GalleryEntry& e = gallery_entry("affine");
    REQUIRE(pointwise_identity_residual(e, Point{0.3, 0.1}, 2, ExponentTriple(1.5, 2.0, 3.0)) <=
            1e-15);
  }
  SECTION("bowl at |x| = 1 with (1.5, 2, 3): closed-form coefficient identity") {
    // Delta_s u = n + s - 2 at |x| = 1, so the identity reduces to
    // (r-q)(n+p-2) == (r-p)(n+q-2) + (p-q)(n+r-2)
    const double n = 2, qq = 1.5, p = 2.0, r = 3.0;
    REQUIRE((r - qq) * (n + p - 2) ==
            Catch::Approx((r - p) * (n + qq - 2) + (p - qq) * (n + r - 2)).epsilon(1e-15));
    const GalleryEntry& e = gallery_entry("quadratic_bowl");
    Point x{std::sqrt(0.5), std::sqrt(0.5)};
    REQUIRE(pointwise_identity_residual(e, x, 2, ExponentTriple(qq, p, r)) <= 1e-12);
  }
  SECTION("random non-critical points on smooth entries") {
    CounterRng rng(99, "identity_pts");
    const ExponentTriple triples[] = {{1.5, 2.0, 3.0}, {1.2, 1.8, 2.5}, {2.0, 3.0, 4.0},
                                      {1.1, 2.2, 5.0}, {2.5, 3.0, 3.5}};
    std::uint64_t ctr = 0;
    for (const char* name : {"quadratic_bowl", "radial_p15", "neg_log"}) {
      const GalleryEntry& e = gallery_entry(name);
      for (const auto& t : triples) {
        for (int i = 0; i < 50; ++i) {
          Point x{rng.uniform(ctr++, 0.3, 1.2), rng.uniform(ctr++, 0.3, 1.2)};
          if (norm(e.grad(x, 2), 2) < 1e-6) continue;
          REQUIRE(pointwise_identity_residual(e, x, 2, t) <= 1e-10);
        }
      }
    }
  }
  SECTION("rejects critical points") {
    const GalleryEntry& e = gallery_entry("quadratic_bowl");
    REQUIRE_THROWS_AS(pointwise_identity_residual(e, Point{0, 0}, 2, ExponentTriple(1.5, 2, 3)),
                      std::invalid_argument);
  }
}

TEST_CASE("operator sampling and CSV dump") {
  const GalleryEntry& e = gallery_entry("quadratic_bowl");
  Grid g = default_grid(e, 2, 9);
  ScalarField u = sample(e, g);
  std::size_t k = g.flat(4, 4);  // center (critical point)
  OperatorSample s = sample_operator(u, k, 1.5, 1e-2, 1e-8);
  REQUIRE_FALSE(s.plap_defined);
  REQUIRE(s.regdiv == Catch::Approx(-std::pow(1e-2, -0.25) * 2.0).epsilon(1e-10));

  auto path = std::filesystem::temp_directory_path() / "plaplab_operators_test.csv";
  write_operator_csv(u, 1.5, 1e-2, 1e-8, path.string());
  std::ifstream is(path);
  std::string head;
  std::getline(is, head);
  REQUIRE(head == "index,gx,gy,hxx,hxy,hyy,plap_defined,plap,regdiv(delta=0.01)");
}
