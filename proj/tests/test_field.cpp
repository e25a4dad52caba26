#include <catch2/catch_amalgamated.hpp>

#include <cstring>
#include <sstream>

#include "plaplab/gallery.hpp"
#include "plaplab/grid.hpp"
#include "plaplab/rng.hpp"

using namespace plaplab;

TEST_CASE("grid geometry and index maps") {
  Grid g = Grid::line(0.0, 1.0, 5);
  REQUIRE(g.h(0) == Catch::Approx(0.25));
  REQUIRE(g.size() == 5);

  Grid b = Grid::box({-1.0, 0.25}, {1.0, 1.25}, 9, 5);
  REQUIRE(b.size() == 45);
  REQUIRE(b.h(0) == Catch::Approx(0.25));
  REQUIRE(b.h(1) == Catch::Approx(0.25));

  // index <-> coordinate maps are mutually inverse at nodes
  for (int a = 0; a < b.dim; ++a)
    for (int i = 0; i < b.n[a]; ++i) REQUIRE(b.axis_index(a, b.coord(a, i)) == i);

  REQUIRE_THROWS_AS(Grid::line(1.0, 0.0, 5), std::invalid_argument);
  REQUIRE_THROWS_AS(Grid::line(0.0, 1.0, 2), std::invalid_argument);
}

TEST_CASE("sampling gallery functions hits nodes exactly") {
  // constant 3 everywhere
  ScalarField c = sample("constant", Grid::line(-1.0, 1.0, 7));
  for (double v : c.values) REQUIRE(v == 3.0);

  // affine x on [0,1], n = 5
  ScalarField a = sample("affine", Grid::line(0.0, 1.0, 5));
  REQUIRE(a.values == std::vector<double>{0.0, 0.25, 0.5, 0.75, 1.0});

  // cone -|x| on [-1,1], n = 5
  ScalarField nc = sample("neg_cone", Grid::line(-1.0, 1.0, 5));
  REQUIRE(nc.values == std::vector<double>{-1.0, -0.5, 0.0, -0.5, -1.0});
}

TEST_CASE("sampling rejects grids with nodes near a singular point") {
  // |x|^{-1} has a pole at the origin; a grid with a node there is rejected
  Grid bad = Grid::box({-1.0, -1.0}, {1.0, 1.0}, 5, 5);
  REQUIRE_THROWS_WITH(sample("radial_p15", bad), Catch::Matchers::ContainsSubstring("singular"));
  // its reference box stays clear
  REQUIRE_NOTHROW(sample("radial_p15", default_grid(gallery_entry("radial_p15"), 2, 17)));
}

TEST_CASE("oscillation") {
  auto [M1, m1] = oscillation(sample("constant", Grid::line(0.0, 1.0, 5)));
  REQUIRE(M1 == 3.0);
  REQUIRE(m1 == 3.0);
  auto [M2, m2] = oscillation(sample("neg_cone", Grid::line(-1.0, 1.0, 5)));
  REQUIRE(M2 == 0.0);
  REQUIRE(m2 == -1.0);
  auto [M3, m3] = oscillation(sample("affine", Grid::line(0.0, 1.0, 5)));
  REQUIRE(M3 == 1.0);
  REQUIRE(m3 == 0.0);
}

TEST_CASE("shrink masks") {
  Grid g = Grid::line(0.0, 1.0, 5);

  ShrunkDomain s0 = shrink(g, 0.0);
  REQUIRE(s0.mask == std::vector<std::uint8_t>{0, 1, 1, 1, 0});

  ShrunkDomain s3 = shrink(g, 0.3);
  REQUIRE(s3.mask == std::vector<std::uint8_t>{0, 0, 1, 0, 0});

  ShrunkDomain s6 = shrink(g, 0.6);
  REQUIRE(s6.empty());

  // nesting: a larger radius never unmasks a node
  Grid b = Grid::box({0.0, 0.0}, {1.0, 2.0}, 11, 21);
  ShrunkDomain prev = shrink(b, 0.0);
  for (double r : {0.1, 0.2, 0.35, 0.5, 0.8}) {
    ShrunkDomain cur = shrink(b, r);
    for (std::size_t k = 0; k < b.size(); ++k)
      if (cur.mask[k]) REQUIRE(prev.mask[k]);
    prev = cur;
  }
}

TEST_CASE("truncate") {
  ScalarField c = sample("constant", Grid::line(0.0, 1.0, 5));
  REQUIRE(truncate(c, 5.0).values == c.values);

  ScalarField a = sample("affine", Grid::line(0.0, 1.0, 5));
  REQUIRE(truncate(a, 0.5).values == std::vector<double>{0.0, 0.25, 0.5, 0.5, 0.5});

  // k below the minimum flattens the field
  auto [M, m] = oscillation(a);
  ScalarField flat = truncate(a, m - 1.0);
  for (double v : flat.values) REQUIRE(v == m - 1.0);

  // idempotent, monotone in k
  CounterRng rng(7, "trunc");
  Grid g = Grid::line(-1.0, 1.0, 33);
  std::vector<double> vals(g.size());
  for (std::size_t k = 0; k < g.size(); ++k) vals[k] = rng.uniform(k, -2.0, 2.0);
  ScalarField u(g, vals);
  for (int t = 0; t < 20; ++t) {
    double k1 = rng.uniform(1000 + 2 * t, -2.5, 2.5);
    double k2 = rng.uniform(1001 + 2 * t, -2.5, 2.5);
    if (k1 > k2) std::swap(k1, k2);
    ScalarField u1 = truncate(u, k1), u2 = truncate(u, k2);
    REQUIRE(truncate(u1, k1).values == u1.values);
    for (std::size_t k = 0; k < g.size(); ++k) REQUIRE(u1.values[k] <= u2.values[k]);
  }
}

TEST_CASE("field csv round-trips bit-exactly") {
  CounterRng rng(42, "csv");
  for (int dim : {1, 2}) {
    Grid g = dim == 1 ? Grid::line(-1.0 / 3.0, 2.0 / 7.0, 17)
                      : Grid::box({-0.1, 0.3}, {0.9, 1.7}, 9, 13);
    std::vector<double> vals(g.size());
    for (std::size_t k = 0; k < g.size(); ++k) vals[k] = rng.uniform(k, -1e3, 1e3);
    ScalarField u(g, vals);

    std::stringstream ss;
    write_field_csv(u, ss);
    ScalarField v = read_field_csv(ss);

    REQUIRE(v.grid.dim == g.dim);
    for (int a = 0; a < g.dim; ++a) {
      REQUIRE(std::memcmp(&v.grid.lo[a], &g.lo[a], sizeof(double)) == 0);
      REQUIRE(std::memcmp(&v.grid.hi[a], &g.hi[a], sizeof(double)) == 0);
      REQUIRE(v.grid.n[a] == g.n[a]);
    }
    for (std::size_t k = 0; k < g.size(); ++k)
      REQUIRE(std::memcmp(&v.values[k], &u.values[k], sizeof(double)) == 0);
  }
}

TEST_CASE("field construction rejects bad input") {
  Grid g = Grid::line(0.0, 1.0, 5);
  REQUIRE_THROWS_AS(ScalarField(g, std::vector<double>(4, 0.0)), std::invalid_argument);
  std::vector<double> inf(5, 0.0);
  inf[2] = std::numeric_limits<double>::infinity();
  REQUIRE_THROWS_AS(ScalarField(g, inf), std::invalid_argument);
}

TEST_CASE("grid oscillation is bracketed by the analytic range") {
  // refine each entry's reference grid 4x: the coarse oscillation must sit
  // inside the fine one
  for (const auto& e : gallery_entries()) {
    for (int dim : {1, 2}) {
      if (!e.supports(dim)) continue;
      auto [Mc, mc] = oscillation(sample(e, default_grid(e, dim, 33)));
      auto [Mf, mf] = oscillation(sample(e, default_grid(e, dim, 129)));
      INFO(e.name << " dim=" << dim);
      REQUIRE(mf <= mc);
      REQUIRE(Mc <= Mf);
    }
  }
}

TEST_CASE("step entry records the lsc value at the jump node") {
  ScalarField s = sample("step", Grid::line(-1.0, 1.0, 9));
  int zero_node = s.grid.axis_index(0, 0.0);
  REQUIRE(s.values[static_cast<std::size_t>(zero_node)] == 0.0);
  REQUIRE(s.values[static_cast<std::size_t>(zero_node) + 1] == 1.0);
}
