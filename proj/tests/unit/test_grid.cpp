#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "qcinf/dilation.hpp"
#include "qcinf/grid.hpp"
#include "qcinf/residuals.hpp"
#include "test_oracles.hpp"

using namespace qcinf;

namespace {

AnalyticMap quadratic_scalar_pair() {
  // u(x, y) = (x^2 + 0.5 x y, y - 0.25 y^2 + x): exact Hessians for the
  // central stencils
  AnalyticMap m;
  m.name = "quadratic-test";
  m.n = m.N = 2;
  m.domain_desc = "all of R^2";
  m.in_domain = [](const Vec&) { return true; };
  m.jet = [](const Vec& x) {
    Jet2 j;
    j.x = x;
    j.u = {x[0] * x[0] + 0.5 * x[0] * x[1], x[1] - 0.25 * x[1] * x[1] + x[0]};
    j.du = Matrix(2, 2,
                  {2.0 * x[0] + 0.5 * x[1], 0.5 * x[0], 1.0, 1.0 - 0.5 * x[1]});
    j.d2u = Tensor({2, 2, 2});
    j.d2u(0, 0, 0) = 2.0;
    j.d2u(0, 0, 1) = j.d2u(0, 1, 0) = 0.5;
    j.d2u(1, 1, 1) = -0.5;
    return j;
  };
  m.default_extent = {{0.0, 1.0}, {0.0, 1.0}};
  return m;
}

}  // namespace

TEST_CASE("grid basics and validation") {
  CHECK_THROWS_AS(Grid::box(2, {{0, 1}, {0, 1}}, 4), ConfigError);
  CHECK_THROWS_AS(Grid::box(2, {{1, 0}, {0, 1}}, 9), ConfigError);
  const Grid g = Grid::box(2, {{0, 1}, {0, 2}}, 5);
  CHECK(g.spacing(0) == doctest::Approx(0.25));
  CHECK(g.spacing(1) == doctest::Approx(0.5));
  CHECK(g.num_points() == 25);
  const auto idx = g.unlinear(g.linear({3, 2, 0}));
  CHECK(idx[0] == 3);
  CHECK(idx[1] == 2);
}

TEST_CASE("FD jets are exact on affine and quadratic fields") {
  const AnalyticMap affine = make_map("affine", {{"a11", 1.5}, {"a12", 0.25},
                                                 {"a21", -0.5}, {"a22", 2.0},
                                                 {"b1", 0.1}, {"b2", -0.3}});
  const MapField f = sample_map(affine, Grid::box(2, {{0, 1}, {0, 1}}, 9));
  CHECK(f.immersion_flag);
  const Jet2 j = jet_from_field(f, {4, 4, 0});
  CHECK(max_abs(j.du - affine.jet(j.x).du) < 1e-12);
  CHECK(max_abs(j.d2u) < 1e-10);

  const AnalyticMap quad = quadratic_scalar_pair();
  const MapField fq = sample_map(quad, Grid::box(2, {{0, 1}, {0, 1}}, 9));
  const Jet2 jq = jet_from_field(fq, {5, 3, 0});
  const Jet2 exact = quad.jet(jq.x);
  CHECK(max_abs(jq.du - exact.du) < 1e-11);
  Tensor dh = jq.d2u;
  dh -= exact.d2u;
  CHECK(max_abs(dh) < 1e-9);
}

TEST_CASE("FD jets self-converge at second order against the catalog") {
  // same physical point on two grids with halved spacing
  const AnalyticMap power = power_map(1.0);
  const MapField coarse = sample_map(power, Grid::box(2, {{0.3, 0.9}, {0.3, 0.9}}, 13));
  const MapField fine = sample_map(power, Grid::box(2, {{0.3, 0.9}, {0.3, 0.9}}, 25));
  const Jet2 jc = jet_from_field(coarse, {6, 6, 0});
  const Jet2 jf = jet_from_field(fine, {12, 12, 0});
  const Jet2 exact = power.jet(jc.x);
  REQUIRE(norm(sub(jc.x, jf.x)) < 1e-14);
  const double ec = max_abs(jc.du - exact.du);
  const double ef = max_abs(jf.du - exact.du);
  CHECK(ec / ef == doctest::Approx(4.0).epsilon(0.12));
  Tensor dc = jc.d2u;
  dc -= exact.d2u;
  Tensor df = jf.d2u;
  df -= exact.d2u;
  CHECK(max_abs(dc) / max_abs(df) == doctest::Approx(4.0).epsilon(0.15));
}

TEST_CASE("stencil depth gates jets and gradients") {
  const MapField f = sample_map(make_map("identity"), Grid::box(2, {{0, 1}, {0, 1}}, 7));
  CHECK_THROWS_AS(jet_from_field(f, {1, 3, 0}), StencilOutOfDomain);
  CHECK_THROWS_AS(gradient_from_field(f, {0, 3, 0}), StencilOutOfDomain);
  CHECK_NOTHROW(gradient_from_field(f, {1, 3, 0}));
  CHECK_NOTHROW(jet_from_field(f, {2, 3, 0}));
}

TEST_CASE("Lp norms of the dilation") {
  SUBCASE("identity: both the raw and normalized forms are flat") {
    const MapField f = sample_map(make_map("identity"), Grid::box(2, {{0, 1}, {0, 1}}, 17));
    for (double p : {1.0, 2.0, 7.0}) {
      const LpNorms n = lp_norm_of_dilation(f, p);
      CHECK(n.normalized == doctest::Approx(2.0).epsilon(1e-12));
      CHECK(n.sup == doctest::Approx(2.0).epsilon(1e-12));
      // raw integral = 2^p * covered volume
      const double cell = f.grid.spacing(0) * f.grid.spacing(1);
      CHECK(n.raw_integral ==
            doctest::Approx(std::pow(2.0, p) * n.points * cell).epsilon(1e-12));
    }
    const LpNorms ninf = lp_norm_of_dilation(f, std::numeric_limits<double>::infinity());
    CHECK(ninf.sup == doctest::Approx(2.0));
  }
  SUBCASE("power map sup norm") {
    const MapField f =
        sample_map(power_map(1.0), Grid::box(2, {{0.3, 0.9}, {0.3, 0.9}}, 33));
    const LpNorms n = lp_norm_of_dilation(f, std::numeric_limits<double>::infinity());
    CHECK(n.sup == doctest::Approx(2.5).epsilon(1e-3));
  }
  SUBCASE("normalized norms increase toward the sup") {
    const MapField f = sample_map(make_map("cubic-y"), Grid::box(2, {{1, 2}, {1, 2}}, 33));
    double prev = 0.0;
    const LpNorms sup = lp_norm_of_dilation(f, std::numeric_limits<double>::infinity());
    for (double p : {2.0, 8.0, 32.0, 128.0}) {
      const LpNorms n = lp_norm_of_dilation(f, p);
      CHECK(n.normalized > prev);
      CHECK(n.normalized <= sup.sup * (1.0 + 1e-12));
      prev = n.normalized;
    }
  }
}

TEST_CASE("immersion flag reacts to rank deficiency") {
  MapField f = sample_map(make_map("identity"), Grid::box(2, {{0, 1}, {0, 1}}, 9));
  CHECK(f.immersion_flag);
  // collapse a column of values around one interior point: the FD
  // gradient there loses rank
  for (int i = 3; i <= 5; ++i)
    for (int j = 3; j <= 5; ++j) f.value(f.grid.linear({i, j, 0}), 1) = 0.77;
  CHECK_FALSE(refresh_field_classes(f));
}

TEST_CASE("field round trips are bit exact") {
  Rng rng(811);
  MapField f = sample_map(make_map("complex-exp"), Grid::box(2, {{-0.3, 0.3}, {-0.3, 0.3}}, 9));
  // scribble full-precision noise over the values
  for (double& v : f.values) v += 1e-3 * rng.gaussian();
  refresh_field_classes(f);

  save_field_csv(f, "/tmp/qcinf_rt.csv");
  const MapField fc = load_field_csv("/tmp/qcinf_rt.csv");
  REQUIRE(fc.values.size() == f.values.size());
  for (size_t i = 0; i < f.values.size(); ++i) CHECK(fc.values[i] == f.values[i]);
  CHECK(fc.mask == f.mask);

  save_field_json(f, "/tmp/qcinf_rt.json");
  const MapField fj = load_field_json("/tmp/qcinf_rt.json");
  for (size_t i = 0; i < f.values.size(); ++i) CHECK(fj.values[i] == f.values[i]);

  // saving the loaded field reproduces the file byte for byte
  save_field_csv(fc, "/tmp/qcinf_rt2.csv");
  std::ifstream a("/tmp/qcinf_rt.csv"), b("/tmp/qcinf_rt2.csv");
  std::stringstream sa, sb;
  sa << a.rdbuf();
  sb << b.rdbuf();
  CHECK(sa.str() == sb.str());
}

TEST_CASE("masked holes shape the interior") {
  // a square annulus: exclude the middle of the box
  const AnalyticMap power = power_map(1.0);
  const Grid grid = Grid::box(2, {{-1, 1}, {-1, 1}}, 17);
  const MapField f = sample_map(power, grid, [](const Vec& x) {
    return std::fabs(x[0]) < 0.25 && std::fabs(x[1]) < 0.25;
  });
  long long interior = 0, boundary = 0, excluded = 0;
  for (long long flat = 0; flat < grid.num_points(); ++flat) {
    if (f.mask[flat] == PointClass::Interior) ++interior;
    if (f.mask[flat] == PointClass::Boundary) ++boundary;
    if (f.mask[flat] == PointClass::Excluded) ++excluded;
  }
  CHECK(excluded > 0);
  CHECK(interior > 0);
  CHECK(boundary > 0);
  CHECK(f.immersion_flag);
  // the hole rim counts as boundary: no interior point touches an
  // excluded one
  for (long long flat = 0; flat < grid.num_points(); ++flat)
    if (f.mask[flat] == PointClass::Interior)
      CHECK(f.stencil_depth(grid.unlinear(flat), 1) >= 1);
}

TEST_CASE("discrete divergence of the p-flux") {
  SUBCASE("affine fields have constant flux") {
    const AnalyticMap affine =
        make_map("affine", {{"a11", 1.3}, {"a12", 0.2}, {"a21", 0.0}, {"a22", 0.8}});
    const MapField f = sample_map(affine, Grid::box(2, {{0, 1}, {0, 1}}, 9));
    const DivergenceField d = q_p_divergence_discrete(f, 3.0);
    double worst = 0.0;
    for (long long flat = 0; flat < f.grid.num_points(); ++flat)
      if (d.evaluated[flat])
        for (int c = 0; c < f.N; ++c)
          worst = std::max(worst, std::fabs(d.values[flat * f.N + c]));
    CHECK(worst < 1e-10);
  }
  SUBCASE("identity likewise") {
    const MapField f = sample_map(make_map("identity"), Grid::box(2, {{0, 1}, {0, 1}}, 9));
    const DivergenceField d = q_p_divergence_discrete(f, 2.0);
    double worst = 0.0;
    for (long long flat = 0; flat < f.grid.num_points(); ++flat)
      if (d.evaluated[flat])
        for (int c = 0; c < f.N; ++c)
          worst = std::max(worst, std::fabs(d.values[flat * f.N + c]));
    CHECK(worst < 1e-12);
  }
  SUBCASE("self-convergence at second order toward the expanded form") {
    const AnalyticMap cubic = make_map("cubic-y");
    const double p = 2.0;
    const Grid gc = Grid::box(2, {{1.0, 1.8}, {1.0, 1.8}}, 17);
    const Grid gf = Grid::box(2, {{1.0, 1.8}, {1.0, 1.8}}, 33);
    const MapField fc = sample_map(cubic, gc);
    const MapField ff = sample_map(cubic, gf);
    const DivergenceField dc = q_p_divergence_discrete(fc, p);
    const DivergenceField df = q_p_divergence_discrete(ff, p);
    // compare at the shared physical center point
    const std::array<int, 3> ic{8, 8, 0}, iff{16, 16, 0};
    REQUIRE(dc.evaluated[gc.linear(ic)]);
    REQUIRE(df.evaluated[gf.linear(iff)]);
    const Vec exact = q_p_expanded(cubic.jet(gc.point(ic)), p);
    double ec = 0.0, ef = 0.0;
    for (int c = 0; c < 2; ++c) {
      ec = std::max(ec, std::fabs(dc.values[gc.linear(ic) * 2 + c] - exact[c]));
      ef = std::max(ef, std::fabs(df.values[gf.linear(iff) * 2 + c] - exact[c]));
    }
    CHECK(ec / ef == doctest::Approx(4.0).epsilon(0.25));
  }
  SUBCASE("tiny grids are rejected") {
    MapField f = sample_map(make_map("identity"), Grid::box(2, {{0, 1}, {0, 1}}, 5));
    f.grid.res[0] = 4;  // corrupt to simulate a malformed caller
    CHECK_THROWS_AS(q_p_divergence_discrete(f, 2.0), ConfigError);
  }
}
