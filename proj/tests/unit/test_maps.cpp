#include <doctest.h>

#include <cmath>

#include "qcinf/dilation.hpp"
#include "qcinf/maps.hpp"
#include "qcinf/residuals.hpp"
#include "test_oracles.hpp"

using namespace qcinf;

namespace {

// central differences of the map value / gradient, the gate every
// catalog jet must pass
void check_jet_fd_consistency(const AnalyticMap& map, const Vec& x) {
  const Jet2 jet = map.jet(x);
  const double hx = 1e-6 * std::max(1.0, norm(x));
  for (int a = 0; a < map.n; ++a) {
    Vec xp = x, xm = x;
    xp[a] += hx;
    xm[a] -= hx;
    const Vec up = map.jet(xp).u, um = map.jet(xm).u;
    for (int c = 0; c < map.N; ++c) {
      const double fd = (up[c] - um[c]) / (2.0 * hx);
      CHECK(std::fabs(jet.du(c, a) - fd) <= 1e-8 * std::max(1.0, frob(jet.du)));
    }
  }
  const double hh = 1e-5 * std::max(1.0, norm(x));
  for (int a = 0; a < map.n; ++a) {
    Vec xp = x, xm = x;
    xp[a] += hh;
    xm[a] -= hh;
    const Matrix gp = map.jet(xp).du, gm = map.jet(xm).du;
    for (int c = 0; c < map.N; ++c)
      for (int b = 0; b < map.n; ++b) {
        const double fd = (gp(c, b) - gm(c, b)) / (2.0 * hh);
        CHECK(std::fabs(jet.d2u(c, a, b) - fd) <=
              1e-6 * std::max(1.0, max_abs(jet.d2u)));
      }
  }
  validate_jet(jet);
}

}  // namespace

TEST_CASE("every catalog jet passes the FD consistency gate") {
  Rng rng(601);
  struct Probe {
    AnalyticMap map;
    std::function<Vec(Rng&)> draw;
  };
  std::vector<Probe> probes;
  probes.push_back({make_map("identity"), [](Rng& r) {
                      return Vec{r.uniform(-1, 1), r.uniform(-1, 1)};
                    }});
  probes.push_back({make_map("affine", {{"a11", 1.2}, {"a12", 0.3}, {"a21", -0.1},
                                        {"a22", 0.9}, {"b1", 0.5}, {"b2", -0.2}}),
                    [](Rng& r) {
                      return Vec{r.uniform(-1, 1), r.uniform(-1, 1)};
                    }});
  probes.push_back({make_map("rotation", {{"theta", 0.9}}), [](Rng& r) {
                      return Vec{r.uniform(-1, 1), r.uniform(-1, 1)};
                    }});
  probes.push_back({make_map("scaled-rotation", {{"theta", 0.4}, {"scale", 1.7}}),
                    [](Rng& r) {
                      return Vec{r.uniform(-1, 1), r.uniform(-1, 1)};
                    }});
  probes.push_back({make_map("inversion"), [](Rng& r) {
                      const double rad = r.uniform(0.4, 1.4);
                      const double th = r.uniform(0.0, 6.28);
                      return Vec{rad * std::cos(th), rad * std::sin(th)};
                    }});
  probes.push_back({make_map("power", {{"gamma", 1.0}}), [](Rng& r) {
                      const double rad = r.uniform(0.2, 0.9);
                      const double th = r.uniform(0.0, 6.28);
                      return Vec{rad * std::cos(th), rad * std::sin(th)};
                    }});
  probes.push_back({make_map("power", {{"gamma", 2.5}}), [](Rng& r) {
                      const double rad = r.uniform(0.2, 0.9);
                      const double th = r.uniform(0.0, 6.28);
                      return Vec{rad * std::cos(th), rad * std::sin(th)};
                    }});
  probes.push_back({make_map("complex-exp"), [](Rng& r) {
                      return Vec{r.uniform(-0.3, 0.3), r.uniform(-0.3, 0.3)};
                    }});
  probes.push_back({make_map("exp3d"), [](Rng& r) {
                      return Vec{r.uniform(-0.5, 0.5), r.uniform(-0.5, 0.5),
                                 r.uniform(-0.5, 0.5)};
                    }});
  probes.push_back({make_map("cubic-y"), [](Rng& r) {
                      return Vec{r.uniform(1.0, 2.0), r.uniform(1.0, 2.0)};
                    }});
  probes.push_back({make_map("graph"), [](Rng& r) {
                      return Vec{r.uniform(-1, 1), r.uniform(-1, 1)};
                    }});
  probes.push_back({make_map("graph-bump"), [](Rng& r) {
                      return Vec{r.uniform(-1, 1), r.uniform(-1, 1)};
                    }});
  for (auto& probe : probes)
    for (int t = 0; t < 8; ++t) check_jet_fd_consistency(probe.map, probe.draw(rng));
}

TEST_CASE("power map dilation is the closed-form constant") {
  SUBCASE("gamma 0 is the identity") {
    const Jet2 j = power_map_jet({0.4, -0.7}, 0.0);
    CHECK(max_abs(j.du - Matrix::identity(2)) < 1e-14);
    CHECK(dilation(j.du) == doctest::Approx(2.0));
  }
  SUBCASE("gamma 1 at (0.3, 0.4)") {
    CHECK(dilation(power_map_jet({0.3, 0.4}, 1.0).du) == doctest::Approx(2.5).epsilon(1e-12));
  }
  SUBCASE("gamma 2 anywhere, FD jet agrees with the exact jet") {
    Rng rng(607);
    const AnalyticMap map = power_map(2.0);
    for (int t = 0; t < 50; ++t) {
      const double rad = rng.uniform(0.15, 0.95);
      const double th = rng.uniform(0.0, 6.2831);
      const Vec x{rad * std::cos(th), rad * std::sin(th)};
      const Jet2 j = map.jet(x);
      CHECK(dilation(j.du) == doctest::Approx(2.0 + 4.0 / 3.0).epsilon(1e-12));
      // gradient from the value evaluator
      const double h = 1e-6;
      for (int a = 0; a < 2; ++a) {
        Vec xp = x, xm = x;
        xp[a] += h;
        xm[a] -= h;
        const Vec up = map.jet(xp).u, um = map.jet(xm).u;
        for (int c = 0; c < 2; ++c)
          CHECK(std::fabs(j.du(c, a) - (up[c] - um[c]) / (2 * h)) < 1e-7);
      }
    }
  }
  SUBCASE("constant across sampled points to 1e-12 relative, all gammas") {
    Rng rng(613);
    for (double gamma : {0.5, 1.0, 2.0, 3.0}) {
      const double want = 2.0 + gamma * gamma / (gamma + 1.0);
      for (int t = 0; t < 100; ++t) {
        const double rad = rng.uniform(0.05, 0.95);
        const double th = rng.uniform(0.0, 6.2831);
        const double k = dilation(power_map_jet({rad * std::cos(th), rad * std::sin(th)},
                                                gamma).du);
        CHECK(std::fabs(k - want) <= 1e-12 * want);
      }
    }
  }
  SUBCASE("origin is excluded") {
    CHECK_THROWS_AS(power_map_jet({0.0, 0.0}, 1.0), DomainViolation);
  }
}

TEST_CASE("complex exponential map rank structure") {
  // on the diagonal the gradient columns are parallel
  for (double t : {-0.2, 0.0, 0.15, 0.3}) {
    const Jet2 j = complex_exp_map_jet({t, t});
    CHECK(eps_rank(j.du, 1e-8) == 1);
  }
  Rng rng(617);
  for (int t = 0; t < 100; ++t) {
    double x = rng.uniform(-0.3, 0.3), y = rng.uniform(-0.3, 0.3);
    if (std::fabs(x - y) < 0.01) y = x + 0.05;
    CHECK(eps_rank(complex_exp_map_jet({x, y}).du, 1e-8) == 2);
  }
}

TEST_CASE("3-D exponential map eigenstructure") {
  SUBCASE("origin") {
    const Jet2 j = exp3d_map_jet({0.0, 0.0, 0.0});
    const Matrix g = transposed(j.du) * j.du;
    CHECK(g(0, 0) == doctest::Approx(1.0));
    CHECK(g(1, 1) == doctest::Approx(2.0));
    CHECK(g(2, 2) == doctest::Approx(3.0));
    CHECK(std::fabs(g(0, 1)) + std::fabs(g(0, 2)) + std::fabs(g(1, 2)) < 1e-14);
    const SymmetricEigen s = symmetric_spectrum(ahlfors(g));
    CHECK(s.eigenvalues[0] == doctest::Approx(-1.0));
    CHECK(std::fabs(s.eigenvalues[1]) < 1e-12);
    CHECK(s.eigenvalues[2] == doctest::Approx(1.0));
    CHECK(eps_rank(ahlfors(g), 1e-8) == 2);
  }
  SUBCASE("along the axis the metric eigenvalues are (1,2,3) e^{2x}") {
    for (double x : {-1.0, -0.3, 0.0, 0.5, 1.0}) {
      const Jet2 j = exp3d_map_jet({x, 0.0, 0.0});
      const Matrix g = transposed(j.du) * j.du;
      const SymmetricEigen s = symmetric_spectrum(g);
      const double e2x = std::exp(2.0 * x);
      CHECK(std::fabs(s.eigenvalues[0] - e2x) <= 1e-12 * e2x);
      CHECK(std::fabs(s.eigenvalues[1] - 2.0 * e2x) <= 1e-12 * e2x);
      CHECK(std::fabs(s.eigenvalues[2] - 3.0 * e2x) <= 1e-12 * e2x);
    }
  }
  SUBCASE("off the axis the middle eigenvalue moves") {
    const Jet2 j = exp3d_map_jet({0.0, 0.5, 0.0});
    const Matrix g = transposed(j.du) * j.du;
    CHECK(std::fabs(g(0, 1)) > 0.1);  // cross terms appear
    const SymmetricEigen s = symmetric_spectrum(ahlfors(g));
    CHECK(std::fabs(s.eigenvalues[1]) > 1e-3);
  }
}

TEST_CASE("conformal catalog maps have dilation n and silent residuals") {
  Rng rng(619);
  for (const char* name : {"rotation", "scaled-rotation", "inversion"}) {
    const AnalyticMap map = conformal_catalog(name);
    for (int t = 0; t < 30; ++t) {
      const double rad = rng.uniform(0.4, 1.1);
      const double th = rng.uniform(0.0, 6.2831);
      const Vec x{rad * std::cos(th), rad * std::sin(th)};
      const Jet2 j = map.jet(x);
      CHECK(dilation(j.du) == doctest::Approx(2.0).epsilon(1e-12));
      const Matrix g = transposed(j.du) * j.du;
      CHECK(max_abs(ahlfors(g)) <= 1e-12 * frob(g));
      CHECK(frob(dilation_gradient(j.du)) <= 1e-11 * frob(j.du));
      const ResidualBundle b = q_infinity_residual(j);
      CHECK(norm(b.tangential) < 1e-9);
      CHECK(norm(b.normal) < 1e-9);
      CHECK(norm(b.q_infinity) < 1e-9);
    }
  }
  CHECK_THROWS_AS(conformal_catalog("moebius"), ConfigError);
  // inversion refuses points off the annulus
  const AnalyticMap inv = conformal_catalog("inversion");
  CHECK_THROWS_AS(inv.jet({0.01, 0.0}), DomainViolation);
}

TEST_CASE("catalog lookups") {
  CHECK_THROWS_AS(make_map("no-such-map"), ConfigError);
  CHECK(list_maps().size() >= 10);
  const AnalyticMap m = make_map("power", {{"gamma", 3.0}});
  CHECK(m.params.at("gamma") == 3.0);
}
