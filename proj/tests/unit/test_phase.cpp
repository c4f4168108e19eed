#include <doctest.h>

#include <cmath>

#include "qcinf/phase.hpp"
#include "test_oracles.hpp"

using namespace qcinf;

TEST_CASE("pointwise classification") {
  SUBCASE("conformal jets sit in the zero phase") {
    const PointPhase p = classify_point(make_map("rotation").jet({0.2, 0.7}));
    CHECK(p.label == 0);
    CHECK_FALSE(p.uncertain);
    // conformality is equivalent to K = n at the point
    CHECK(std::fabs(dilation(make_map("rotation").jet({0.2, 0.7}).du) - 2.0) <= 1e-12);
  }
  SUBCASE("power-map jets land in the top phase (rank one impossible)") {
    for (double gamma : {0.5, 1.0, 2.0}) {
      const PointPhase p = classify_point(power_map_jet({0.4, 0.1}, gamma));
      CHECK(p.label == 2);
    }
  }
  SUBCASE("exponential 3-D map on the axis has a kernel direction") {
    for (double x : {-0.5, 0.0, 0.7}) {
      const PointPhase p = classify_point(exp3d_map_jet({x, 0.0, 0.0}));
      CHECK(p.label == 2);
      CHECK(std::fabs(p.spectrum[1]) <= 1e-12 * std::max(1.0, std::fabs(p.spectrum[2])));
      const double sum = p.spectrum[0] + p.spectrum[1] + p.spectrum[2];
      CHECK(std::fabs(sum) <= 1e-10 * std::max(1.0, std::fabs(p.spectrum[2])));
    }
  }
  SUBCASE("a doubly degenerate metric still has full-rank Ahlfors part") {
    // metric eigenvalues (1, 1, 3): S(g) has spectrum (-2/3, -2/3, 4/3),
    // so the label is 3 even though g itself is degenerate-spectrum
    Jet2 j;
    j.x = {0, 0, 0};
    j.u = {0, 0, 0};
    j.du = Matrix(3, 3, {1, 0, 0, 0, 1, 0, 0, 0, std::sqrt(3.0)});
    j.d2u = Tensor({3, 3, 3});
    const PointPhase p = classify_point(j);
    CHECK(p.label == 3);
    CHECK(p.spectrum[0] == doctest::Approx(-2.0 / 3.0));
    CHECK(p.spectrum[2] == doctest::Approx(4.0 / 3.0));
  }
  SUBCASE("eigenvalues inside a decade of the threshold are flagged uncertain") {
    // middle eigenvalue of S(g) tuned to ~3e-8 of the top one: above
    // tau = 1e-8 but inside the [tau, 10 tau) caution band
    Jet2 j;
    j.x = {0, 0, 0};
    j.u = {0, 0, 0};
    const double eps_mid = 4.5e-8;
    j.du = Matrix(3, 3, {1, 0, 0, 0, std::sqrt(2.0 + eps_mid), 0, 0, 0, std::sqrt(3.0)});
    j.d2u = Tensor({3, 3, 3});
    const PointPhase p = classify_point(j, 1e-8);
    CHECK(p.label == 3);
    CHECK(p.uncertain);
    // well-separated spectra stay confident
    CHECK_FALSE(classify_point(exp3d_map_jet({0.2, 0.3, 0.1}), 1e-8).uncertain);
  }
  SUBCASE("label one never appears") {
    Rng rng(901);
    for (int t = 0; t < 10000; ++t) {
      const int n = 2 + static_cast<int>(rng.below(2));
      const int N = n + static_cast<int>(rng.below(2));
      const Jet2 j = oracle::random_jet(rng, N, n);
      CHECK(classify_point(j).label != 1);
    }
  }
  SUBCASE("label zero iff the dilation sits at its minimum") {
    Rng rng(907);
    for (int t = 0; t < 300; ++t) {
      const Jet2 j = oracle::random_jet(rng, 3, 2);
      const bool label0 = classify_point(j).label == 0;
      const bool minimal = std::fabs(dilation(j.du) - 2.0) <= 1e-8 * 2.0;
      CHECK(label0 == minimal);
    }
  }
}

TEST_CASE("phase maps over grids") {
  SUBCASE("conformal field: single zero phase, no interfaces") {
    const PhaseMap pm = phase_map_analytic(make_map("rotation"),
                                           Grid::box(2, {{0, 1}, {0, 1}}, 17));
    for (long long f = 0; f < pm.grid.num_points(); ++f) {
      CHECK(pm.augmented[f] == 0);
      CHECK(pm.interface_mask[f] == 0);
    }
  }
  SUBCASE("power map: single top phase everywhere") {
    const PhaseMap pm = phase_map_analytic(power_map(1.0),
                                           Grid::box(2, {{0.2, 0.8}, {0.2, 0.8}}, 17));
    for (long long f = 0; f < pm.grid.num_points(); ++f) {
      CHECK(pm.augmented[f] == 2);
      CHECK(pm.interface_mask[f] == 0);
    }
  }
  SUBCASE("FD route matches the analytic route away from stencil effects") {
    const AnalyticMap power = power_map(1.0);
    const Grid grid = Grid::box(2, {{0.2, 0.8}, {0.2, 0.8}}, 17);
    const PhaseMap exact = phase_map_analytic(power, grid);
    const PhaseMap fd = phase_map(sample_map(power, grid));
    for (long long f = 0; f < grid.num_points(); ++f)
      if (fd.augmented[f] >= 0) CHECK(fd.augmented[f] == exact.augmented[f]);
    CHECK(fd.provenance == "fd-jets");
  }
  SUBCASE("3-D exponential map: the axis line is a lower-rank band") {
    // odd resolution keeps y = z = 0 on the grid
    const Grid grid = Grid::box(3, {{-0.4, 0.4}, {-0.4, 0.4}, {-0.4, 0.4}}, 9);
    const PhaseMap pm = phase_map_analytic(exp3d_map(), grid);
    const int mid = grid.res[1] / 2;
    for (int i = 0; i < grid.res[0]; ++i) {
      const long long on_axis = grid.linear({i, mid, mid});
      CHECK(static_cast<int>(pm.augmented[on_axis]) == 2);
      CHECK(pm.interface_mask[on_axis] == 1);  // neighbors are rank 3
    }
    long long rank3 = 0;
    for (int k = 0; k < grid.res[2]; ++k)
      for (int j = 0; j < grid.res[1]; ++j)
        for (int i = 0; i < grid.res[0]; ++i) {
          if (j == mid && k == mid) continue;
          const long long f = grid.linear({i, j, k});
          if (std::abs(j - mid) >= 2 || std::abs(k - mid) >= 2) {
            CHECK(static_cast<int>(pm.augmented[f]) == 3);
            rank3 += pm.augmented[f] == 3;
          }
        }
    CHECK(rank3 > 0);
    // every masked point has mixed labels inside its 3^n neighborhood
    for (long long f = 0; f < grid.num_points(); ++f) {
      if (!pm.interface_mask[f]) continue;
      const auto idx = grid.unlinear(f);
      bool mixed = false;
      for (int dz = -1; dz <= 1; ++dz)
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            const std::array<int, 3> q{idx[0] + dx, idx[1] + dy, idx[2] + dz};
            if (!grid.in_bounds(q)) continue;
            if (pm.augmented[grid.linear(q)] >= 0 &&
                pm.augmented[grid.linear(q)] != pm.augmented[f])
              mixed = true;
          }
      CHECK(mixed);
    }
  }
}

TEST_CASE("constant dilation per component") {
  SUBCASE("power map: one component at the closed-form constant") {
    const PhaseMap pm = phase_map_analytic(power_map(1.0),
                                           Grid::box(2, {{0.2, 0.8}, {0.2, 0.8}}, 17));
    const auto comps = constant_dilation_check(pm);
    REQUIRE(comps.size() == 1);
    CHECK(comps[0].mean_k == doctest::Approx(2.5).epsilon(1e-12));
    CHECK(comps[0].max_deviation <= 1e-10);
  }
  SUBCASE("identity: conformal component at K = 2") {
    const PhaseMap pm = phase_map_analytic(make_map("identity"),
                                           Grid::box(2, {{0, 1}, {0, 1}}, 17));
    const auto comps = constant_dilation_check(pm);
    REQUIRE(comps.size() == 1);
    CHECK(comps[0].mean_k == doctest::Approx(2.0));
    CHECK(comps[0].max_deviation <= 1e-12);
  }
  SUBCASE("non-solution map has visible dilation spread") {
    const PhaseMap pm = phase_map_analytic(make_map("cubic-y"),
                                           Grid::box(2, {{1, 2}, {1, 2}}, 17));
    const auto comps = constant_dilation_check(pm);
    REQUIRE(comps.size() == 1);
    CHECK(comps[0].max_deviation > 0.1);
  }
}

TEST_CASE("two-dimensional solution fields carry a single constant-dilation label") {
  // whenever the tangential residual vanishes on a connected 2-D grid,
  // exactly one phase label appears and the dilation is constant
  struct Probe {
    const char* name;
    std::vector<std::pair<double, double>> extent;
  };
  const std::vector<Probe> probes{
      {"power", {{0.2, 0.8}, {0.2, 0.8}}},
      {"rotation", {{0.0, 1.0}, {0.0, 1.0}}},
      {"inversion", {{0.3, 1.1}, {0.3, 1.1}}},
  };
  for (const Probe& probe : probes) {
    const AnalyticMap map = make_map(probe.name, {{"gamma", 1.0}});
    const Grid grid = Grid::box(2, probe.extent, 17);
    double sup_tangential = 0.0;
    for (long long f = 0; f < grid.num_points(); ++f)
      sup_tangential = std::max(
          sup_tangential, norm(tangential_residual(map.jet(grid.point(grid.unlinear(f))))));
    REQUIRE(sup_tangential <= 1e-8);
    const PhaseMap pm = phase_map_analytic(map, grid);
    int label = -2;
    for (long long f = 0; f < grid.num_points(); ++f) {
      if (label == -2) label = pm.augmented[f];
      CHECK(pm.augmented[f] == label);
      CHECK(pm.interface_mask[f] == 0);
    }
    const auto comps = constant_dilation_check(pm);
    REQUIRE(comps.size() == 1);
    CHECK(comps[0].max_deviation <= 1e-6);
  }
}

TEST_CASE("interface covariant-derivative identity") {
  SUBCASE("conformal patch: everything vanishes") {
    const AnalyticMap rot = make_map("rotation");
    CurvePatch patch;
    patch.param_step = 0.02;
    for (int t = 0; t <= 20; ++t) {
      patch.points.push_back({0.1 + 0.02 * t, 0.3});
      patch.tangents.push_back({1.0, 0.0});
    }
    const auto rep = interface_identity_check(rot.jet, patch);
    CHECK(rep.rank_along_patch == 0);
    CHECK(rep.max_identity_residual <= 1e-12);
    CHECK(rep.max_normal_residual <= 1e-12);
  }
  SUBCASE("smooth patch with a nontrivial normal bundle") {
    const AnalyticMap bump = make_map("graph-bump");
    CurvePatch patch;
    patch.param_step = 0.0025;
    for (int t = 0; t <= 160; ++t) {
      patch.points.push_back({0.3 + 0.0025 * t, 0.4});
      patch.tangents.push_back({1.0, 0.0});
    }
    const auto rep = interface_identity_check(bump.jet, patch);
    CHECK(rep.rank_along_patch == 2);
    CHECK(rep.samples == 159);
    CHECK(rep.max_identity_residual <= 1e-5);
    // both sides are FD-independent routes; halving the step divides
    // the residual by about four
    CurvePatch coarse;
    coarse.param_step = 0.005;
    for (int t = 0; t <= 80; ++t) {
      coarse.points.push_back({0.3 + 0.005 * t, 0.4});
      coarse.tangents.push_back({1.0, 0.0});
    }
    const auto rep2 = interface_identity_check(bump.jet, coarse);
    CHECK(rep2.max_identity_residual / rep.max_identity_residual ==
          doctest::Approx(4.0).epsilon(0.2));
  }
  SUBCASE("exponential 3-D map along its axis") {
    // the axis is the interface band of this map; along it everything
    // is diagonal, so the map solves the normal system there exactly
    // and the covariant contraction is normal to the image
    CurvePatch patch;
    patch.param_step = 0.004;
    for (int t = 0; t <= 150; ++t) {
      patch.points.push_back({-0.3 + 0.004 * t, 0.0, 0.0});
      patch.tangents.push_back({1.0, 0.0, 0.0});
    }
    const auto rep = interface_identity_check(exp3d_map().jet, patch, 1e-8, 1e-6);
    CHECK(rep.rank_along_patch == 2);
    CHECK(rep.max_identity_residual <= 1e-5);
    CHECK(rep.max_normal_residual <= 1e-12);
    CHECK(rep.max_projection_residual >= 0.0);  // hypothesis held somewhere
    CHECK(rep.max_projection_residual <= 1e-5);
  }
  SUBCASE("rank drift is refused") {
    // a segment through the conformal point of the graph bump, where
    // K_P collapses to zero rank
    const AnalyticMap bump = make_map("graph-bump");
    CurvePatch patch;
    patch.param_step = 0.05;
    for (int t = -2; t <= 2; ++t) {
      patch.points.push_back({0.05 * t, 0.0});
      patch.tangents.push_back({1.0, 0.0});
    }
    CHECK_THROWS_AS(interface_identity_check(bump.jet, patch), RankDriftError);
  }
  SUBCASE("field-backed patches must sit on grid points") {
    const MapField f = sample_map(make_map("graph-bump"), Grid::box(2, {{0, 1}, {0, 1}}, 21));
    CurvePatch patch;
    patch.param_step = 0.05;  // equals the grid spacing
    for (int t = 6; t <= 14; ++t) {
      patch.points.push_back({0.05 * t, 0.5});
      patch.tangents.push_back({1.0, 0.0});
    }
    const auto rep = interface_identity_check(f, patch);
    CHECK(rep.rank_along_patch == 2);
    // FD jets carry O(h^2) error; the identity survives at a looser scale
    CHECK(rep.max_identity_residual <= 5e-2);
    CurvePatch off = patch;
    off.points[0][0] += 0.02;
    CHECK_THROWS_AS(interface_identity_check(f, off), ConfigError);
  }
}
