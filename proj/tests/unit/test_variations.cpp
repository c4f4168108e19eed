#include <doctest.h>

#include <cmath>

#include "qcinf/dilation.hpp"
#include "qcinf/variations.hpp"
#include "test_oracles.hpp"

using namespace qcinf;

TEST_CASE("rank-one trials on a conformal base never decrease the sup") {
  // K >= 2 pointwise with equality for the identity, so every trial
  // has nonnegative measured change
  const JetMap base = jet_map(make_map("identity"));
  Rng rng(1009);
  for (int t = 0; t < 12; ++t) {
    Vec xi{rng.gaussian(), rng.gaussian()};
    xi = scaled(xi, 1.0 / norm(xi));
    const Vec x{rng.uniform(0.3, 0.7), rng.uniform(0.3, 0.7)};
    const VariationTrial tr =
        rank_one_trial(base, x, rng.uniform(0.05, 0.2), xi, rng.log_uniform(1e-3, 1e-1));
    CHECK(tr.delta_k_inf >= -1e-12);
    CHECK(tr.base_sup == doctest::Approx(2.0));
  }
}

TEST_CASE("rank-one battery on the power map stays above the minimality floor") {
  BatteryOptions opts;
  opts.trials = 60;
  opts.seed = 7;
  opts.annulus = true;
  const BatteryResult battery = rank_one_battery(jet_map(power_map(1.0)), opts);
  CHECK(battery.min_delta_k >= -1e-8);
  // base sups all sit at the constant dilation
  for (const VariationTrial& tr : battery.trials)
    CHECK(tr.base_sup == doctest::Approx(2.5).epsilon(1e-9));
}

TEST_CASE("directed search finds a decreasing variation on a non-solution map") {
  const JetMap base = jet_map(make_map("cubic-y"));
  std::vector<Vec> centers{{1.5, 1.5}, {1.7, 1.4}, {1.75, 1.6}};
  const VariationTrial best = directed_decrease_search(
      base, centers, {0.06, 0.1, 0.15}, {0.003, 0.01, 0.03, 0.1});
  CHECK(best.delta_k_inf <= -1e-6);
  CHECK(best.deterministic_direction);
}

TEST_CASE("sup estimates converge under refinement") {
  const JetMap base = jet_map(power_map(1.0));
  const VariationTrial tr =
      rank_one_trial(base, {0.5, 0.1}, 0.15, {1.0, 0.0}, 0.05);
  CHECK(tr.converged);
  CHECK(tr.last_sup_change < 1e-6);
  CHECK(tr.refine_levels >= 2);
}

TEST_CASE("delta auto-shrink always terminates on immersion bases") {
  const JetMap base = jet_map(power_map(1.0));
  const VariationTrial tr = rank_one_trial(base, {0.5, 0.0}, 0.1, {0.0, 1.0}, 1e6);
  CHECK(tr.delta_used < tr.delta_requested);
  CHECK(std::isfinite(tr.delta_k_inf));
}

TEST_CASE("trial preconditions") {
  const JetMap base = jet_map(power_map(1.0));
  // ball reaching past the puncture or the rim is refused
  CHECK_THROWS_AS(rank_one_trial(base, {0.1, 0.0}, 0.3, {1.0, 0.0}, 0.01), ConfigError);
  CHECK_THROWS_AS(rank_one_trial(base, {0.5, 0.0}, 0.1, {2.0, 0.0}, 0.01),
                  PreconditionError);
}

TEST_CASE("normal trials") {
  SUBCASE("square full-rank case is degenerate") {
    // off the conformal set the power map has rank-2 K_P with n = N = 2:
    // the normal bundle is empty
    const JetMap base = jet_map(power_map(1.0));
    const VariationTrial tr = normal_free_trial(base, {0.5, 0.0}, 0.1, HSpec{},
                                                NuSpec{}, 0.01);
    CHECK(tr.status == TrialStatus::Degenerate);
    CHECK(tr.delta_k_inf == 0.0);
  }
  SUBCASE("planar embedding: first-order change vanishes, measured decay is quadratic+") {
    const JetMap base = jet_map(make_map("graph"));
    HSpec ramp;
    ramp.kind = HSpec::Kind::Ramp;
    ramp.value = 1.0;
    ramp.axis = 0;
    NuSpec nu;
    nu.kind = NuSpec::Kind::Target;
    nu.target = {0.0, 0.0, 1.0};
    Vec deltas{0.2, 0.1, 0.05, 0.025}, changes(4, 0.0);
    for (int i = 0; i < 4; ++i) {
      const VariationTrial tr =
          normal_free_trial(base, {0.5, 0.5}, 0.2, ramp, nu, deltas[i]);
      CHECK(tr.status == TrialStatus::Ok);
      CHECK(tr.delta_used == deltas[i]);
      changes[i] = tr.delta_k_inf;
      CHECK(changes[i] >= 0.0);  // conformal base minimizes K pointwise
    }
    const double slope = oracle::loglog_slope(deltas, changes);
    CHECK(slope >= 2.0);
  }
  SUBCASE("phase mixing is refused") {
    // patch across the conformal point of the quadratic graph
    const JetMap base = jet_map(make_map("graph-bump"));
    CHECK_THROWS_AS(
        normal_free_trial(base, {0.0, 0.0}, 0.2, HSpec{}, NuSpec{}, 0.01),
        PhaseMixedError);
  }
  SUBCASE("under-resolved fast-turning frames are refused") {
    // with c1 huge the surface normal swings by more than 60 degrees
    // between adjacent samples of a coarse patch grid
    const JetMap base = jet_map(make_map("graph-bump", {{"c1", 60.0}, {"c2", 0.5}}));
    CHECK_THROWS_AS(
        normal_free_trial(base, {0.0, 0.5}, 0.12, HSpec{}, NuSpec{}, 1e-3, 1e-8, 5),
        FrameDiscontinuityError);
  }
  SUBCASE("violating the normal system invites a decreasing free variation") {
    // on the quadratic graph the normal contraction nu^T K_PP : D^2u is
    // sign-definite near the patch; the constant profile with the
    // matching sign lowers the sup at first order
    const AnalyticMap bump_map = make_map("graph-bump");
    const JetMap base = jet_map(bump_map);
    const Vec center{0.45, 0.3};
    const Jet2 jc = bump_map.jet(center);
    const Matrix kp = dilation_gradient(jc.du);
    const auto basis = null_basis(kp, 1e-8);
    REQUIRE(basis.has_value());
    REQUIRE(basis->cols() == 1);
    const Vec nu0 = basis->col(0);
    const Tensor kpp = dilation_hessian_reduced(jc.du);
    const double pairing = dot(nu0, hessian_contract_d2u(kpp, jc.d2u));
    REQUIRE(std::fabs(pairing) > 1e-6);
    HSpec h;
    h.kind = HSpec::Kind::Constant;
    h.value = pairing > 0.0 ? 1.0 : -1.0;
    NuSpec nu;
    nu.kind = NuSpec::Kind::Target;
    nu.target = nu0;
    for (double delta : {1e-3, 3e-3}) {
      const VariationTrial tr = normal_free_trial(base, center, 0.08, h, nu, delta);
      CHECK(tr.status == TrialStatus::Ok);
      CHECK(tr.delta_k_inf < 0.0);
    }
  }
  SUBCASE("pointwise first-order expansion against the Hessian pairing") {
    // measured K(Du + delta(nu (x) Dh + h Dnu)) - K(Du) at a fixed point
    // has slope -h * (nu^T K_PP : D^2u) in delta (equivalently
    // h * Dnu : K_P); fit over small deltas and compare within 5%
    const double c1 = 0.8, c2 = 0.3;
    const AnalyticMap bump_map = make_map("graph-bump", {{"c1", c1}, {"c2", c2}});
    const Vec x{0.45, 0.3};
    const Jet2 j = bump_map.jet(x);
    const double px = c1 * x[0], py = c2 * x[1];
    const double s = std::sqrt(1.0 + px * px + py * py);
    const Vec nu{-px / s, -py / s, 1.0 / s};
    Matrix dnu(3, 2);
    const double sx = px * c1 / s, sy = py * c2 / s;
    dnu(0, 0) = -c1 / s + px * sx / (s * s);
    dnu(0, 1) = px * sy / (s * s);
    dnu(1, 0) = py * sx / (s * s);
    dnu(1, 1) = -c2 / s + py * sy / (s * s);
    dnu(2, 0) = -sx / (s * s);
    dnu(2, 1) = -sy / (s * s);
    const double h_val = 1.0;
    const Vec dh(2, 0.0);
    const Tensor kpp = dilation_hessian_reduced(j.du);
    const double pairing = dot(nu, hessian_contract_d2u(kpp, j.d2u));
    const double k0 = dilation(j.du);
    // least-squares linear fit of dK against delta
    double num = 0.0, den = 0.0;
    for (double delta : {1e-5, 3e-5, 1e-4, 3e-4, 1e-3}) {
      const Matrix varied = normal_varied_gradient(j.du, nu, dnu, h_val, dh, delta);
      const double dk = dilation(varied) - k0;
      num += dk * delta;
      den += delta * delta;
    }
    const double measured_slope = num / den;
    CHECK(measured_slope == doctest::Approx(-h_val * pairing).epsilon(0.05));
  }
}

TEST_CASE("punctured-disc counterexample report") {
  SUBCASE("gamma = 1") {
    const CounterexampleReport rep = counterexample_report(1.0, 24, 3);
    CHECK(rep.k_identity == doctest::Approx(2.0));
    CHECK(rep.k_power_closed_form == doctest::Approx(2.5));
    CHECK(rep.k_power == doctest::Approx(2.5).epsilon(1e-9));
    CHECK(rep.boundary_gap_sup <= 1e-14);
    CHECK(rep.puncture_value <= 1e-11);
    CHECK(rep.rank_one_pass);
    CHECK(rep.verdict == "rank-one minimal but not minimal among all competitors");
  }
  SUBCASE("gamma = 3 and the small-gamma limit") {
    const CounterexampleReport rep3 = counterexample_report(3.0, 8, 5);
    CHECK(rep3.k_power_closed_form == doctest::Approx(4.25));
    const CounterexampleReport rep0 = counterexample_report(0.01, 8, 5);
    CHECK(rep0.k_power_closed_form - 2.0 == doctest::Approx(0.0001 / 1.01).epsilon(1e-9));
  }
}
