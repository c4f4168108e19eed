#pragma once

#include <cstdint>
#include <functional>
#include <string>

#include "qcinf/maps.hpp"
#include "qcinf/residuals.hpp"

namespace qcinf {

/// A map given by a jet evaluator and a domain predicate; adapts both
/// analytic catalog maps and sampled fields.
struct JetMap {
  int n = 0, N = 0;
  std::function<Jet2(const Vec&)> jet;
  std::function<bool(const Vec&)> in_domain;
  std::function<bool(const Vec&, double)> ball_in_domain;  // optional exact geometry
};

JetMap jet_map(const AnalyticMap& m);

enum class TrialKind { RankOne, NormalFree };
enum class TrialStatus { Ok, Degenerate };

struct VariationTrial {
  TrialKind kind = TrialKind::RankOne;
  TrialStatus status = TrialStatus::Ok;
  Vec center;
  double radius = 0.0;
  Vec direction;             // xi for rank-one, nu at the center for normal trials
  double delta_requested = 0.0;
  double delta_used = 0.0;   // after immersion-preserving auto-shrink
  double base_sup = 0.0;
  double varied_sup = 0.0;
  double delta_k_inf = 0.0;  // varied_sup - base_sup
  int refine_levels = 0;
  long long samples = 0;
  double last_sup_change = 0.0;
  bool converged = true;
  bool deterministic_direction = false;
};

struct SupOptions {
  int coarse_res = 65;   // per-axis samples of the first full-ball grid
  int refine_res = 33;   // per-axis samples of each nested box
  int max_levels = 12;
  double sup_tol = 1e-7;
};

/// Scalar-profile variation u + delta f xi with the parabolic bump
/// f(z) = (eps^2 - |z-x|^2)/2 on the ball B_eps(x). The sup of K over
/// the ball is estimated on nested grids refined around the running
/// argmax until the estimate stabilizes; delta is halved until the
/// varied map stays an immersion on every sample.
VariationTrial rank_one_trial(const JetMap& base, const Vec& x, double eps, const Vec& xi,
                              double delta, const SupOptions& opts = {});

struct BatteryOptions {
  int trials = 200;
  uint64_t seed = 0;
  double delta_min = 1e-3;
  double delta_max = 1e-1;
  double eps_min = 0.02;
  double eps_max = 0.2;
  // centers: either an annulus r in [r_min, r_max] about the origin, or
  // a box shrunk by the trial radius
  bool annulus = false;
  double r_min = 0.3, r_max = 0.7;
  std::vector<std::pair<double, double>> box;
  int deterministic_every = 4;  // every k-th trial points xi along +-K_P D(K)
  int threads = 1;              // trials are independent; any worker count
                                // reproduces the same results
  SupOptions sup;
};

struct BatteryResult {
  std::vector<VariationTrial> trials;
  double min_delta_k = 0.0;
  int worst_index = -1;
};

/// Seeded battery of rank-one trials with random centers, radii,
/// amplitudes and directions (plus the informative deterministic
/// directions along the tangential residual).
BatteryResult rank_one_battery(const JetMap& base, const BatteryOptions& opts);

/// Directed search for a dilation-decreasing rank-one variation: at
/// each candidate center aims xi along the normalized tangential
/// residual (both signs) over a small epsilon/delta ladder and returns
/// the best (most negative) trial.
VariationTrial directed_decrease_search(const JetMap& base, const std::vector<Vec>& centers,
                                        const std::vector<double>& eps_list,
                                        const std::vector<double>& delta_list,
                                        const SupOptions& opts = {});

struct HSpec {
  enum class Kind { Constant, Ramp } kind = Kind::Constant;
  double value = 1.0;  // constant value, or ramp slope
  int axis = 0;        // ramp axis
};

struct NuSpec {
  enum class Kind { BasisIndex, Target } kind = Kind::BasisIndex;
  int index = 0;
  Vec target;  // projected into the null bundle and propagated
};

/// Free variation u + delta h nu along a section nu of [K_P(Du)]^perp
/// over the ball B_radius(center), which must sit inside a single
/// phase. The section is built pointwise from the null basis of
/// K_P(Du)^T with sign-continuity alignment outward from the center and
/// its spatial derivative comes from central differences on the patch
/// grid. For empty null bundles the trial reports Degenerate.
VariationTrial normal_free_trial(const JetMap& base, const Vec& center, double radius,
                                 const HSpec& h_spec, const NuSpec& nu_spec, double delta,
                                 double tau = kDefaultRankTol, int res = 33);

/// Varied gradient of a normal variation at a point:
/// Du + delta (nu (x) Dh + h Dnu).
Matrix normal_varied_gradient(const Matrix& du, const Vec& nu, const Matrix& dnu,
                              double h_value, const Vec& dh, double delta);

struct CounterexampleReport {
  double gamma = 0.0;
  double k_identity = 0.0;       // sup dilation of the identity
  double k_power = 0.0;          // sup dilation of the power map (measured)
  double k_power_closed_form = 0.0;  // 2 + gamma^2/(gamma+1)
  double boundary_gap_sup = 0.0;     // sup |u^gamma - id| on the unit circle
  double puncture_value = 0.0;       // |u^gamma| at r = 1e-6 (tends to 0 for gamma > 0)
  bool rank_one_pass = false;
  double battery_min_delta = 0.0;
  int battery_trials = 0;
  std::string verdict;
};

/// Reproduces the punctured-disc comparison: the power map has
/// rank-one locally minimal dilation yet strictly larger sup dilation
/// than the identity with the same boundary values.
CounterexampleReport counterexample_report(double gamma, int battery_trials = 64,
                                           uint64_t seed = 0);

}  // namespace qcinf
