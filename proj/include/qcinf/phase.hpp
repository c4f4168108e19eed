#pragma once

#include "qcinf/grid.hpp"
#include "qcinf/residuals.hpp"

namespace qcinf {

/// Pointwise phase classification: the label is the eps-rank of the
/// Ahlfors part of the induced metric g = Du^T Du.
struct PointPhase {
  int label = 0;
  bool uncertain = false;  // some |eigenvalue| sits within a decade of the threshold
  Vec spectrum;            // eigenvalues of S(g), ascending
};

PointPhase classify_point(const Jet2& j, double tau = kDefaultRankTol);

/// Grid of phase labels. `augmented` is the raw pointwise rank (the
/// augmented-phase label); a point belongs to the open phase only when
/// its whole 3^n neighborhood shares the label, so `interface_mask`
/// marks points whose neighborhood mixes labels.
struct PhaseMap {
  Grid grid;
  int n = 0;
  std::vector<int8_t> augmented;       // -1 where not evaluated
  std::vector<uint8_t> interface_mask;
  std::vector<uint8_t> uncertain;
  std::vector<double> spectra;         // n entries per point, ascending
  std::vector<double> dilation_k;      // K(Du) per evaluated point, 0 elsewhere
  std::string provenance;              // "exact-jets" or "fd-jets"

  /// Eroded phase label: the augmented label where the neighborhood is
  /// pure, -1 on interfaces and unevaluated points.
  int phase_label(long long flat) const {
    return interface_mask[flat] || augmented[flat] < 0 ? -1 : augmented[flat];
  }
};

/// Phase map from FD gradients of a sampled field (labels need first
/// derivatives only, so all depth >= 1 points are evaluated).
PhaseMap phase_map(const MapField& field, double tau = kDefaultRankTol);

/// Phase map from exact jets of a catalog map on a grid.
PhaseMap phase_map_analytic(const AnalyticMap& map, const Grid& grid,
                            double tau = kDefaultRankTol);

struct ComponentDilation {
  int component_id = 0;
  long long size = 0;
  double mean_k = 0.0;
  double max_deviation = 0.0;
};

/// Connected components (axis connectivity) of the top phase
/// (label = n, off interfaces) with per-component dilation statistics.
std::vector<ComponentDilation> constant_dilation_check(const PhaseMap& pm);

/// A sampled C^1 curve patch: points x(s_i) at uniform parameter
/// spacing with tangent vectors c'(s_i).
struct CurvePatch {
  std::vector<Vec> points;
  std::vector<Vec> tangents;
  double param_step = 0.0;
};

struct InterfaceIdentityReport {
  int samples = 0;                     // interior patch samples evaluated
  double max_identity_residual = 0.0;  // |LHS - RHS| relative to the operand scale
  double max_projection_residual = 0.0;  // tangential part of the covariant
                                         // contraction where the normal
                                         // residual is small; -1 if never
  double max_normal_residual = 0.0;
  int rank_along_patch = 0;
};

/// Checks the interface covariant-derivative identity along a curve
/// patch: the covariant gradient of [K_P]^perp contracted with K_P,
/// computed by FD along the patch, against the reduced-Hessian
/// expression built from exact jets. Requires the eps-rank of K_P to be
/// constant along the patch (RankDriftError otherwise). When the normal
/// residual is below normal_tol at a sample, the report also tracks how
/// normal the covariant contraction is (its range-projected part).
InterfaceIdentityReport interface_identity_check(
    const std::function<Jet2(const Vec&)>& jet_source, const CurvePatch& patch,
    double tau = kDefaultRankTol, double normal_tol = 1e-6);

/// MapField front end: patch points must coincide with grid points (up
/// to roundoff) because the jets come from the field's FD stencils.
InterfaceIdentityReport interface_identity_check(const MapField& field,
                                                 const CurvePatch& patch,
                                                 double tau = kDefaultRankTol,
                                                 double normal_tol = 1e-6);

}  // namespace qcinf
