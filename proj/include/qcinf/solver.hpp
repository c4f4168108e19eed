#pragma once

#include <optional>

#include "qcinf/grid.hpp"

namespace qcinf {

struct OptimizerConfig {
  int max_iters = 500;
  double grad_tol = 1e-8;
  double armijo_c = 1e-4;
  double ls_shrink = 0.5;
  int max_backtracks = 40;
  int lbfgs_memory = 0;  // 0 = plain gradient descent
};

struct SolveConfig {
  Grid grid;
  std::string boundary_map = "identity";
  std::map<std::string, double> boundary_params;
  std::string boundary_file;  // alternative: load Dirichlet data from a field file
  // optional axis-aligned open box removed from the domain (its rim
  // becomes Dirichlet as well)
  std::optional<std::array<double, 6>> hole_box;  // lo0,hi0,lo1,hi1,lo2,hi2
  std::vector<double> p_schedule{2, 4, 8, 16, 32, 64};
  OptimizerConfig opt;
  int restarts = 0;
  double jitter = 1e-3;  // initializer jitter amplitude per restart
  uint64_t seed = 0;
  double tau = kDefaultRankTol;
  bool selftest = false;       // adjoint-vs-FD gradient spot checks
  bool record_timings = false; // wall times stay zero unless enabled
  std::string stall_dump_path; // field dump on SolverStall ("" = skip)

  void validate() const;
};

struct EnergyGradient {
  double energy = 0.0;           // (mean K^p)^{1/p}
  bool finite = true;
  std::array<int, 3> offending{-1, -1, -1};  // first S+ violation when not finite
  std::vector<double> gradient;  // one R^N block per free node, empty when not finite
};

/// Normalized L^p dilation energy of the field and its exact gradient
/// with respect to the interior nodal values (the discrete adjoint of
/// the central-difference stencils). S+ violations return an infinite
/// energy sentinel instead of throwing.
EnergyGradient energy_and_gradient(const MapField& field, double p);

/// Free (interior) nodes of a field in grid linear order.
std::vector<long long> free_nodes(const MapField& field);

struct StageDiagnostics {
  double p = 0.0;
  double energy = 0.0;
  double sup_k = 0.0;
  double variance_k = 0.0;
  double max_qp_rescaled = 0.0;
  double start_sup_k = 0.0;
  int iterations = 0;
  int ls_failures = 0;
  bool converged = false;
  bool energy_monotone = true;
  double wall_ms = 0.0;
};

struct SolveResult {
  MapField field;
  std::vector<StageDiagnostics> stages;
  int restart_used = 0;
  bool selftest_ran = false;
  double selftest_max_rel = 0.0;
  bool selftest_pass = true;
};

/// Dirichlet L^p dilation minimization with p-continuation: each stage
/// warm-starts from the previous one; the first starts from the
/// harmonic extension of the boundary data (affine least-squares
/// fallback when that extension is not an immersion).
SolveResult solve(const SolveConfig& config);

/// Max over depth-2 interior points of the rescaled discrete residual
/// |Div(K^{p-1} K_P)| / ((p-1) K^{p-2}), computed with neighbor-relative
/// powers so no intermediate overflows.
double max_qp_residual_rescaled(const MapField& field, double p);

}  // namespace qcinf
