#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "qcinf/jet.hpp"
#include "qcinf/maps.hpp"

namespace qcinf {

/// Uniform rectangular grid over a box in R^n, n in {2, 3}. Axis 2 is
/// ignored for n = 2. Linear index order: x fastest, then y, then z.
struct Grid {
  int n = 2;
  std::array<double, 3> lo{0.0, 0.0, 0.0};
  std::array<double, 3> hi{1.0, 1.0, 1.0};
  std::array<int, 3> res{5, 5, 1};  // points per axis, >= 5 on active axes

  static Grid box(int n, const std::vector<std::pair<double, double>>& extent, int points);

  void validate() const;
  double spacing(int axis) const { return (hi[axis] - lo[axis]) / (res[axis] - 1); }
  long long num_points() const {
    return static_cast<long long>(res[0]) * res[1] * (n == 3 ? res[2] : 1);
  }
  long long linear(const std::array<int, 3>& idx) const {
    return (static_cast<long long>(n == 3 ? idx[2] : 0) * res[1] + idx[1]) * res[0] + idx[0];
  }
  std::array<int, 3> unlinear(long long flat) const;
  Vec point(const std::array<int, 3>& idx) const;
  bool in_bounds(const std::array<int, 3>& idx) const;
};

enum class PointClass : uint8_t {
  Interior = 0,  // free node, full first-difference stencil available
  Boundary = 1,  // carries Dirichlet data or touches an excluded point
  Excluded = 2,  // outside the computational domain
};

/// A map sampled on a grid. `values` is num_points x N, row-major in the
/// grid's linear order; excluded slots hold zeros and are never read.
struct MapField {
  Grid grid;
  int N = 0;
  std::vector<double> values;
  std::vector<PointClass> mask;
  bool immersion_flag = false;
  double immersion_tau = kDefaultRankTol;

  double value(long long flat, int comp) const { return values[flat * N + comp]; }
  double& value(long long flat, int comp) { return values[flat * N + comp]; }
  Vec value_at(const std::array<int, 3>& idx) const;

  /// Largest r such that the full index box of radius r around idx stays
  /// in-grid and off excluded points (0 when the point itself is bad).
  int stencil_depth(const std::array<int, 3>& idx, int cap = 2) const;
};

/// Samples an analytic map on a grid; every point must satisfy the
/// map's domain predicate. Outer-rim points are marked Boundary. The
/// optional exclusion predicate carves interior holes (their rim
/// becomes Boundary as well).
MapField sample_map(const AnalyticMap& map, const Grid& grid,
                    const std::function<bool(const Vec&)>& exclude = nullptr);

/// Recomputes interior/boundary classes from the excluded set and the
/// immersion flag from first-difference gradients. Returns the flag.
bool refresh_field_classes(MapField& field, double tau = kDefaultRankTol);

/// Central-difference gradient at a point with stencil depth >= 1.
Matrix gradient_from_field(const MapField& field, const std::array<int, 3>& idx);

/// Full second-order jet by central differences (gradient and Hessian
/// O(h^2), 3-point second derivatives, 4-point cross terms). Requires
/// stencil depth >= 2; boundary-adjacent points throw StencilOutOfDomain.
Jet2 jet_from_field(const MapField& field, const std::array<int, 3>& idx);

struct LpNorms {
  double raw_integral = 0.0;   // integral of K^p over the covered cells
  double normalized = 0.0;     // (mean of K^p)^{1/p}, the mean-power form
  double sup = 0.0;            // max over interior points
  long long points = 0;        // quadrature cells (finite p) or interior points (p = inf)
};

/// L^p norms of the dilation: midpoint rule over grid cells (staggered
/// second-order gradients at cell centers) for the integral forms; the
/// sup (and the p = infinity case) ranges over interior points. Throws
/// DomainViolation (with location) if any evaluation leaves S+.
LpNorms lp_norm_of_dilation(const MapField& field, double p);

/// Cells whose every corner is inside the computational domain.
std::vector<std::array<int, 3>> quadrature_cells(const MapField& field);

/// Staggered second-order gradient at the midpoint of a cell.
Matrix cell_gradient(const MapField& field, const std::array<int, 3>& cell);

/// Discrete divergence of K(Du)^{p-1} K_P(Du) at depth >= 2 points;
/// returns a num_points x N array with zeros elsewhere and a mask of
/// evaluated points.
struct DivergenceField {
  std::vector<double> values;      // num_points x N
  std::vector<uint8_t> evaluated;  // 1 where the divergence is defined
};
DivergenceField q_p_divergence_discrete(const MapField& field, double p);

// -- serialization -----------------------------------------------------------

/// CSV: header then one row per point: i,j[,k],x,y[,z],class,u0..u{N-1}.
/// Doubles print with 17 significant digits so round-trips are bit-exact.
void save_field_csv(const MapField& field, const std::string& path);
MapField load_field_csv(const std::string& path);

/// Versioned JSON: {"schema":1,"n":..,"N":..,"extents":..,"resolution":..,
/// "mask":..,"values":..}. Bit-exact round-trip.
void save_field_json(const MapField& field, const std::string& path);
MapField load_field_json(const std::string& path);

}  // namespace qcinf
