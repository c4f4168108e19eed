#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "qcinf/jet.hpp"

namespace qcinf {

/// A closed-form map with exact jets, usable as ground truth.
struct AnalyticMap {
  std::string name;
  int n = 0, N = 0;
  std::map<std::string, double> params;
  std::string domain_desc;
  std::function<bool(const Vec&)> in_domain;
  std::function<Jet2(const Vec&)> jet;  // throws DomainViolation outside the domain
  // exact geometry for ball containment (punctures, annuli); empty means
  // the pointwise predicate is sufficient
  std::function<bool(const Vec&, double)> ball_in_domain;
  // default grid extents per axis for CLI sampling
  std::vector<std::pair<double, double>> default_extent;
};

/// The radial power map u(x) = |x|^gamma x on the punctured plane
/// (restricted to the punctured unit disc when gamma < 0).
Jet2 power_map_jet(const Vec& x, double gamma);
AnalyticMap power_map(double gamma);

/// (cos x - cos y, sin x - sin y): infinity-harmonic near the origin
/// with a rank-one line on the diagonal.
Jet2 complex_exp_map_jet(const Vec& x);
AnalyticMap complex_exp_map();

/// The three-dimensional exponential map (e^x, sqrt2 y e^x, sqrt3 z e^x).
Jet2 exp3d_map_jet(const Vec& x);
AnalyticMap exp3d_map();

/// Conformal families: identity, rotation, scaled rotation, inversion.
AnalyticMap conformal_catalog(const std::string& name,
                              const std::map<std::string, double>& params = {});

/// Full catalog lookup by name; throws ConfigError for unknown names.
/// Names: identity, affine, rotation, scaled-rotation, inversion, power,
/// complex-exp, exp3d, cubic-y, graph, graph-bump.
AnalyticMap make_map(const std::string& name,
                     const std::map<std::string, double>& params = {});

struct MapInfo {
  std::string name;
  int n, N;
  std::string params;  // "key=default,..." or "-"
  std::string domain;
};

std::vector<MapInfo> list_maps();

}  // namespace qcinf
