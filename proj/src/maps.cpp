#include "qcinf/maps.hpp"

#include <cmath>

namespace qcinf {

namespace {

double get_param(const std::map<std::string, double>& params, const std::string& key,
                 double fallback) {
  auto it = params.find(key);
  return it == params.end() ? fallback : it->second;
}

void require_dim(const Vec& x, int n, const std::string& who) {
  if (static_cast<int>(x.size()) != n)
    throw PreconditionError(who + ": point has wrong dimension");
}

Jet2 zero_hessian_jet(const Vec& x, const Matrix& a, const Vec& shift) {
  Jet2 j;
  j.x = x;
  j.u = add(a * x, shift);
  j.du = a;
  j.d2u = Tensor({a.rows(), a.cols(), a.cols()});
  return j;
}

}  // namespace

Jet2 power_map_jet(const Vec& x, double gamma) {
  require_dim(x, 2, "power_map_jet");
  if (gamma <= -1.0) throw PreconditionError("power_map_jet: gamma must be > -1");
  const double r = norm(x);
  if (r <= 1e-12) throw DomainViolation("power_map_jet: x = 0 is outside the domain");
  const double rg = std::pow(r, gamma);
  Vec xh = scaled(x, 1.0 / r);
  Jet2 j;
  j.x = x;
  j.u = scaled(x, rg);
  j.du = Matrix(2, 2);
  for (int a = 0; a < 2; ++a)
    for (int i = 0; i < 2; ++i) j.du(a, i) = rg * ((a == i ? 1.0 : 0.0) + gamma * xh[a] * xh[i]);
  j.d2u = Tensor({2, 2, 2});
  const double c = gamma * std::pow(r, gamma - 1.0);
  for (int a = 0; a < 2; ++a)
    for (int i = 0; i < 2; ++i)
      for (int k = 0; k < 2; ++k) {
        double v = 0.0;
        if (a == i) v += xh[k];
        if (a == k) v += xh[i];
        if (i == k) v += xh[a];
        v += (gamma - 2.0) * xh[a] * xh[i] * xh[k];
        j.d2u(a, i, k) = c * v;
      }
  return j;
}

AnalyticMap power_map(double gamma) {
  AnalyticMap m;
  m.name = "power";
  m.n = m.N = 2;
  m.params = {{"gamma", gamma}};
  m.domain_desc = gamma < 0.0 ? "punctured unit disc 0 < |x| <= 1" : "punctured plane x != 0";
  m.in_domain = [gamma](const Vec& x) {
    const double r = norm(x);
    return r > 1e-12 && (gamma >= 0.0 || r <= 1.0);
  };
  m.jet = [gamma](const Vec& x) { return power_map_jet(x, gamma); };
  m.ball_in_domain = [gamma](const Vec& c, double r) {
    const double d = norm(c);
    return d - r > 1e-12 && (gamma >= 0.0 || d + r <= 1.0);
  };
  m.default_extent = {{0.15, 0.85}, {0.15, 0.85}};
  return m;
}

Jet2 complex_exp_map_jet(const Vec& x) {
  require_dim(x, 2, "complex_exp_map_jet");
  const double sx = std::sin(x[0]), cx = std::cos(x[0]);
  const double sy = std::sin(x[1]), cy = std::cos(x[1]);
  Jet2 j;
  j.x = x;
  j.u = {cx - cy, sx - sy};
  j.du = Matrix(2, 2, {-sx, sy, cx, -cy});
  j.d2u = Tensor({2, 2, 2});
  j.d2u(0, 0, 0) = -cx;
  j.d2u(0, 1, 1) = cy;
  j.d2u(1, 0, 0) = -sx;
  j.d2u(1, 1, 1) = sy;
  return j;
}

AnalyticMap complex_exp_map() {
  AnalyticMap m;
  m.name = "complex-exp";
  m.n = m.N = 2;
  m.domain_desc = "all of R^2 (infinity-harmonic near the origin)";
  m.in_domain = [](const Vec&) { return true; };
  m.jet = [](const Vec& x) { return complex_exp_map_jet(x); };
  m.default_extent = {{-0.3, 0.3}, {-0.3, 0.3}};
  return m;
}

Jet2 exp3d_map_jet(const Vec& x) {
  require_dim(x, 3, "exp3d_map_jet");
  const double ex = std::exp(x[0]);
  const double s2 = std::sqrt(2.0), s3 = std::sqrt(3.0);
  Jet2 j;
  j.x = x;
  j.u = {ex, s2 * x[1] * ex, s3 * x[2] * ex};
  j.du = Matrix(3, 3,
                {ex, 0.0, 0.0,
                 s2 * x[1] * ex, s2 * ex, 0.0,
                 s3 * x[2] * ex, 0.0, s3 * ex});
  j.d2u = Tensor({3, 3, 3});
  j.d2u(0, 0, 0) = ex;
  j.d2u(1, 0, 0) = s2 * x[1] * ex;
  j.d2u(1, 0, 1) = j.d2u(1, 1, 0) = s2 * ex;
  j.d2u(2, 0, 0) = s3 * x[2] * ex;
  j.d2u(2, 0, 2) = j.d2u(2, 2, 0) = s3 * ex;
  return j;
}

AnalyticMap exp3d_map() {
  AnalyticMap m;
  m.name = "exp3d";
  m.n = m.N = 3;
  m.domain_desc = "all of R^3";
  m.in_domain = [](const Vec&) { return true; };
  m.jet = [](const Vec& x) { return exp3d_map_jet(x); };
  m.default_extent = {{-0.5, 0.5}, {-0.5, 0.5}, {-0.5, 0.5}};
  return m;
}

AnalyticMap conformal_catalog(const std::string& name,
                              const std::map<std::string, double>& params) {
  if (name == "identity") {
    const int n = static_cast<int>(get_param(params, "n", 2));
    if (n != 2 && n != 3) throw ConfigError("identity: n must be 2 or 3");
    AnalyticMap m;
    m.name = "identity";
    m.n = m.N = n;
    m.params = {{"n", static_cast<double>(n)}};
    m.domain_desc = "all of R^n";
    m.in_domain = [](const Vec&) { return true; };
    m.jet = [n](const Vec& x) {
      require_dim(x, n, "identity");
      return zero_hessian_jet(x, Matrix::identity(n), Vec(n, 0.0));
    };
    m.default_extent.assign(n, {0.0, 1.0});
    return m;
  }
  if (name == "rotation" || name == "scaled-rotation") {
    const double theta = get_param(params, "theta", 0.7);
    const double scale = name == "rotation" ? 1.0 : get_param(params, "scale", 2.0);
    Matrix r(2, 2, {std::cos(theta), -std::sin(theta), std::sin(theta), std::cos(theta)});
    r *= scale;
    AnalyticMap m;
    m.name = name;
    m.n = m.N = 2;
    m.params = {{"theta", theta}};
    if (name == "scaled-rotation") m.params["scale"] = scale;
    m.domain_desc = "all of R^2";
    m.in_domain = [](const Vec&) { return true; };
    m.jet = [r](const Vec& x) {
      require_dim(x, 2, "rotation");
      return zero_hessian_jet(x, r, Vec(2, 0.0));
    };
    m.default_extent = {{0.0, 1.0}, {0.0, 1.0}};
    return m;
  }
  if (name == "inversion") {
    const int n = static_cast<int>(get_param(params, "n", 2));
    if (n != 2 && n != 3) throw ConfigError("inversion: n must be 2 or 3");
    const double r0 = get_param(params, "r0", 0.25);
    const double r1 = get_param(params, "r1", 2.0);
    if (!(r0 > 0.0 && r1 > r0)) throw ConfigError("inversion: need 0 < r0 < r1");
    AnalyticMap m;
    m.name = "inversion";
    m.n = m.N = n;
    m.params = {{"n", static_cast<double>(n)}, {"r0", r0}, {"r1", r1}};
    m.domain_desc = "annulus r0 <= |x| <= r1";
    m.in_domain = [r0, r1](const Vec& x) {
      const double r = norm(x);
      return r >= r0 && r <= r1;
    };
    m.jet = [n, r0, r1](const Vec& x) {
      require_dim(x, n, "inversion");
      const double r = norm(x);
      if (r < r0 || r > r1)
        throw DomainViolation("inversion: point outside the annulus");
      const double r2 = r * r, r4 = r2 * r2, r6 = r4 * r2;
      Jet2 j;
      j.x = x;
      j.u = scaled(x, 1.0 / r2);
      j.du = Matrix(n, n);
      for (int a = 0; a < n; ++a)
        for (int i = 0; i < n; ++i)
          j.du(a, i) = (a == i ? 1.0 / r2 : 0.0) - 2.0 * x[a] * x[i] / r4;
      j.d2u = Tensor({n, n, n});
      for (int a = 0; a < n; ++a)
        for (int i = 0; i < n; ++i)
          for (int k = 0; k < n; ++k) {
            double v = 0.0;
            if (a == i) v -= 2.0 * x[k];
            if (a == k) v -= 2.0 * x[i];
            if (i == k) v -= 2.0 * x[a];
            j.d2u(a, i, k) = v / r4 + 8.0 * x[a] * x[i] * x[k] / r6;
          }
      return j;
    };
    m.ball_in_domain = [r0, r1](const Vec& c, double r) {
      const double d = norm(c);
      return d - r >= r0 && d + r <= r1;
    };
    m.default_extent.assign(n, {0.3, n == 2 ? 1.2 : 1.0});
    return m;
  }
  throw ConfigError("conformal_catalog: unknown map '" + name + "'");
}

AnalyticMap make_map(const std::string& name, const std::map<std::string, double>& params) {
  if (name == "identity" || name == "rotation" || name == "scaled-rotation" ||
      name == "inversion")
    return conformal_catalog(name, params);
  if (name == "power") return power_map(get_param(params, "gamma", 1.0));
  if (name == "complex-exp") return complex_exp_map();
  if (name == "exp3d") return exp3d_map();
  if (name == "affine") {
    Matrix a(2, 2,
             {get_param(params, "a11", 1.0), get_param(params, "a12", 0.0),
              get_param(params, "a21", 0.0), get_param(params, "a22", 1.0)});
    Vec b = {get_param(params, "b1", 0.0), get_param(params, "b2", 0.0)};
    if (std::fabs(det(a)) < 1e-12) throw ConfigError("affine: matrix must be invertible");
    AnalyticMap m;
    m.name = "affine";
    m.n = m.N = 2;
    m.params = {{"a11", a(0, 0)}, {"a12", a(0, 1)}, {"a21", a(1, 0)}, {"a22", a(1, 1)},
                {"b1", b[0]},     {"b2", b[1]}};
    m.domain_desc = "all of R^2";
    m.in_domain = [](const Vec&) { return true; };
    m.jet = [a, b](const Vec& x) {
      require_dim(x, 2, "affine");
      return zero_hessian_jet(x, a, b);
    };
    m.default_extent = {{0.0, 1.0}, {0.0, 1.0}};
    return m;
  }
  if (name == "cubic-y") {
    AnalyticMap m;
    m.name = "cubic-y";
    m.n = m.N = 2;
    m.domain_desc = "half-plane x != 0 (immersion fails on the y-axis)";
    m.in_domain = [](const Vec& x) { return std::fabs(x[0]) > 1e-9; };
    m.jet = [](const Vec& x) {
      require_dim(x, 2, "cubic-y");
      if (std::fabs(x[0]) <= 1e-9) throw DomainViolation("cubic-y: x = 0 line excluded");
      Jet2 j;
      j.x = x;
      j.u = {x[0] * x[0] * x[0], x[1]};
      j.du = Matrix(2, 2, {3.0 * x[0] * x[0], 0.0, 0.0, 1.0});
      j.d2u = Tensor({2, 2, 2});
      j.d2u(0, 0, 0) = 6.0 * x[0];
      return j;
    };
    m.ball_in_domain = [](const Vec& c, double r) { return std::fabs(c[0]) - r > 1e-9; };
    m.default_extent = {{1.0, 2.0}, {1.0, 2.0}};
    return m;
  }
  if (name == "graph") {
    AnalyticMap m;
    m.name = "graph";
    m.n = 2;
    m.N = 3;
    m.domain_desc = "all of R^2 (planar embedding into R^3)";
    m.in_domain = [](const Vec&) { return true; };
    m.jet = [](const Vec& x) {
      require_dim(x, 2, "graph");
      Jet2 j;
      j.x = x;
      j.u = {x[0], x[1], 0.0};
      j.du = Matrix(3, 2, {1.0, 0.0, 0.0, 1.0, 0.0, 0.0});
      j.d2u = Tensor({3, 2, 2});
      return j;
    };
    m.default_extent = {{0.0, 1.0}, {0.0, 1.0}};
    return m;
  }
  if (name == "graph-bump") {
    const double c1 = get_param(params, "c1", 0.8);
    const double c2 = get_param(params, "c2", 0.3);
    AnalyticMap m;
    m.name = "graph-bump";
    m.n = 2;
    m.N = 3;
    m.params = {{"c1", c1}, {"c2", c2}};
    m.domain_desc = "all of R^2 (quadratic graph over the plane)";
    m.in_domain = [](const Vec&) { return true; };
    m.jet = [c1, c2](const Vec& x) {
      require_dim(x, 2, "graph-bump");
      Jet2 j;
      j.x = x;
      j.u = {x[0], x[1], 0.5 * (c1 * x[0] * x[0] + c2 * x[1] * x[1])};
      j.du = Matrix(3, 2, {1.0, 0.0, 0.0, 1.0, c1 * x[0], c2 * x[1]});
      j.d2u = Tensor({3, 2, 2});
      j.d2u(2, 0, 0) = c1;
      j.d2u(2, 1, 1) = c2;
      return j;
    };
    m.default_extent = {{0.0, 1.0}, {0.0, 1.0}};
    return m;
  }
  throw ConfigError("make_map: unknown map '" + name + "'");
}

std::vector<MapInfo> list_maps() {
  return {
      {"identity", 2, 2, "n=2", "all of R^n (n in {2,3})"},
      {"affine", 2, 2, "a11=1,a12=0,a21=0,a22=1,b1=0,b2=0", "all of R^2"},
      {"rotation", 2, 2, "theta=0.7", "all of R^2"},
      {"scaled-rotation", 2, 2, "theta=0.7,scale=2", "all of R^2"},
      {"inversion", 2, 2, "n=2,r0=0.25,r1=2", "annulus r0 <= |x| <= r1"},
      {"power", 2, 2, "gamma=1", "punctured plane (unit disc for gamma < 0)"},
      {"complex-exp", 2, 2, "-", "all of R^2"},
      {"exp3d", 3, 3, "-", "all of R^3"},
      {"cubic-y", 2, 2, "-", "x != 0"},
      {"graph", 2, 3, "-", "all of R^2"},
      {"graph-bump", 2, 3, "c1=0.8,c2=0.3", "all of R^2"},
  };
}

}  // namespace qcinf
