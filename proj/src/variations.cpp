#include "qcinf/variations.hpp"

#include <algorithm>
#include <cmath>
#include <queue>

#include "qcinf/dilation.hpp"
#include "qcinf/parallel.hpp"
#include "qcinf/rng.hpp"

namespace qcinf {

JetMap jet_map(const AnalyticMap& m) {
  JetMap jm;
  jm.n = m.n;
  jm.N = m.N;
  jm.jet = m.jet;
  jm.in_domain = m.in_domain;
  jm.ball_in_domain = m.ball_in_domain;
  return jm;
}

namespace {

// All sample points of an axis grid over [c - w, c + w]^n kept inside
// the ball |z - c| <= r (w <= r for the full ball).
std::vector<Vec> ball_samples(const Vec& c, double w, double r, int res, int n) {
  std::vector<Vec> pts;
  pts.reserve(static_cast<size_t>(std::pow(res, n)));
  std::vector<int> idx(n, 0);
  while (true) {
    Vec z(c);
    for (int a = 0; a < n; ++a) z[a] += -w + 2.0 * w * idx[a] / (res - 1);
    double d2 = 0.0;
    for (int a = 0; a < n; ++a) d2 += (z[a] - c[a]) * (z[a] - c[a]);
    if (d2 <= r * r * (1.0 + 1e-14)) pts.push_back(z);
    int a = 0;
    while (a < n && ++idx[a] == res) idx[a++] = 0;
    if (a == n) break;
  }
  return pts;
}

// clamp a sub-box center so the box stays inside the ball bounding box
Vec clamp_center(const Vec& z, const Vec& c, double ball_r, double half_w, int n) {
  Vec out = z;
  for (int a = 0; a < n; ++a)
    out[a] = std::clamp(out[a], c[a] - ball_r + half_w, c[a] + ball_r - half_w);
  return out;
}

struct SupEstimate {
  double sup = -1.0;
  Vec argmax;
  long long samples = 0;
  int levels = 0;
  double last_change = 0.0;
  bool converged = false;
};

// Nested-grid sup of `eval` over the ball B_r(c): a full coarse pass,
// then boxes shrinking around the running argmax. Estimates are
// monotone (each level only raises the running max).
SupEstimate nested_sup(const std::function<double(const Vec&)>& eval, const Vec& c, double r,
                       int n, const SupOptions& opts) {
  SupEstimate est;
  double w = r;
  Vec box_center = c;
  int res = opts.coarse_res;
  for (int level = 0; level <= opts.max_levels; ++level) {
    const std::vector<Vec> pts = ball_samples(box_center, w, r, res, n);
    double prev = est.sup;
    for (const Vec& z : pts) {
      const double v = eval(z);
      ++est.samples;
      if (v > est.sup) {
        est.sup = v;
        est.argmax = z;
      }
    }
    est.levels = level + 1;
    est.last_change = level == 0 ? est.sup : est.sup - prev;
    if (level > 0 && est.last_change < opts.sup_tol) {
      est.converged = true;
      break;
    }
    // shrink around the current argmax: cover a few old cells
    const double spacing = 2.0 * w / (res - 1);
    w = 3.0 * spacing;
    res = opts.refine_res;
    box_center = clamp_center(est.argmax, c, r, 0.0, n);
  }
  return est;
}

double rank_one_varied_k(const JetMap& base, const Vec& z, const Vec& x, const Vec& xi,
                         double delta) {
  const Jet2 j = base.jet(z);
  Matrix du = j.du;
  for (int a = 0; a < base.N; ++a)
    for (int i = 0; i < base.n; ++i) du(a, i) -= delta * xi[a] * (z[i] - x[i]);
  return dilation(du);
}

bool rank_one_immersion_everywhere(const JetMap& base, const std::vector<Vec>& pts,
                                   const Vec& x, const Vec& xi, double delta, double tau) {
  for (const Vec& z : pts) {
    const Jet2 j = base.jet(z);
    Matrix du = j.du;
    for (int a = 0; a < base.N; ++a)
      for (int i = 0; i < base.n; ++i) du(a, i) -= delta * xi[a] * (z[i] - x[i]);
    // the dilation must be evaluable too: S+ has a scale-consistent
    // determinant floor slightly above the eps-rank cut
    if (eps_rank(du, tau) != base.n || !in_splus(du)) return false;
  }
  return true;
}

}  // namespace

VariationTrial rank_one_trial(const JetMap& base, const Vec& x, double eps, const Vec& xi,
                              double delta, const SupOptions& opts) {
  if (eps <= 0.0) throw ConfigError("rank_one_trial: radius must be positive");
  if (delta <= 0.0) throw PreconditionError("rank_one_trial: amplitude must be positive");
  if (std::fabs(norm(xi) - 1.0) > 1e-8)
    throw PreconditionError("rank_one_trial: xi must be a unit vector");

  VariationTrial trial;
  trial.kind = TrialKind::RankOne;
  trial.center = x;
  trial.radius = eps;
  trial.direction = xi;
  trial.delta_requested = delta;

  // the ball must sit inside the domain: exact geometry when the map
  // provides it, sample containment otherwise
  if (base.ball_in_domain && !base.ball_in_domain(x, eps))
    throw ConfigError("rank_one_trial: the variation ball leaves the base map's domain");
  const std::vector<Vec> coarse = ball_samples(x, eps, eps, opts.coarse_res, base.n);
  for (const Vec& z : coarse)
    if (!base.in_domain(z))
      throw ConfigError("rank_one_trial: the variation ball leaves the base map's domain");

  // auto-shrink delta until the varied map is an immersion on the ball;
  // refined samples can still stray outside S+ for large amplitudes, in
  // which case the shrink loop resumes below
  double d = delta;
  int shrinks = 0;
  while (!rank_one_immersion_everywhere(base, coarse, x, xi, d, kDefaultRankTol)) {
    d *= 0.5;
    if (++shrinks > 80)
      throw DomainViolation("rank_one_trial: could not restore the immersion property");
  }

  const SupEstimate base_est =
      nested_sup([&](const Vec& z) { return dilation(base.jet(z).du); }, x, eps, base.n, opts);
  SupEstimate varied_est;
  for (;;) {
    try {
      varied_est = nested_sup(
          [&](const Vec& z) { return rank_one_varied_k(base, z, x, xi, d); }, x, eps,
          base.n, opts);
      break;
    } catch (const DomainViolation&) {
      d *= 0.5;
      if (++shrinks > 80)
        throw DomainViolation("rank_one_trial: could not restore the immersion property");
    }
  }
  trial.delta_used = d;

  trial.base_sup = base_est.sup;
  trial.varied_sup = varied_est.sup;
  trial.delta_k_inf = varied_est.sup - base_est.sup;
  trial.refine_levels = std::max(base_est.levels, varied_est.levels);
  trial.samples = base_est.samples + varied_est.samples;
  trial.last_sup_change = std::max(base_est.last_change, varied_est.last_change);
  trial.converged = base_est.converged && varied_est.converged;
  return trial;
}

BatteryResult rank_one_battery(const JetMap& base, const BatteryOptions& opts) {
  BatteryResult result;
  result.trials.resize(opts.trials);
  // trials are seeded by index and write disjoint slots, so the battery
  // parallelizes without changing any output
  parallel_for(opts.trials, opts.threads, [&](long long t) {
    Rng rng(opts.seed * 0x9e3779b97f4a7c15ULL + static_cast<uint64_t>(t));
    // center
    Vec x(base.n, 0.0);
    double room;
    if (opts.annulus) {
      const double r = rng.uniform(opts.r_min, opts.r_max);
      const double th = rng.uniform(0.0, 6.283185307179586);
      x[0] = r * std::cos(th);
      x[1] = r * std::sin(th);
      room = std::min(0.6 * r, 0.8 * (1.0 - r));
    } else {
      room = 1e30;
      for (int a = 0; a < base.n; ++a) {
        const auto [lo, hi] = opts.box[a];
        const double margin = 0.25 * (hi - lo);
        x[a] = rng.uniform(lo + margin, hi - margin);
        room = std::min(room, margin);
      }
    }
    const double eps = rng.uniform(opts.eps_min, std::max(opts.eps_min * 1.5,
                                                          std::min(opts.eps_max, room)));
    const double delta = rng.log_uniform(opts.delta_min, opts.delta_max);

    Vec xi(base.N, 0.0);
    bool deterministic = opts.deterministic_every > 0 && (t % opts.deterministic_every) ==
                                                             opts.deterministic_every - 1;
    if (deterministic) {
      // the informative direction: the normalized tangential residual,
      // with the sign alternating between uses
      const Vec tr = tangential_residual(base.jet(x));
      if (norm(tr) > 1e-14) {
        xi = normalized(tr);
        if ((t / opts.deterministic_every) % 2 == 1) xi = scaled(xi, -1.0);
      } else {
        deterministic = false;
      }
    }
    if (!deterministic) {
      double nn = 0.0;
      while (nn < 1e-8) {
        for (auto& v : xi) v = rng.gaussian();
        nn = norm(xi);
      }
      xi = scaled(xi, 1.0 / nn);
    }

    VariationTrial trial = rank_one_trial(base, x, eps, xi, delta, opts.sup);
    trial.deterministic_direction = deterministic;
    result.trials[t] = std::move(trial);
  });
  for (int t = 0; t < opts.trials; ++t)
    if (result.worst_index < 0 || result.trials[t].delta_k_inf < result.min_delta_k) {
      result.min_delta_k = result.trials[t].delta_k_inf;
      result.worst_index = t;
    }
  return result;
}

VariationTrial directed_decrease_search(const JetMap& base, const std::vector<Vec>& centers,
                                        const std::vector<double>& eps_list,
                                        const std::vector<double>& delta_list,
                                        const SupOptions& opts) {
  VariationTrial best;
  bool have = false;
  for (const Vec& x : centers) {
    const Vec tr = tangential_residual(base.jet(x));
    if (norm(tr) < 1e-14) continue;
    const Vec dir = normalized(tr);
    for (double eps : eps_list)
      for (double delta : delta_list)
        for (double sign : {1.0, -1.0}) {
          VariationTrial t = rank_one_trial(base, x, eps, scaled(dir, sign), delta, opts);
          t.deterministic_direction = true;
          if (!have || t.delta_k_inf < best.delta_k_inf) {
            best = t;
            have = true;
          }
        }
  }
  if (!have) throw ConfigError("directed_decrease_search: no usable center");
  return best;
}

Matrix normal_varied_gradient(const Matrix& du, const Vec& nu, const Matrix& dnu,
                              double h_value, const Vec& dh, double delta) {
  Matrix out = du;
  for (int a = 0; a < du.rows(); ++a)
    for (int i = 0; i < du.cols(); ++i)
      out(a, i) += delta * (nu[a] * dh[i] + h_value * dnu(a, i));
  return out;
}

namespace {

struct PatchGrid {
  std::vector<Vec> points;           // all grid nodes of the bounding box
  std::vector<bool> in_ball;
  std::vector<int> order;            // node indices sorted by distance from center
  int res = 0;
  double spacing = 0.0;
  int n = 0;

  long long flat(const std::vector<int>& idx) const {
    long long f = 0;
    for (int a = n - 1; a >= 0; --a) f = f * res + idx[a];
    return f;
  }
};

PatchGrid make_patch_grid(const Vec& center, double radius, int res, int n) {
  PatchGrid g;
  g.res = res;
  g.n = n;
  g.spacing = 2.0 * radius / (res - 1);
  const long long total = static_cast<long long>(std::pow(res, n));
  g.points.resize(total);
  g.in_ball.resize(total);
  std::vector<int> idx(n, 0);
  long long f = 0;
  while (true) {
    Vec z(center);
    double d2 = 0.0;
    for (int a = 0; a < n; ++a) {
      z[a] += -radius + g.spacing * idx[a];
      d2 += (z[a] - center[a]) * (z[a] - center[a]);
    }
    g.points[f] = z;
    g.in_ball[f] = d2 <= radius * radius * (1.0 + 1e-14);
    ++f;
    int a = 0;
    while (a < n && ++idx[a] == res) idx[a++] = 0;
    if (a == n) break;
  }
  g.order.resize(total);
  for (long long i = 0; i < total; ++i) g.order[i] = static_cast<int>(i);
  std::sort(g.order.begin(), g.order.end(), [&](int a, int b) {
    double da = 0.0, db = 0.0;
    for (int c = 0; c < n; ++c) {
      da += (g.points[a][c] - center[c]) * (g.points[a][c] - center[c]);
      db += (g.points[b][c] - center[c]) * (g.points[b][c] - center[c]);
    }
    return da < db;
  });
  return g;
}

}  // namespace

VariationTrial normal_free_trial(const JetMap& base, const Vec& center, double radius,
                                 const HSpec& h_spec, const NuSpec& nu_spec, double delta,
                                 double tau, int res) {
  if (res < 5 || res % 2 == 0)
    throw ConfigError("normal_free_trial: res must be odd and >= 5");
  if (radius <= 0.0 || delta <= 0.0)
    throw PreconditionError("normal_free_trial: radius and amplitude must be positive");
  VariationTrial trial;
  trial.kind = TrialKind::NormalFree;
  trial.center = center;
  trial.radius = radius;
  trial.delta_requested = delta;

  if (base.ball_in_domain && !base.ball_in_domain(center, radius))
    throw ConfigError("normal_free_trial: patch leaves the base map's domain");
  const PatchGrid pg = make_patch_grid(center, radius, res, base.n);
  const long long total = static_cast<long long>(pg.points.size());

  // jets and phase of every in-ball node
  std::vector<Jet2> jets(total);
  std::vector<Matrix> kp(total);
  int label = -1;
  for (long long f = 0; f < total; ++f) {
    if (!pg.in_ball[f]) continue;
    if (!base.in_domain(pg.points[f]))
      throw ConfigError("normal_free_trial: patch leaves the base map's domain");
    jets[f] = base.jet(pg.points[f]);
    kp[f] = dilation_gradient(jets[f].du);
    const Matrix g = transposed(jets[f].du) * jets[f].du;
    const int l = eps_rank(ahlfors(g), tau);
    if (label < 0) label = l;
    if (l != label)
      throw PhaseMixedError("normal_free_trial: patch straddles a phase boundary");
  }

  // null bundle of K_P^T with frame alignment outward from the center
  std::vector<Matrix> frames(total);
  std::vector<bool> framed(total, false);
  int null_dim = -1;
  for (int oi = 0; oi < total; ++oi) {
    const int f = pg.order[oi];
    if (!pg.in_ball[f]) continue;
    auto basis = dilation_null_basis(jets[f].du, tau);
    if (!basis.has_value()) {
      trial.status = TrialStatus::Degenerate;
      trial.delta_used = 0.0;
      trial.delta_k_inf = 0.0;
      return trial;
    }
    if (null_dim < 0) null_dim = basis->cols();
    if (basis->cols() != null_dim)
      throw RankDriftError("normal_free_trial: null-bundle dimension drifts across the patch");
    if (oi == 0) {
      frames[f] = *basis;
      framed[f] = true;
      continue;
    }
    // align against the nearest already-framed node
    int ref = -1;
    double best = 1e300;
    for (int oj = 0; oj < oi; ++oj) {
      const int cand = pg.order[oj];
      if (!framed[cand]) continue;
      double d2 = 0.0;
      for (int a = 0; a < base.n; ++a) {
        const double dd = pg.points[f][a] - pg.points[cand][a];
        d2 += dd * dd;
      }
      if (d2 < best) {
        best = d2;
        ref = cand;
      }
    }
    // project the reference frame into this null space, Gram-Schmidt
    const Matrix span = *basis;  // orthonormal columns
    Matrix aligned(base.N, null_dim);
    for (int c = 0; c < null_dim; ++c) {
      Vec v(base.N, 0.0);
      // P_null * ref_col expressed through the basis
      for (int b = 0; b < null_dim; ++b) {
        double coef = 0.0;
        for (int r = 0; r < base.N; ++r) coef += span(r, b) * frames[ref](r, c);
        for (int r = 0; r < base.N; ++r) v[r] += coef * span(r, b);
      }
      for (int prev = 0; prev < c; ++prev) {
        double d = 0.0;
        for (int r = 0; r < base.N; ++r) d += aligned(r, prev) * v[r];
        for (int r = 0; r < base.N; ++r) v[r] -= d * aligned(r, prev);
      }
      const double nv = norm(v);
      if (nv < 0.5)
        throw FrameDiscontinuityError(
            "normal_free_trial: normal frame cannot be aligned across neighbors");
      for (int r = 0; r < base.N; ++r) aligned(r, c) = v[r] / nv;
    }
    frames[f] = aligned;
    framed[f] = true;
  }
  if (null_dim <= 0) {
    trial.status = TrialStatus::Degenerate;
    return trial;
  }

  // the section: coefficients fixed at the center, carried by the frame
  const int center_f = pg.order[0];
  Vec coeffs(null_dim, 0.0);
  if (nu_spec.kind == NuSpec::Kind::BasisIndex) {
    if (nu_spec.index < 0 || nu_spec.index >= null_dim)
      throw ConfigError("normal_free_trial: section index out of range");
    coeffs[nu_spec.index] = 1.0;
  } else {
    if (static_cast<int>(nu_spec.target.size()) != base.N)
      throw ConfigError("normal_free_trial: target vector has wrong dimension");
    for (int c = 0; c < null_dim; ++c)
      for (int r = 0; r < base.N; ++r) coeffs[c] += frames[center_f](r, c) * nu_spec.target[r];
    const double cn = norm(coeffs);
    if (cn < 1e-10)
      throw ConfigError("normal_free_trial: target vector is orthogonal to the null bundle");
    coeffs = scaled(coeffs, 1.0 / cn);
  }
  std::vector<Vec> nu(total);
  for (long long f = 0; f < total; ++f) {
    if (!pg.in_ball[f] || !framed[f]) continue;
    Vec v(base.N, 0.0);
    for (int c = 0; c < null_dim; ++c)
      for (int r = 0; r < base.N; ++r) v[r] += coeffs[c] * frames[f](r, c);
    nu[f] = normalized(v);
  }
  trial.direction = nu[center_f];

  // spatial derivative of nu on patch-interior nodes (central where the
  // neighbors exist and are framed)
  auto h_value = [&](const Vec& z) {
    return h_spec.kind == HSpec::Kind::Constant ? h_spec.value
                                                : h_spec.value * (z[h_spec.axis] - center[h_spec.axis]);
  };
  Vec dh(base.n, 0.0);
  if (h_spec.kind == HSpec::Kind::Ramp) dh[h_spec.axis] = h_spec.value;

  std::vector<int> eval_nodes;
  std::vector<Matrix> dnu(total);
  std::vector<int> idx(base.n, 0);
  long long f = 0;
  while (true) {
    bool usable = pg.in_ball[f] && framed[f];
    Matrix d(base.N, base.n);
    if (usable) {
      for (int a = 0; a < base.n && usable; ++a) {
        if (idx[a] == 0 || idx[a] == pg.res - 1) {
          usable = false;
          break;
        }
        std::vector<int> ip = idx, im = idx;
        ++ip[a];
        --im[a];
        const long long fp = pg.flat(ip), fm = pg.flat(im);
        if (!pg.in_ball[fp] || !pg.in_ball[fm] || !framed[fp] || !framed[fm]) {
          usable = false;
          break;
        }
        for (int r = 0; r < base.N; ++r)
          d(r, a) = (nu[fp][r] - nu[fm][r]) / (2.0 * pg.spacing);
      }
    }
    if (usable) {
      dnu[f] = d;
      eval_nodes.push_back(static_cast<int>(f));
    }
    ++f;
    int a = 0;
    while (a < base.n && ++idx[a] == pg.res) idx[a++] = 0;
    if (a == base.n) break;
  }
  if (eval_nodes.empty())
    throw ConfigError("normal_free_trial: no patch node has a full FD stencil");

  // shrink delta until the varied gradient keeps full rank everywhere
  double d_used = delta;
  int shrinks = 0;
  while (true) {
    bool ok = true;
    for (int nf : eval_nodes) {
      const Matrix varied = normal_varied_gradient(
          jets[nf].du, nu[nf], dnu[nf], h_value(pg.points[nf]), dh, d_used);
      if (eps_rank(varied, tau) != base.n) {
        ok = false;
        break;
      }
    }
    if (ok) break;
    d_used *= 0.5;
    if (++shrinks > 80)
      throw DomainViolation("normal_free_trial: could not restore the immersion property");
  }
  trial.delta_used = d_used;

  double base_sup = -1.0, varied_sup = -1.0;
  for (int nf : eval_nodes) {
    base_sup = std::max(base_sup, dilation(jets[nf].du));
    const Matrix varied = normal_varied_gradient(jets[nf].du, nu[nf], dnu[nf],
                                                 h_value(pg.points[nf]), dh, d_used);
    varied_sup = std::max(varied_sup, dilation(varied));
  }
  trial.base_sup = base_sup;
  trial.varied_sup = varied_sup;
  trial.delta_k_inf = varied_sup - base_sup;
  trial.samples = static_cast<long long>(eval_nodes.size()) * 2;
  trial.refine_levels = 1;
  return trial;
}

CounterexampleReport counterexample_report(double gamma, int battery_trials, uint64_t seed) {
  if (gamma <= -1.0) throw ConfigError("counterexample_report: gamma must be > -1");
  CounterexampleReport rep;
  rep.gamma = gamma;
  rep.k_identity = dilation(Matrix::identity(2));
  rep.k_power_closed_form = 2.0 + gamma * gamma / (gamma + 1.0);

  const AnalyticMap power = power_map(gamma);
  // measured sup over a ring sweep of the punctured disc
  double sup = 0.0;
  for (int t = 0; t < 64; ++t) {
    const double r = 0.05 + 0.9 * t / 63.0;
    for (int a = 0; a < 16; ++a) {
      const double th = 6.283185307179586 * a / 16.0;
      sup = std::max(sup, dilation(power.jet({r * std::cos(th), r * std::sin(th)}).du));
    }
  }
  rep.k_power = sup;

  // boundary agreement on the unit circle and collapse at the puncture
  double gap = 0.0;
  for (int a = 0; a < 64; ++a) {
    const double th = 6.283185307179586 * a / 64.0;
    const Vec x{std::cos(th), std::sin(th)};
    const Vec u = power.jet(x).u;
    gap = std::max(gap, norm(sub(u, x)));
  }
  rep.boundary_gap_sup = gap;
  rep.puncture_value = std::pow(1e-6, gamma + 1.0);

  BatteryOptions opts;
  opts.trials = battery_trials;
  opts.seed = seed;
  opts.annulus = true;
  const BatteryResult battery = rank_one_battery(jet_map(power), opts);
  rep.battery_min_delta = battery.min_delta_k;
  rep.battery_trials = battery_trials;
  rep.rank_one_pass = battery.min_delta_k >= -1e-8;

  rep.verdict = rep.rank_one_pass && rep.k_power_closed_form > rep.k_identity
                    ? "rank-one minimal but not minimal among all competitors"
                    : "inconclusive";
  return rep;
}

}  // namespace qcinf
