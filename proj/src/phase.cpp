#include "qcinf/phase.hpp"

#include <cmath>
#include <queue>

namespace qcinf {

PointPhase classify_point(const Jet2& j, double tau) {
  const Matrix g = transposed(j.du) * j.du;
  const Matrix s = ahlfors(g);
  const SymmetricEigen eig = symmetric_spectrum(s);
  PointPhase out;
  out.spectrum = eig.eigenvalues;
  double top = 0.0;
  for (double v : eig.eigenvalues) top = std::max(top, std::fabs(v));
  // S(g) is a difference of O(|g|) quantities: below its roundoff
  // floor the point is conformal and the label is 0
  if (top <= 1e-13 * frob(g)) return out;
  for (double v : eig.eigenvalues) {
    const double rel = std::fabs(v) / top;
    if (rel > tau) ++out.label;
    if (rel >= tau && rel < 10.0 * tau) out.uncertain = true;
  }
  return out;
}

namespace {

PhaseMap assemble_phase_map(const Grid& grid, int n,
                            const std::function<bool(const std::array<int, 3>&)>& evaluable,
                            const std::function<Jet2(const std::array<int, 3>&)>& jet_at,
                            double tau, const std::string& provenance) {
  PhaseMap pm;
  pm.grid = grid;
  pm.n = n;
  const long long total = grid.num_points();
  pm.augmented.assign(total, -1);
  pm.interface_mask.assign(total, 0);
  pm.uncertain.assign(total, 0);
  pm.spectra.assign(static_cast<size_t>(total) * n, 0.0);
  pm.dilation_k.assign(total, 0.0);
  pm.provenance = provenance;

  const int nz = grid.n == 3 ? grid.res[2] : 1;
  for (int k = 0; k < nz; ++k)
    for (int j = 0; j < grid.res[1]; ++j)
      for (int i = 0; i < grid.res[0]; ++i) {
        const std::array<int, 3> idx{i, j, k};
        if (!evaluable(idx)) continue;
        const long long flat = grid.linear(idx);
        const Jet2 jet = jet_at(idx);
        const PointPhase pp = classify_point(jet, tau);
        pm.augmented[flat] = static_cast<int8_t>(pp.label);
        pm.uncertain[flat] = pp.uncertain ? 1 : 0;
        for (int c = 0; c < n; ++c) pm.spectra[flat * n + c] = pp.spectrum[c];
        pm.dilation_k[flat] = dilation(jet.du);
      }

  // interface mask: a point is near an interface when its 3^n
  // neighborhood (evaluated points only) carries mixed labels
  const int zr = grid.n == 3 ? 1 : 0;
  for (int k = 0; k < nz; ++k)
    for (int j = 0; j < grid.res[1]; ++j)
      for (int i = 0; i < grid.res[0]; ++i) {
        const std::array<int, 3> idx{i, j, k};
        const long long flat = grid.linear(idx);
        if (pm.augmented[flat] < 0) continue;
        bool mixed = false;
        for (int dz = -zr; dz <= zr && !mixed; ++dz)
          for (int dy = -1; dy <= 1 && !mixed; ++dy)
            for (int dx = -1; dx <= 1 && !mixed; ++dx) {
              const std::array<int, 3> q{i + dx, j + dy, k + dz};
              if (!grid.in_bounds(q)) continue;
              const int8_t lab = pm.augmented[grid.linear(q)];
              if (lab >= 0 && lab != pm.augmented[flat]) mixed = true;
            }
        pm.interface_mask[flat] = mixed ? 1 : 0;
      }
  return pm;
}

}  // namespace

PhaseMap phase_map(const MapField& field, double tau) {
  return assemble_phase_map(
      field.grid, field.grid.n,
      [&](const std::array<int, 3>& idx) { return field.stencil_depth(idx, 1) >= 1; },
      [&](const std::array<int, 3>& idx) {
        Jet2 j;
        j.x = field.grid.point(idx);
        j.u = field.value_at(idx);
        j.du = gradient_from_field(field, idx);
        j.d2u = Tensor({field.N, field.grid.n, field.grid.n});
        return j;
      },
      tau, "fd-jets");
}

PhaseMap phase_map_analytic(const AnalyticMap& map, const Grid& grid, double tau) {
  if (map.n != grid.n) throw ConfigError("phase_map_analytic: map/grid dimension mismatch");
  return assemble_phase_map(
      grid, grid.n,
      [&](const std::array<int, 3>& idx) { return map.in_domain(grid.point(idx)); },
      [&](const std::array<int, 3>& idx) { return map.jet(grid.point(idx)); }, tau,
      "exact-jets");
}

std::vector<ComponentDilation> constant_dilation_check(const PhaseMap& pm) {
  // components of the two constant-dilation phases: the conformal phase
  // (label 0, K = n pointwise) and the top phase (label n, where
  // solutions of the tangential system have locally constant K)
  const Grid& g = pm.grid;
  const long long total = g.num_points();
  std::vector<int> comp(total, -1);
  std::vector<ComponentDilation> out;
  const int nz = g.n == 3 ? g.res[2] : 1;
  auto eligible = [&](long long flat) {
    const int lab = pm.phase_label(flat);
    return lab == 0 || lab == pm.n;
  };
  int next_id = 0;
  for (int k = 0; k < nz; ++k)
    for (int j = 0; j < g.res[1]; ++j)
      for (int i = 0; i < g.res[0]; ++i) {
        const std::array<int, 3> seed{i, j, k};
        const long long sflat = g.linear(seed);
        if (!eligible(sflat) || comp[sflat] >= 0) continue;
        const int label = pm.phase_label(sflat);
        // axis-connected flood fill within the equal-label region
        std::queue<std::array<int, 3>> frontier;
        frontier.push(seed);
        comp[sflat] = next_id;
        double sum = 0.0, maxk = -1.0, mink = -1.0;
        long long count = 0;
        std::vector<long long> members;
        while (!frontier.empty()) {
          const std::array<int, 3> cur = frontier.front();
          frontier.pop();
          const long long cflat = g.linear(cur);
          const double kv = pm.dilation_k[cflat];
          sum += kv;
          maxk = count == 0 ? kv : std::max(maxk, kv);
          mink = count == 0 ? kv : std::min(mink, kv);
          ++count;
          members.push_back(cflat);
          for (int a = 0; a < g.n; ++a)
            for (int dir = -1; dir <= 1; dir += 2) {
              std::array<int, 3> nb = cur;
              nb[a] += dir;
              if (!g.in_bounds(nb)) continue;
              const long long nflat = g.linear(nb);
              if (comp[nflat] >= 0 || !eligible(nflat)) continue;
              if (pm.phase_label(nflat) != label) continue;
              comp[nflat] = next_id;
              frontier.push(nb);
            }
        }
        ComponentDilation cd;
        cd.component_id = next_id++;
        cd.size = count;
        cd.mean_k = sum / count;
        double dev = 0.0;
        for (long long m : members) dev = std::max(dev, std::fabs(pm.dilation_k[m] - cd.mean_k));
        cd.max_deviation = dev;
        out.push_back(cd);
      }
  return out;
}

InterfaceIdentityReport interface_identity_check(
    const std::function<Jet2(const Vec&)>& jet_source, const CurvePatch& patch, double tau,
    double normal_tol) {
  const int m = static_cast<int>(patch.points.size());
  if (m < 3 || patch.tangents.size() != patch.points.size() || patch.param_step <= 0.0)
    throw ConfigError("interface_identity_check: need >= 3 samples with tangents and a step");

  std::vector<Jet2> jets(m);
  std::vector<Matrix> kp(m), perp(m);
  int rank = -1;
  for (int t = 0; t < m; ++t) {
    jets[t] = jet_source(patch.points[t]);
    kp[t] = dilation_gradient(jets[t].du);
    const ProjectionPair pr = dilation_gradient_projections(jets[t].du, tau);
    perp[t] = pr.proj_null;
    if (rank < 0) rank = pr.eps_rank;
    if (pr.eps_rank != rank)
      throw RankDriftError("interface_identity_check: eps-rank of K_P drifts along the patch");
  }

  InterfaceIdentityReport rep;
  rep.rank_along_patch = rank;
  rep.max_projection_residual = -1.0;
  const double h = patch.param_step;

  for (int t = 1; t + 1 < m; ++t) {
    const Jet2& j = jets[t];
    const int n = j.n(), bigN = j.N();
    const double speed = norm(patch.tangents[t]);
    if (speed <= 0.0)
      throw ConfigError("interface_identity_check: zero tangent vector");
    const Vec that = scaled(patch.tangents[t], 1.0 / speed);

    // left side: covariant derivative of the projection, contracted
    // with K_P over both slots
    Matrix dperp = perp[t + 1] - perp[t - 1];
    dperp *= 1.0 / (2.0 * h * speed);  // d/d(arclength)
    const Vec kpt = kp[t] * that;      // (K_P t)_beta
    const Vec lhs = dperp * kpt;

    // right side: reduced Hessian against the full and the
    // patch-normal parts of the second derivatives
    const Tensor kpp = dilation_hessian_reduced(j.du);
    const Vec full = hessian_contract_d2u(kpp, j.d2u);
    Matrix ddu = jets[t + 1].du - jets[t - 1].du;
    ddu *= 1.0 / (2.0 * h * speed);
    Tensor wnormal({bigN, n, n});  // (gamma, i, k) = perp-of-M derivative of D_k u_gamma
    for (int c = 0; c < bigN; ++c)
      for (int i = 0; i < n; ++i)
        for (int kk = 0; kk < n; ++kk)
          wnormal(c, i, kk) = j.d2u(c, i, kk) - that[i] * ddu(c, kk);
    const Vec against_normal = hessian_contract_d2u(kpp, wnormal);
    Vec rhs = perp[t] * sub(against_normal, full);

    const double scale = std::max({norm(lhs), norm(rhs), 1e-12});
    rep.max_identity_residual =
        std::max(rep.max_identity_residual, norm(sub(lhs, rhs)) / scale);

    const Vec nres = perp[t] * full;
    rep.max_normal_residual = std::max(rep.max_normal_residual, norm(nres));
    if (norm(nres) <= normal_tol) {
      const Matrix range = Matrix::identity(bigN) - perp[t];
      const double proj_res = norm(range * lhs) / std::max(norm(lhs), 1e-12);
      rep.max_projection_residual = std::max(rep.max_projection_residual, proj_res);
    }
    ++rep.samples;
  }
  return rep;
}

InterfaceIdentityReport interface_identity_check(const MapField& field,
                                                 const CurvePatch& patch, double tau,
                                                 double normal_tol) {
  const Grid& g = field.grid;
  auto snap = [&](const Vec& x) {
    std::array<int, 3> idx{0, 0, 0};
    for (int a = 0; a < g.n; ++a) {
      const double t = (x[a] - g.lo[a]) / g.spacing(a);
      idx[a] = static_cast<int>(std::lround(t));
      if (std::fabs(t - idx[a]) > 1e-6 || idx[a] < 0 || idx[a] >= g.res[a])
        throw ConfigError("interface_identity_check: patch point is not on the grid");
    }
    return idx;
  };
  return interface_identity_check(
      [&](const Vec& x) { return jet_from_field(field, snap(x)); }, patch, tau, normal_tol);
}

}  // namespace qcinf
