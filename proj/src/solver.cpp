#include "qcinf/solver.hpp"

#include <chrono>
#include <cmath>

#include "qcinf/dilation.hpp"
#include "qcinf/rng.hpp"

namespace qcinf {

void SolveConfig::validate() const {
  grid.validate();
  if (p_schedule.empty()) throw ConfigError("solve: empty p schedule");
  double prev = 0.0;
  for (double p : p_schedule) {
    if (p < 2.0) throw ConfigError("solve: every p must be >= 2");
    if (p <= prev) throw ConfigError("solve: p schedule must increase");
    prev = p;
  }
  if (opt.grad_tol <= 0.0 || opt.armijo_c <= 0.0 || opt.ls_shrink <= 0.0 ||
      opt.ls_shrink >= 1.0)
    throw ConfigError("solve: optimizer tolerances must be positive (shrink in (0,1))");
  if (restarts < 0) throw ConfigError("solve: restarts must be >= 0");
}

std::vector<long long> free_nodes(const MapField& field) {
  std::vector<long long> nodes;
  for (long long f = 0; f < field.grid.num_points(); ++f)
    if (field.mask[f] == PointClass::Interior) nodes.push_back(f);
  return nodes;
}

EnergyGradient energy_and_gradient(const MapField& field, double p) {
  if (p < 2.0) throw PreconditionError("energy_and_gradient: p must be >= 2");
  const Grid& g = field.grid;
  const auto cells = quadrature_cells(field);
  const long long m = static_cast<long long>(cells.size());
  if (m == 0) throw ConfigError("energy_and_gradient: no quadrature cells");

  EnergyGradient out;
  std::vector<double> kvals(m);
  std::vector<Matrix> kps(m);
  double kmax = 0.0;
  for (long long qi = 0; qi < m; ++qi) {
    const Matrix du = cell_gradient(field, cells[qi]);
    if (!in_splus(du)) {
      out.finite = false;
      out.energy = std::numeric_limits<double>::infinity();
      out.offending = cells[qi];
      return out;
    }
    kvals[qi] = dilation(du);
    kps[qi] = dilation_gradient(du);
    kmax = std::max(kmax, kvals[qi]);
  }
  double mean_scaled = 0.0;
  for (long long qi = 0; qi < m; ++qi) mean_scaled += std::pow(kvals[qi] / kmax, p);
  mean_scaled /= static_cast<double>(m);
  const double energy = kmax * std::pow(mean_scaled, 1.0 / p);
  out.energy = energy;

  // weights w_q = (K_q / E)^{p-1} / m; bounded by m^{(p-1)/p} < m
  std::vector<double> w(m);
  for (long long qi = 0; qi < m; ++qi)
    w[qi] = std::pow(kvals[qi] / energy, p - 1.0) / static_cast<double>(m);

  // adjoint of the staggered cell-gradient stencil: each cell touches
  // its 2^n corners with sign +1 on the high face of an axis
  std::vector<int> node_index(g.num_points(), -1);
  const std::vector<long long> nodes = free_nodes(field);
  for (size_t ni = 0; ni < nodes.size(); ++ni) node_index[nodes[ni]] = static_cast<int>(ni);
  out.gradient.assign(nodes.size() * field.N, 0.0);
  const int corners_z = g.n == 3 ? 2 : 1;
  const double pairs = g.n == 3 ? 4.0 : 2.0;
  for (long long qi = 0; qi < m; ++qi) {
    const auto& cell = cells[qi];
    for (int dz = 0; dz < corners_z; ++dz)
      for (int dy = 0; dy < 2; ++dy)
        for (int dx = 0; dx < 2; ++dx) {
          const long long f = g.linear({cell[0] + dx, cell[1] + dy, cell[2] + dz});
          const int ni = node_index[f];
          if (ni < 0) continue;  // boundary corner: not a degree of freedom
          for (int c = 0; c < field.N; ++c) {
            double acc = (dx ? 1.0 : -1.0) * kps[qi](c, 0) / (pairs * g.spacing(0));
            acc += (dy ? 1.0 : -1.0) * kps[qi](c, 1) / (pairs * g.spacing(1));
            if (g.n == 3) acc += (dz ? 1.0 : -1.0) * kps[qi](c, 2) / (pairs * g.spacing(2));
            out.gradient[static_cast<size_t>(ni) * field.N + c] += w[qi] * acc;
          }
        }
  }
  return out;
}

double max_qp_residual_rescaled(const MapField& field, double p) {
  const Grid& g = field.grid;
  const int nz = g.n == 3 ? g.res[2] : 1;
  double worst = 0.0;
  for (int k = 0; k < nz; ++k)
    for (int j = 0; j < g.res[1]; ++j)
      for (int i = 0; i < g.res[0]; ++i) {
        const std::array<int, 3> idx{i, j, k};
        if (field.stencil_depth(idx, 2) < 2) continue;
        const double kr = dilation(gradient_from_field(field, idx));
        Vec div(field.N, 0.0);
        for (int a = 0; a < g.n; ++a) {
          std::array<int, 3> qp = idx, qm = idx;
          ++qp[a];
          --qm[a];
          const double inv = 1.0 / (2.0 * g.spacing(a));
          for (const auto& [q, sign] : {std::pair{qp, 1.0}, std::pair{qm, -1.0}}) {
            const Matrix du = gradient_from_field(field, q);
            const double kq = dilation(du);
            const double ratio = std::pow(kq / kr, p - 1.0);
            const Matrix kp = dilation_gradient(du);
            for (int c = 0; c < field.N; ++c) div[c] += sign * ratio * kp(c, a) * inv;
          }
        }
        worst = std::max(worst, kr * norm_inf(div) / (p - 1.0));
      }
  return worst;
}

namespace {

void write_free(MapField& field, const std::vector<long long>& nodes, const Vec& x) {
  for (size_t ni = 0; ni < nodes.size(); ++ni)
    for (int c = 0; c < field.N; ++c) field.value(nodes[ni], c) = x[ni * field.N + c];
}

Vec read_free(const MapField& field, const std::vector<long long>& nodes) {
  Vec x(nodes.size() * field.N);
  for (size_t ni = 0; ni < nodes.size(); ++ni)
    for (int c = 0; c < field.N; ++c) x[ni * field.N + c] = field.value(nodes[ni], c);
  return x;
}

// Gauss-Seidel harmonic extension of the boundary values into the
// interior, per component.
void harmonic_extension(MapField& field) {
  const Grid& g = field.grid;
  const std::vector<long long> nodes = free_nodes(field);
  double scale = 0.0;
  for (long long f = 0; f < g.num_points(); ++f)
    if (field.mask[f] == PointClass::Boundary)
      for (int c = 0; c < field.N; ++c) scale = std::max(scale, std::fabs(field.value(f, c)));
  if (scale == 0.0) scale = 1.0;

  double wsum = 0.0;
  for (int a = 0; a < g.n; ++a) wsum += 2.0 / (g.spacing(a) * g.spacing(a));
  for (int sweep = 0; sweep < 20000; ++sweep) {
    double change = 0.0;
    for (long long node : nodes) {
      const std::array<int, 3> idx = g.unlinear(node);
      for (int c = 0; c < field.N; ++c) {
        double acc = 0.0;
        for (int a = 0; a < g.n; ++a) {
          std::array<int, 3> qp = idx, qm = idx;
          ++qp[a];
          --qm[a];
          acc += (field.value(g.linear(qp), c) + field.value(g.linear(qm), c)) /
                 (g.spacing(a) * g.spacing(a));
        }
        const double next = acc / wsum;
        change = std::max(change, std::fabs(next - field.value(node, c)));
        field.value(node, c) = next;
      }
    }
    if (change < 1e-10 * scale) break;
  }
}

// least-squares affine fit u = A x + b of the boundary data
void affine_fill(MapField& field) {
  const Grid& g = field.grid;
  const int n = g.n, bigN = field.N;
  // normal equations over [x, 1]
  Matrix ata(n + 1, n + 1);
  Matrix atb(n + 1, bigN);
  for (long long f = 0; f < g.num_points(); ++f) {
    if (field.mask[f] != PointClass::Boundary) continue;
    const Vec x = g.point(g.unlinear(f));
    Vec row(n + 1, 1.0);
    for (int a = 0; a < n; ++a) row[a] = x[a];
    for (int r = 0; r <= n; ++r) {
      for (int c = 0; c <= n; ++c) ata(r, c) += row[r] * row[c];
      for (int c = 0; c < bigN; ++c) atb(r, c) += row[r] * field.value(f, c);
    }
  }
  const Matrix coef = inverse(ata) * atb;  // (n+1) x N
  for (long long f = 0; f < g.num_points(); ++f) {
    if (field.mask[f] != PointClass::Interior) continue;
    const Vec x = g.point(g.unlinear(f));
    for (int c = 0; c < bigN; ++c) {
      double v = coef(n, c);
      for (int a = 0; a < n; ++a) v += coef(a, c) * x[a];
      field.value(f, c) = v;
    }
  }
}

struct StageOutcome {
  int iterations = 0;
  int ls_failures = 0;
  bool converged = false;
  bool monotone = true;
};

StageOutcome minimize_stage(MapField& field, double p, const OptimizerConfig& opt,
                            const std::string& stall_dump_path) {
  const std::vector<long long> nodes = free_nodes(field);
  Vec x = read_free(field, nodes);
  EnergyGradient eg = energy_and_gradient(field, p);
  if (!eg.finite)
    throw InitializationError("solve: stage started outside S+");

  StageOutcome outcome;
  std::vector<Vec> s_hist, y_hist;  // L-BFGS memory
  Vec prev_x, prev_g;

  for (int iter = 0; iter < opt.max_iters; ++iter) {
    const double gnorm = norm_inf(eg.gradient);
    if (gnorm <= opt.grad_tol) {
      outcome.converged = true;
      break;
    }
    // direction
    Vec dir = scaled(eg.gradient, -1.0);
    if (opt.lbfgs_memory > 0 && !s_hist.empty()) {
      // two-loop recursion
      Vec q = eg.gradient;
      const int hm = static_cast<int>(s_hist.size());
      Vec alpha(hm, 0.0);
      for (int h = hm - 1; h >= 0; --h) {
        const double rho = 1.0 / dot(y_hist[h], s_hist[h]);
        alpha[h] = rho * dot(s_hist[h], q);
        axpy(q, -alpha[h], y_hist[h]);
      }
      const double gamma =
          dot(s_hist.back(), y_hist.back()) / dot(y_hist.back(), y_hist.back());
      q = scaled(q, gamma);
      for (int h = 0; h < hm; ++h) {
        const double rho = 1.0 / dot(y_hist[h], s_hist[h]);
        const double beta = rho * dot(y_hist[h], q);
        axpy(q, alpha[h] - beta, s_hist[h]);
      }
      dir = scaled(q, -1.0);
      if (dot(dir, eg.gradient) >= 0.0) dir = scaled(eg.gradient, -1.0);
    }

    const double slope = dot(eg.gradient, dir);
    double t = 1.0;
    bool accepted = false;
    bool saw_infinite = false;
    double new_energy = 0.0;
    EnergyGradient next;
    for (int bt = 0; bt <= opt.max_backtracks; ++bt) {
      Vec cand = x;
      axpy(cand, t, dir);
      write_free(field, nodes, cand);
      next = energy_and_gradient(field, p);
      if (next.finite) {
        new_energy = next.energy;
        if (new_energy <= eg.energy + opt.armijo_c * t * slope) {
          x = cand;
          accepted = true;
          break;
        }
      } else {
        saw_infinite = true;
      }
      t *= opt.ls_shrink;
    }
    if (!accepted) {
      write_free(field, nodes, x);  // restore the last good state
      ++outcome.ls_failures;
      if (saw_infinite) {
        if (!stall_dump_path.empty()) save_field_json(field, stall_dump_path);
        throw SolverStallError(
            "solve: line search exhausted against the S+ barrier (state dumped)");
      }
      break;  // flat to machine precision; treat the stage as finished
    }
    if (new_energy > eg.energy) outcome.monotone = false;
    if (opt.lbfgs_memory > 0) {
      if (!prev_x.empty()) {
        Vec s = sub(x, prev_x);
        Vec y = sub(next.gradient, prev_g);
        if (dot(s, y) > 1e-14) {
          s_hist.push_back(std::move(s));
          y_hist.push_back(std::move(y));
          if (static_cast<int>(s_hist.size()) > opt.lbfgs_memory) {
            s_hist.erase(s_hist.begin());
            y_hist.erase(y_hist.begin());
          }
        }
      }
      prev_x = x;
      prev_g = next.gradient;
    }
    eg = std::move(next);
    ++outcome.iterations;
  }
  write_free(field, nodes, x);
  return outcome;
}

MapField build_boundary_field(const SolveConfig& config) {
  if (!config.boundary_file.empty()) {
    MapField f = config.boundary_file.size() > 5 &&
                         config.boundary_file.substr(config.boundary_file.size() - 5) ==
                             ".json"
                     ? load_field_json(config.boundary_file)
                     : load_field_csv(config.boundary_file);
    if (f.grid.n != config.grid.n) throw ConfigError("solve: boundary file dimension mismatch");
    return f;
  }
  const AnalyticMap map = make_map(config.boundary_map, config.boundary_params);
  std::function<bool(const Vec&)> exclude = nullptr;
  if (config.hole_box.has_value()) {
    const auto box = *config.hole_box;
    const int n = config.grid.n;
    exclude = [box, n](const Vec& x) {
      for (int a = 0; a < n; ++a)
        if (!(x[a] > box[2 * a] && x[a] < box[2 * a + 1])) return false;
      return true;
    };
  }
  return sample_map(map, config.grid, exclude);
}

}  // namespace

SolveResult solve(const SolveConfig& config) {
  config.validate();
  SolveResult best;
  bool have_best = false;

  for (int restart = 0; restart <= config.restarts; ++restart) {
    MapField field = build_boundary_field(config);

    // initializer: harmonic extension of the Dirichlet data
    harmonic_extension(field);
    if (config.jitter > 0.0 && restart > 0) {
      Rng rng(config.seed + 7717 * static_cast<uint64_t>(restart));
      for (long long node : free_nodes(field))
        for (int c = 0; c < field.N; ++c)
          field.value(node, c) += config.jitter * rng.gaussian();
    }
    if (!refresh_field_classes(field, config.tau)) {
      affine_fill(field);
      if (!refresh_field_classes(field, config.tau))
        throw InitializationError(
            "solve: neither the harmonic extension nor the affine fit is an immersion");
    }

    SolveResult result;
    result.restart_used = restart;

    if (config.selftest) {
      result.selftest_ran = true;
      Rng rng(config.seed ^ 0xabcdef12345ULL);
      const std::vector<long long> nodes = free_nodes(field);
      double hmin = 1e300;
      for (int a = 0; a < config.grid.n; ++a) hmin = std::min(hmin, config.grid.spacing(a));
      for (int s = 0; s < 20; ++s) {
        MapField probe = field;  // a fresh random state near the initializer
        Vec x0 = read_free(probe, nodes);
        // keep the induced gradient perturbation O(2%) so the probes
        // stay well inside S+
        for (double& v : x0) v += 0.02 * hmin * rng.gaussian();
        write_free(probe, nodes, x0);
        const double p = config.p_schedule.front();
        const EnergyGradient eg = energy_and_gradient(probe, p);
        if (!eg.finite || norm(eg.gradient) == 0.0) continue;
        // probe along a direction with a guaranteed gradient component,
        // blended with noise so every entry of the adjoint is exercised
        Vec d = scaled(eg.gradient, 0.7 / norm(eg.gradient));
        Vec r(x0.size());
        for (double& v : r) v = rng.gaussian();
        axpy(d, 0.3 / norm(r), r);
        d = scaled(d, 1.0 / norm(d));
        const double t = 1e-5;
        Vec xp = x0, xm = x0;
        axpy(xp, t, d);
        axpy(xm, -t, d);
        write_free(probe, nodes, xp);
        const EnergyGradient ep = energy_and_gradient(probe, p);
        write_free(probe, nodes, xm);
        const EnergyGradient em = energy_and_gradient(probe, p);
        if (!ep.finite || !em.finite) continue;
        const double fd = (ep.energy - em.energy) / (2.0 * t);
        const double an = dot(eg.gradient, d);
        const double rel = std::fabs(fd - an) / std::max(1e-12, std::fabs(fd));
        result.selftest_max_rel = std::max(result.selftest_max_rel, rel);
      }
      result.selftest_pass = result.selftest_max_rel <= 1e-6;
    }

    for (double p : config.p_schedule) {
      StageDiagnostics diag;
      diag.p = p;
      const auto t0 = std::chrono::steady_clock::now();
      {
        const LpNorms pre = lp_norm_of_dilation(field, p);
        diag.start_sup_k = pre.sup;
      }
      const StageOutcome outcome =
          minimize_stage(field, p, config.opt, config.stall_dump_path);
      diag.iterations = outcome.iterations;
      diag.ls_failures = outcome.ls_failures;
      diag.converged = outcome.converged;
      diag.energy_monotone = outcome.monotone;
      const LpNorms norms = lp_norm_of_dilation(field, p);
      diag.energy = norms.normalized;
      diag.sup_k = norms.sup;
      double mean = 0.0, m2 = 0.0;
      {
        // variance of K over quadrature points
        std::vector<double> ks;
        for (long long f = 0; f < field.grid.num_points(); ++f)
          if (field.mask[f] == PointClass::Interior)
            ks.push_back(dilation(gradient_from_field(field, field.grid.unlinear(f))));
        for (double v : ks) mean += v;
        mean /= static_cast<double>(ks.size());
        for (double v : ks) m2 += (v - mean) * (v - mean);
        diag.variance_k = m2 / static_cast<double>(ks.size());
      }
      diag.max_qp_rescaled = max_qp_residual_rescaled(field, p);
      if (config.record_timings) {
        const auto t1 = std::chrono::steady_clock::now();
        diag.wall_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
      }
      result.stages.push_back(diag);
    }
    result.field = std::move(field);

    if (!have_best || result.stages.back().energy <
                          best.stages.back().energy) {
      best = std::move(result);
      have_best = true;
    }
  }
  return best;
}

}  // namespace qcinf
