#include "qcinf/grid.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "qcinf/dilation.hpp"

namespace qcinf {

Grid Grid::box(int n, const std::vector<std::pair<double, double>>& extent, int points) {
  Grid g;
  g.n = n;
  for (int a = 0; a < n; ++a) {
    g.lo[a] = extent[a].first;
    g.hi[a] = extent[a].second;
    g.res[a] = points;
  }
  if (n == 2) g.res[2] = 1;
  g.validate();
  return g;
}

void Grid::validate() const {
  if (n != 2 && n != 3) throw ConfigError("grid: n must be 2 or 3");
  for (int a = 0; a < n; ++a) {
    if (res[a] < 5) throw ConfigError("grid: need at least 5 points per axis");
    if (!(hi[a] > lo[a])) throw ConfigError("grid: extent must be nonempty");
  }
  if (n == 2 && res[2] != 1) throw ConfigError("grid: res[2] must be 1 when n = 2");
}

std::array<int, 3> Grid::unlinear(long long flat) const {
  std::array<int, 3> idx{0, 0, 0};
  idx[0] = static_cast<int>(flat % res[0]);
  flat /= res[0];
  idx[1] = static_cast<int>(flat % res[1]);
  flat /= res[1];
  idx[2] = static_cast<int>(flat);
  return idx;
}

Vec Grid::point(const std::array<int, 3>& idx) const {
  Vec x(n);
  for (int a = 0; a < n; ++a) x[a] = lo[a] + spacing(a) * idx[a];
  return x;
}

bool Grid::in_bounds(const std::array<int, 3>& idx) const {
  for (int a = 0; a < (n == 3 ? 3 : 2); ++a)
    if (idx[a] < 0 || idx[a] >= res[a]) return false;
  return true;
}

Vec MapField::value_at(const std::array<int, 3>& idx) const {
  const long long flat = grid.linear(idx);
  Vec v(N);
  for (int c = 0; c < N; ++c) v[c] = value(flat, c);
  return v;
}

int MapField::stencil_depth(const std::array<int, 3>& idx, int cap) const {
  if (!grid.in_bounds(idx) || mask[grid.linear(idx)] == PointClass::Excluded) return -1;
  const int zr = grid.n == 3 ? 1 : 0;
  for (int r = 1; r <= cap; ++r) {
    for (int dz = -r * zr; dz <= r * zr; ++dz)
      for (int dy = -r; dy <= r; ++dy)
        for (int dx = -r; dx <= r; ++dx) {
          const std::array<int, 3> q{idx[0] + dx, idx[1] + dy, idx[2] + dz};
          if (!grid.in_bounds(q) || mask[grid.linear(q)] == PointClass::Excluded)
            return r - 1;
        }
  }
  return cap;
}

MapField sample_map(const AnalyticMap& map, const Grid& grid,
                    const std::function<bool(const Vec&)>& exclude) {
  grid.validate();
  if (map.n != grid.n) throw ConfigError("sample_map: map and grid dimension differ");
  MapField f;
  f.grid = grid;
  f.N = map.N;
  f.values.assign(static_cast<size_t>(grid.num_points()) * map.N, 0.0);
  f.mask.assign(static_cast<size_t>(grid.num_points()), PointClass::Interior);

  const int nz = grid.n == 3 ? grid.res[2] : 1;
  for (int k = 0; k < nz; ++k)
    for (int j = 0; j < grid.res[1]; ++j)
      for (int i = 0; i < grid.res[0]; ++i) {
        const std::array<int, 3> idx{i, j, k};
        const long long flat = grid.linear(idx);
        const Vec x = grid.point(idx);
        if (exclude && exclude(x)) {
          f.mask[flat] = PointClass::Excluded;
          continue;
        }
        if (!map.in_domain(x)) {
          std::ostringstream os;
          os << "sample_map: grid point (";
          for (size_t a = 0; a < x.size(); ++a) os << (a ? "," : "") << x[a];
          os << ") is outside the domain of '" << map.name << "' (" << map.domain_desc << ")";
          throw ConfigError(os.str());
        }
        const Jet2 jet = map.jet(x);
        for (int c = 0; c < map.N; ++c) f.value(flat, c) = jet.u[c];
      }
  refresh_field_classes(f);
  return f;
}

bool refresh_field_classes(MapField& field, double tau) {
  const Grid& g = field.grid;
  for (long long f = 0; f < g.num_points(); ++f) {
    if (field.mask[f] == PointClass::Excluded) continue;
    for (int c = 0; c < field.N; ++c)
      if (!std::isfinite(field.value(f, c)))
        throw ConfigError("field: non-finite value at a domain point");
  }
  const int nz = g.n == 3 ? g.res[2] : 1;
  const int zr = g.n == 3 ? 1 : 0;
  // pass 1: boundary = non-excluded point on the rim of the usable set
  for (int k = 0; k < nz; ++k)
    for (int j = 0; j < g.res[1]; ++j)
      for (int i = 0; i < g.res[0]; ++i) {
        const std::array<int, 3> idx{i, j, k};
        const long long flat = g.linear(idx);
        if (field.mask[flat] == PointClass::Excluded) continue;
        bool rim = false;
        for (int dz = -zr; dz <= zr && !rim; ++dz)
          for (int dy = -1; dy <= 1 && !rim; ++dy)
            for (int dx = -1; dx <= 1 && !rim; ++dx) {
              const std::array<int, 3> q{i + dx, j + dy, k + dz};
              if (!g.in_bounds(q) || field.mask[g.linear(q)] == PointClass::Excluded)
                rim = true;
            }
        field.mask[flat] = rim ? PointClass::Boundary : PointClass::Interior;
      }
  // pass 2: immersion flag from first differences at interior points
  field.immersion_tau = tau;
  field.immersion_flag = true;
  for (int k = 0; k < nz && field.immersion_flag; ++k)
    for (int j = 0; j < g.res[1] && field.immersion_flag; ++j)
      for (int i = 0; i < g.res[0] && field.immersion_flag; ++i) {
        const std::array<int, 3> idx{i, j, k};
        if (field.mask[g.linear(idx)] != PointClass::Interior) continue;
        const Matrix du = gradient_from_field(field, idx);
        if (eps_rank(du, tau) != g.n) field.immersion_flag = false;
      }
  return field.immersion_flag;
}

Matrix gradient_from_field(const MapField& field, const std::array<int, 3>& idx) {
  const Grid& g = field.grid;
  if (field.stencil_depth(idx, 1) < 1)
    throw StencilOutOfDomain("gradient_from_field: first-difference stencil leaves the domain");
  Matrix du(field.N, g.n);
  for (int a = 0; a < g.n; ++a) {
    std::array<int, 3> p = idx, m = idx;
    ++p[a];
    --m[a];
    const long long fp = g.linear(p), fm = g.linear(m);
    const double inv = 1.0 / (2.0 * g.spacing(a));
    for (int c = 0; c < field.N; ++c) du(c, a) = (field.value(fp, c) - field.value(fm, c)) * inv;
  }
  return du;
}

Jet2 jet_from_field(const MapField& field, const std::array<int, 3>& idx) {
  const Grid& g = field.grid;
  if (field.stencil_depth(idx, 2) < 2)
    throw StencilOutOfDomain("jet_from_field: second-order jets need two clear cells around the point");
  Jet2 j;
  j.x = g.point(idx);
  j.u = field.value_at(idx);
  j.du = gradient_from_field(field, idx);
  j.d2u = Tensor({field.N, g.n, g.n});
  const long long f0 = g.linear(idx);
  for (int a = 0; a < g.n; ++a) {
    std::array<int, 3> p = idx, m = idx;
    ++p[a];
    --m[a];
    const long long fp = g.linear(p), fm = g.linear(m);
    const double inv = 1.0 / (g.spacing(a) * g.spacing(a));
    for (int c = 0; c < field.N; ++c)
      j.d2u(c, a, a) =
          (field.value(fp, c) - 2.0 * field.value(f0, c) + field.value(fm, c)) * inv;
  }
  for (int a = 0; a < g.n; ++a)
    for (int b = a + 1; b < g.n; ++b) {
      std::array<int, 3> pp = idx, pm = idx, mp = idx, mm = idx;
      ++pp[a]; ++pp[b];
      ++pm[a]; --pm[b];
      --mp[a]; ++mp[b];
      --mm[a]; --mm[b];
      const double inv = 1.0 / (4.0 * g.spacing(a) * g.spacing(b));
      for (int c = 0; c < field.N; ++c) {
        const double v = (field.value(g.linear(pp), c) - field.value(g.linear(pm), c) -
                          field.value(g.linear(mp), c) + field.value(g.linear(mm), c)) * inv;
        j.d2u(c, a, b) = v;
        j.d2u(c, b, a) = v;
      }
    }
  return j;
}

std::vector<std::array<int, 3>> quadrature_cells(const MapField& field) {
  const Grid& g = field.grid;
  const int nz = g.n == 3 ? g.res[2] - 1 : 1;
  std::vector<std::array<int, 3>> cells;
  for (int k = 0; k < nz; ++k)
    for (int j = 0; j + 1 < g.res[1]; ++j)
      for (int i = 0; i + 1 < g.res[0]; ++i) {
        bool usable = true;
        for (int dz = 0; dz <= (g.n == 3 ? 1 : 0) && usable; ++dz)
          for (int dy = 0; dy <= 1 && usable; ++dy)
            for (int dx = 0; dx <= 1 && usable; ++dx)
              if (field.mask[g.linear({i + dx, j + dy, k + dz})] == PointClass::Excluded)
                usable = false;
        if (usable) cells.push_back({i, j, k});
      }
  return cells;
}

Matrix cell_gradient(const MapField& field, const std::array<int, 3>& cell) {
  const Grid& g = field.grid;
  const int corners_z = g.n == 3 ? 2 : 1;
  Matrix du(field.N, g.n);
  // average, over the cell's corner pairs, of the first difference
  // along each axis: second-order at the cell midpoint
  const double pairs = g.n == 3 ? 4.0 : 2.0;
  for (int dz = 0; dz < corners_z; ++dz)
    for (int dy = 0; dy < 2; ++dy)
      for (int dx = 0; dx < 2; ++dx) {
        const long long f = g.linear({cell[0] + dx, cell[1] + dy, cell[2] + dz});
        for (int c = 0; c < field.N; ++c) {
          const double v = field.value(f, c);
          du(c, 0) += (dx ? 1.0 : -1.0) * v;
          du(c, 1) += (dy ? 1.0 : -1.0) * v;
          if (g.n == 3) du(c, 2) += (dz ? 1.0 : -1.0) * v;
        }
      }
  for (int a = 0; a < g.n; ++a) {
    const double inv = 1.0 / (pairs * g.spacing(a));
    for (int c = 0; c < field.N; ++c) du(c, a) *= inv;
  }
  return du;
}

LpNorms lp_norm_of_dilation(const MapField& field, double p) {
  if (!(p >= 1.0)) throw PreconditionError("lp_norm_of_dilation: p must be >= 1 (or inf)");
  const Grid& g = field.grid;

  // the sup is taken over interior points
  double sup = 0.0;
  long long points = 0;
  const int nz = g.n == 3 ? g.res[2] : 1;
  for (int k = 0; k < nz; ++k)
    for (int j = 0; j < g.res[1]; ++j)
      for (int i = 0; i < g.res[0]; ++i) {
        const std::array<int, 3> idx{i, j, k};
        if (field.mask[g.linear(idx)] != PointClass::Interior) continue;
        try {
          sup = std::max(sup, dilation(gradient_from_field(field, idx)));
          ++points;
        } catch (const DomainViolation&) {
          std::ostringstream os;
          const Vec x = g.point(idx);
          os << "lp_norm_of_dilation: S+ violated at grid index (" << i << "," << j;
          if (g.n == 3) os << "," << k;
          os << "), point (";
          for (size_t a = 0; a < x.size(); ++a) os << (a ? "," : "") << x[a];
          os << ")";
          throw DomainViolation(os.str());
        }
      }
  LpNorms out;
  out.sup = sup;
  if (std::isinf(p)) {
    out.points = points;
    out.raw_integral = sup;
    out.normalized = sup;
    return out;
  }

  // midpoint rule over cells for the integral forms
  const auto cells = quadrature_cells(field);
  out.points = static_cast<long long>(cells.size());
  if (cells.empty()) return out;
  std::vector<double> ks;
  ks.reserve(cells.size());
  double kmax = 0.0;
  for (const auto& cell : cells) {
    const Matrix du = cell_gradient(field, cell);
    if (!in_splus(du)) {
      std::ostringstream os;
      os << "lp_norm_of_dilation: S+ violated at cell (" << cell[0] << "," << cell[1];
      if (g.n == 3) os << "," << cell[2];
      os << ")";
      throw DomainViolation(os.str());
    }
    ks.push_back(dilation(du));
    kmax = std::max(kmax, ks.back());
  }
  double cellvol = 1.0;
  for (int a = 0; a < g.n; ++a) cellvol *= g.spacing(a);
  // scale by the max so the mean of (K/Kmax)^p stays representable
  double mean_scaled = 0.0;
  for (double v : ks) mean_scaled += std::pow(v / kmax, p);
  mean_scaled /= static_cast<double>(ks.size());
  out.normalized = kmax * std::pow(mean_scaled, 1.0 / p);
  const double log_raw = p * std::log(kmax) + std::log(mean_scaled * ks.size() * cellvol);
  out.raw_integral = log_raw > 709.0 ? std::numeric_limits<double>::infinity()
                                     : std::exp(log_raw);
  return out;
}

DivergenceField q_p_divergence_discrete(const MapField& field, double p) {
  if (!(p >= 1.0)) throw PreconditionError("q_p_divergence_discrete: p must be >= 1");
  const Grid& g = field.grid;
  for (int a = 0; a < g.n; ++a)
    if (g.res[a] < 5) throw ConfigError("q_p_divergence_discrete: grid too small");
  const int nz = g.n == 3 ? g.res[2] : 1;
  const long long total = g.num_points();

  // flux K^{p-1} K_P at every depth >= 1 point
  std::vector<double> flux(static_cast<size_t>(total) * field.N * g.n, 0.0);
  std::vector<uint8_t> has_flux(static_cast<size_t>(total), 0);
  for (int k = 0; k < nz; ++k)
    for (int j = 0; j < g.res[1]; ++j)
      for (int i = 0; i < g.res[0]; ++i) {
        const std::array<int, 3> idx{i, j, k};
        const long long flat = g.linear(idx);
        if (field.stencil_depth(idx, 1) < 1) continue;
        const Matrix du = gradient_from_field(field, idx);
        const double kv = dilation(du);
        if ((p - 1.0) * std::log(kv) > 700.0)
          throw DomainViolation("q_p_divergence_discrete: K^{p-1} overflows at this p");
        const double kpow = std::pow(kv, p - 1.0);
        const Matrix kp = dilation_gradient(du);
        for (int c = 0; c < field.N; ++c)
          for (int a = 0; a < g.n; ++a)
            flux[(flat * field.N + c) * g.n + a] = kpow * kp(c, a);
        has_flux[flat] = 1;
      }

  DivergenceField out;
  out.values.assign(static_cast<size_t>(total) * field.N, 0.0);
  out.evaluated.assign(static_cast<size_t>(total), 0);
  for (int k = 0; k < nz; ++k)
    for (int j = 0; j < g.res[1]; ++j)
      for (int i = 0; i < g.res[0]; ++i) {
        const std::array<int, 3> idx{i, j, k};
        if (field.stencil_depth(idx, 2) < 2) continue;
        const long long flat = g.linear(idx);
        bool ok = true;
        Vec div(field.N, 0.0);
        for (int a = 0; a < g.n && ok; ++a) {
          std::array<int, 3> pp = idx, mm = idx;
          ++pp[a];
          --mm[a];
          const long long fp = g.linear(pp), fm = g.linear(mm);
          if (!has_flux[fp] || !has_flux[fm]) {
            ok = false;
            break;
          }
          const double inv = 1.0 / (2.0 * g.spacing(a));
          for (int c = 0; c < field.N; ++c)
            div[c] += (flux[(fp * field.N + c) * g.n + a] -
                       flux[(fm * field.N + c) * g.n + a]) * inv;
        }
        if (!ok) continue;
        for (int c = 0; c < field.N; ++c) out.values[flat * field.N + c] = div[c];
        out.evaluated[flat] = 1;
      }
  return out;
}

// -- serialization -----------------------------------------------------------

namespace {

std::string fmt17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void save_field_csv(const MapField& field, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("save_field_csv: cannot open " + path);
  const Grid& g = field.grid;
  out << "# qcinf field csv schema 1\n";
  out << "# n " << g.n << "\n# N " << field.N << "\n";
  out << "# extents";
  for (int a = 0; a < g.n; ++a) out << " " << fmt17(g.lo[a]) << " " << fmt17(g.hi[a]);
  out << "\n# resolution";
  for (int a = 0; a < g.n; ++a) out << " " << g.res[a];
  out << "\n";
  out << "i,j";
  if (g.n == 3) out << ",k";
  out << ",x,y";
  if (g.n == 3) out << ",z";
  out << ",class";
  for (int c = 0; c < field.N; ++c) out << ",u" << c;
  out << "\n";
  const int nz = g.n == 3 ? g.res[2] : 1;
  for (int k = 0; k < nz; ++k)
    for (int j = 0; j < g.res[1]; ++j)
      for (int i = 0; i < g.res[0]; ++i) {
        const std::array<int, 3> idx{i, j, k};
        const long long flat = g.linear(idx);
        const Vec x = g.point(idx);
        out << i << "," << j;
        if (g.n == 3) out << "," << k;
        for (int a = 0; a < g.n; ++a) out << "," << fmt17(x[a]);
        out << "," << static_cast<int>(field.mask[flat]);
        for (int c = 0; c < field.N; ++c) out << "," << fmt17(field.value(flat, c));
        out << "\n";
      }
}

MapField load_field_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("load_field_csv: cannot open " + path);
  MapField f;
  Grid& g = f.grid;
  std::string line;
  int n = 0, bigN = 0;
  bool have_extents = false, have_res = false;
  while (std::getline(in, line)) {
    if (line.rfind("# n ", 0) == 0) {
      n = std::stoi(line.substr(4));
      g.n = n;
    } else if (line.rfind("# N ", 0) == 0) {
      bigN = std::stoi(line.substr(4));
    } else if (line.rfind("# extents", 0) == 0) {
      std::istringstream is(line.substr(9));
      for (int a = 0; a < n; ++a) is >> g.lo[a] >> g.hi[a];
      have_extents = true;
    } else if (line.rfind("# resolution", 0) == 0) {
      std::istringstream is(line.substr(12));
      for (int a = 0; a < n; ++a) is >> g.res[a];
      if (n == 2) g.res[2] = 1;
      have_res = true;
    } else if (!line.empty() && line[0] != '#') {
      break;  // column header line reached
    }
  }
  if (n == 0 || bigN == 0 || !have_extents || !have_res)
    throw ConfigError("load_field_csv: missing metadata header in " + path);
  g.validate();
  f.N = bigN;
  f.values.assign(static_cast<size_t>(g.num_points()) * bigN, 0.0);
  f.mask.assign(static_cast<size_t>(g.num_points()), PointClass::Excluded);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream is(line);
    std::string tok;
    auto next = [&]() {
      if (!std::getline(is, tok, ',')) throw ConfigError("load_field_csv: short row");
      return tok;
    };
    std::array<int, 3> idx{0, 0, 0};
    idx[0] = std::stoi(next());
    idx[1] = std::stoi(next());
    if (n == 3) idx[2] = std::stoi(next());
    for (int a = 0; a < n; ++a) next();  // coordinates are derived; skip
    const int cls = std::stoi(next());
    const long long flat = g.linear(idx);
    f.mask[flat] = static_cast<PointClass>(cls);
    for (int c = 0; c < bigN; ++c) f.value(flat, c) = std::strtod(next().c_str(), nullptr);
  }
  refresh_field_classes(f);
  return f;
}

void save_field_json(const MapField& field, const std::string& path) {
  nlohmann::json j;
  j["schema"] = 1;
  j["n"] = field.grid.n;
  j["N"] = field.N;
  auto extents = nlohmann::json::array();
  auto resolution = nlohmann::json::array();
  for (int a = 0; a < field.grid.n; ++a) {
    extents.push_back({field.grid.lo[a], field.grid.hi[a]});
    resolution.push_back(field.grid.res[a]);
  }
  j["extents"] = extents;
  j["resolution"] = resolution;
  j["mask"] = nlohmann::json::array();
  for (PointClass c : field.mask) j["mask"].push_back(static_cast<int>(c));
  j["values"] = field.values;
  std::ofstream out(path);
  if (!out) throw ConfigError("save_field_json: cannot open " + path);
  out << j.dump() << "\n";
}

MapField load_field_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("load_field_json: cannot open " + path);
  nlohmann::json j;
  in >> j;
  if (j.value("schema", 0) != 1) throw ConfigError("load_field_json: unsupported schema");
  MapField f;
  f.grid.n = j.at("n").get<int>();
  f.N = j.at("N").get<int>();
  for (int a = 0; a < f.grid.n; ++a) {
    f.grid.lo[a] = j.at("extents")[a][0].get<double>();
    f.grid.hi[a] = j.at("extents")[a][1].get<double>();
    f.grid.res[a] = j.at("resolution")[a].get<int>();
  }
  if (f.grid.n == 2) f.grid.res[2] = 1;
  f.grid.validate();
  f.values = j.at("values").get<std::vector<double>>();
  f.mask.clear();
  for (int v : j.at("mask").get<std::vector<int>>())
    f.mask.push_back(static_cast<PointClass>(v));
  if (f.values.size() != static_cast<size_t>(f.grid.num_points()) * f.N ||
      f.mask.size() != static_cast<size_t>(f.grid.num_points()))
    throw ConfigError("load_field_json: inconsistent array sizes");
  refresh_field_classes(f);
  return f;
}

}  // namespace qcinf
