#include "qcinf/residuals.hpp"

#include <cmath>
#include <limits>

namespace qcinf {

void validate_jet(const Jet2& j, double sym_tol) {
  const int n = j.n(), N = j.N();
  if (static_cast<int>(j.x.size()) != n) throw PreconditionError("jet: x has wrong dimension");
  if (static_cast<int>(j.u.size()) != N) throw PreconditionError("jet: u has wrong dimension");
  if (j.d2u.dims() != std::vector<int>{N, n, n})
    throw PreconditionError("jet: Hessian has wrong shape");
  const double scale = std::max(1e-300, max_abs(j.d2u));
  for (int b = 0; b < N; ++b)
    for (int i = 0; i < n; ++i)
      for (int k = i + 1; k < n; ++k)
        if (std::fabs(j.d2u(b, i, k) - j.d2u(b, k, i)) > sym_tol * scale)
          throw PreconditionError("jet: Hessian not symmetric in its spatial slots");
}

void symmetrize_hessian(Tensor& d2u) {
  const int N = d2u.dims()[0], n = d2u.dims()[1];
  for (int b = 0; b < N; ++b)
    for (int i = 0; i < n; ++i)
      for (int k = i + 1; k < n; ++k) {
        const double v = 0.5 * (d2u(b, i, k) + d2u(b, k, i));
        d2u(b, i, k) = d2u(b, k, i) = v;
      }
}

Vec dilation_gradient_of_k(const Jet2& j) {
  const Matrix kp = dilation_gradient(j.du);
  const int n = j.n(), N = j.N();
  Vec dk(n, 0.0);
  for (int i = 0; i < n; ++i) {
    double s = 0.0;
    for (int b = 0; b < N; ++b)
      for (int l = 0; l < n; ++l) s += kp(b, l) * j.d2u(b, i, l);
    dk[i] = s;
  }
  return dk;
}

Vec tangential_residual(const Jet2& j) {
  const Matrix kp = dilation_gradient(j.du);
  const int n = j.n(), N = j.N();
  Vec dk(n, 0.0);
  for (int i = 0; i < n; ++i)
    for (int b = 0; b < N; ++b)
      for (int l = 0; l < n; ++l) dk[i] += kp(b, l) * j.d2u(b, i, l);
  return kp * dk;
}

Vec hessian_contract_d2u(const Tensor& k_pp, const Tensor& d2u) {
  const Tensor r = contract_last(k_pp, d2u, 3);
  return r.data();
}

Vec normal_residual(const Jet2& j, double tau) {
  const Tensor kpp = dilation_hessian_reduced(j.du);
  const Vec contracted = hessian_contract_d2u(kpp, j.d2u);
  return dilation_gradient_projections(j.du, tau).proj_null * contracted;
}

ResidualBundle q_infinity_residual(const Jet2& j, double tau, bool k_weighted) {
  ResidualBundle b;
  b.dilation_value = dilation(j.du);
  b.tangential = tangential_residual(j);
  b.normal = normal_residual(j, tau);
  b.k_weighted = k_weighted;
  b.q_infinity = add(b.tangential, scaled(b.normal, k_weighted ? b.dilation_value : 1.0));
  return b;
}

Vec q_p_expanded(const Jet2& j, double p, bool rescaled) {
  if (p < 2.0) throw PreconditionError("q_p_expanded: p must be >= 2");
  const double k = dilation(j.du);
  const Vec tang = tangential_residual(j);
  const Tensor kpp_fd = dilation_hessian_fd(j.du);
  const Vec hess = hessian_contract_d2u(kpp_fd, j.d2u);
  // rescaled form of the expanded system: tangential + K/(p-1) * K_PP : D^2u
  Vec r = add(tang, scaled(hess, k / (p - 1.0)));
  if (rescaled) return r;
  // raw form = (p-1) K^{p-2} * rescaled; apply the factor per component
  // in log scale so large p cannot overflow silently
  const double log_factor = std::log(p - 1.0) + (p - 2.0) * std::log(k);
  Vec out(r.size(), 0.0);
  for (size_t i = 0; i < r.size(); ++i) {
    if (r[i] == 0.0) continue;
    const double lf = log_factor + std::log(std::fabs(r[i]));
    if (lf > 709.0)
      throw DomainViolation("q_p_expanded: (p-1) K^{p-2} overflows; request the rescaled form");
    out[i] = (r[i] > 0.0 ? 1.0 : -1.0) * std::exp(lf);
  }
  return out;
}

Vec infinity_laplacian_residual(const Jet2& j, double tau) {
  const int n = j.n(), N = j.N();
  const Matrix& du = j.du;
  Vec w(n, 0.0);  // w_i = D_l u_b D^2_{il} u_b
  for (int i = 0; i < n; ++i)
    for (int b = 0; b < N; ++b)
      for (int l = 0; l < n; ++l) w[i] += du(b, l) * j.d2u(b, i, l);
  Vec out = du * w;
  Vec lap(N, 0.0);
  for (int b = 0; b < N; ++b)
    for (int i = 0; i < n; ++i) lap[b] += j.d2u(b, i, i);
  const double du2 = frob_dot(du, du);
  const Vec nrm = projections(du, tau).proj_null * lap;
  axpy(out, du2, nrm);
  return out;
}

Vec a_infinity_residual(const Jet2& j, const Hamiltonian& h, double tau) {
  const int n = j.n(), N = j.N();
  const Matrix hp = h.gradient(j.du);
  const double hval = h.value(j.du);

  Vec w(n, 0.0);
  for (int i = 0; i < n; ++i)
    for (int b = 0; b < N; ++b)
      for (int l = 0; l < n; ++l) w[i] += hp(b, l) * j.d2u(b, i, l);
  Vec out = hp * w;

  // H_PP by central differences of the supplied gradient, symmetrized
  // over the pair exchange
  const double step = std::cbrt(std::numeric_limits<double>::epsilon()) *
                      std::max(1.0, frob(j.du));
  Tensor hpp({N, N, n, n});
  Matrix q = j.du;
  for (int b = 0; b < N; ++b)
    for (int jj = 0; jj < n; ++jj) {
      const double saved = q(b, jj);
      q(b, jj) = saved + step;
      const Matrix gp = h.gradient(q);
      q(b, jj) = saved - step;
      const Matrix gm = h.gradient(q);
      q(b, jj) = saved;
      for (int a = 0; a < N; ++a)
        for (int i = 0; i < n; ++i) hpp(a, b, i, jj) = (gp(a, i) - gm(a, i)) / (2.0 * step);
    }
  for (int a = 0; a < N; ++a)
    for (int b = 0; b < N; ++b)
      for (int i = 0; i < n; ++i)
        for (int jj = 0; jj < n; ++jj) {
          if (a * n + i >= b * n + jj) continue;
          const double v = 0.5 * (hpp(a, b, i, jj) + hpp(b, a, jj, i));
          hpp(a, b, i, jj) = v;
          hpp(b, a, jj, i) = v;
        }

  const Vec contracted = hessian_contract_d2u(hpp, j.d2u);
  const Matrix kp_null = (max_abs(hp) == 0.0) ? Matrix::identity(N)
                                              : projections(hp, tau).proj_null;
  axpy(out, hval, kp_null * contracted);
  return out;
}

Vec geometric_tangential(const Jet2& j) {
  const Matrix g = transposed(j.du) * j.du;
  return ahlfors(g) * dilation_gradient_of_k(j);
}

double second_fundamental_contraction(const Matrix& dnu, const Vec& nu, const Jet2& j,
                                      double normal_tol) {
  const Matrix kp = dilation_gradient(j.du);
  Vec ktn(j.n(), 0.0);  // (K_P^T nu)_i
  for (int i = 0; i < j.n(); ++i)
    for (int b = 0; b < j.N(); ++b) ktn[i] += kp(b, i) * nu[b];
  // below its roundoff floor K_P counts as the conformal zero and any
  // section is normal
  const double floor = 1e-13 * dilation_gradient_scale(j.du);
  const double scale = std::max(1e-300, std::max(frob(kp), floor) * norm(nu));
  if (norm(ktn) > normal_tol * scale)
    throw PreconditionError("second_fundamental_contraction: nu is not normal to K_P");
  return frob_dot(dnu, kp);
}

}  // namespace qcinf
