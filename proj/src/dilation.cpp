#include "qcinf/dilation.hpp"

#include <atomic>
#include <cmath>
#include <limits>

namespace qcinf {

namespace {

std::atomic<bool> g_e_tensor_fault{false};

struct SplusData {
  Matrix g;        // P^T P
  Matrix g_inv;
  double det_g;
  double det_root; // det(g)^{1/n}
  double p2;       // |P|^2
};

SplusData splus_data(const Matrix& p) {
  const int n = p.cols();
  SplusData d;
  d.g = transposed(p) * p;
  d.p2 = frob_dot(p, p);
  d.det_g = det(d.g);
  const double floor = splus_det_floor(p);
  if (!(d.det_g > floor))
    throw DomainViolation("dilation: P outside S+ (det(P^T P) = " + std::to_string(d.det_g) +
                          " below floor " + std::to_string(floor) + ")");
  d.det_root = std::pow(d.det_g, 1.0 / n);
  d.g_inv = inverse(d.g);
  return d;
}

}  // namespace

double splus_det_floor(const Matrix& p) {
  const double p2 = frob_dot(p, p);
  return 1e-14 * std::pow(p2, p.cols());
}

bool in_splus(const Matrix& p) {
  const Matrix g = transposed(p) * p;
  return det(g) > splus_det_floor(p);
}

double dilation(const Matrix& p) {
  const SplusData d = splus_data(p);
  return d.p2 / d.det_root;
}

Matrix dilation_gradient(const Matrix& p) {
  const int n = p.cols();
  const SplusData d = splus_data(p);
  // g^{-1} S(g) = I - (tr g / n) g^{-1}
  Matrix gs = Matrix::identity(n);
  gs -= (d.p2 / n) * d.g_inv;
  Matrix out = p * gs;
  out *= 2.0 / d.det_root;
  return out;
}

Tensor e_tensor(int n) {
  if (n < 1) throw ShapeError("e_tensor: n must be >= 1");
  Tensor e({n, n, n, n});
  const double fault = g_e_tensor_fault.load() ? -1.0 : 1.0;
  for (int k = 0; k < n; ++k)
    for (int j = 0; j < n; ++j)
      for (int l = 0; l < n; ++l)
        for (int m = 0; m < n; ++m) {
          double v = 0.0;
          if (m == l && j == k) v += 1.0;
          if (m == j && k == l) v += 1.0;
          if (m == k && j == l) v -= fault * 2.0 / n;
          e(k, j, l, m) = v;
        }
  return e;
}

Tensor dilation_hessian_reduced(const Matrix& p) {
  const int bigN = p.rows(), n = p.cols();
  const SplusData d = splus_data(p);
  const Tensor e = e_tensor(n);

  // [g^{-1}(g - (|P|^2/n) I)]_{ij}
  Matrix gs = Matrix::identity(n);
  gs -= (d.p2 / n) * d.g_inv;

  Tensor h({bigN, bigN, n, n});
  const double c = 2.0 / d.det_root;
  for (int a = 0; a < bigN; ++a)
    for (int b = 0; b < bigN; ++b)
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          double v = (a == b) ? c * gs(i, j) : 0.0;
          double sum = 0.0;
          for (int m = 0; m < n; ++m)
            for (int l = 0; l < n; ++l) {
              double ek = 0.0;
              for (int k = 0; k < n; ++k) ek += d.g_inv(i, k) * e(k, j, l, m);
              sum += p(a, m) * p(b, l) * ek;
            }
          h(a, b, i, j) = v + c * sum;
        }
  return h;
}

double fd_step_gradient(const Matrix& p) {
  const double eps = std::numeric_limits<double>::epsilon();
  return std::cbrt(eps) * std::max(1.0, frob(p));
}

double fd_step_hessian(const Matrix& p) {
  // second central differences balance truncation O(h^2) against
  // roundoff O(eps/h^2) at h ~ eps^{1/4}
  const double eps = std::numeric_limits<double>::epsilon();
  return std::pow(eps, 0.25) * std::max(1.0, frob(p));
}

Matrix dilation_gradient_fd(const Matrix& p, double h) {
  if (h <= 0.0) {
    // K is 0-homogeneous, so stencils may be taken on a normalized copy
    // and the (-1)-homogeneous gradient scaled back; this keeps the
    // step proportional to the matrix no matter how small |P| is
    const double s = frob(p) / std::sqrt(static_cast<double>(p.cols()));
    if (s > 0.0 && (s < 0.5 || s > 2.0)) {
      Matrix scaled_back = dilation_gradient_fd((1.0 / s) * p, 0.0);
      scaled_back *= 1.0 / s;
      return scaled_back;
    }
    h = fd_step_gradient(p);
  }
  Matrix g(p.rows(), p.cols());
  Matrix q = p;
  for (int a = 0; a < p.rows(); ++a)
    for (int i = 0; i < p.cols(); ++i) {
      const double saved = q(a, i);
      q(a, i) = saved + h;
      const double kp = dilation(q);
      q(a, i) = saved - h;
      const double km = dilation(q);
      q(a, i) = saved;
      g(a, i) = (kp - km) / (2.0 * h);
    }
  return g;
}

Tensor dilation_hessian_fd(const Matrix& p, double h) {
  if (h <= 0.0) {
    // as in the gradient oracle: exploit homogeneity, the Hessian is
    // (-2)-homogeneous
    const double s = frob(p) / std::sqrt(static_cast<double>(p.cols()));
    if (s > 0.0 && (s < 0.5 || s > 2.0)) {
      Tensor t = dilation_hessian_fd((1.0 / s) * p, 0.0);
      t *= 1.0 / (s * s);
      return t;
    }
    h = fd_step_hessian(p);
  }
  const int bigN = p.rows(), n = p.cols();
  const double k0 = dilation(p);
  Tensor out({bigN, bigN, n, n});
  Matrix q = p;
  // flatten entry (a,i) to a single index for the symmetric pair loop
  const int total = bigN * n;
  for (int s = 0; s < total; ++s) {
    const int a = s / n, i = s % n;
    for (int t = s; t < total; ++t) {
      const int b = t / n, j = t % n;
      double v;
      if (s == t) {
        const double saved = q(a, i);
        q(a, i) = saved + h;
        const double kp = dilation(q);
        q(a, i) = saved - h;
        const double km = dilation(q);
        q(a, i) = saved;
        v = (kp - 2.0 * k0 + km) / (h * h);
      } else {
        const double sa = q(a, i), sb = q(b, j);
        q(a, i) = sa + h; q(b, j) = sb + h;
        const double kpp = dilation(q);
        q(b, j) = sb - h;
        const double kpm = dilation(q);
        q(a, i) = sa - h; q(b, j) = sb + h;
        const double kmp = dilation(q);
        q(b, j) = sb - h;
        const double kmm = dilation(q);
        q(a, i) = sa; q(b, j) = sb;
        v = (kpp - kpm - kmp + kmm) / (4.0 * h * h);
      }
      out(a, b, i, j) = v;
      out(b, a, j, i) = v;
    }
  }
  return out;
}

double identity_n_equals_N(const Matrix& p) {
  if (p.rows() != p.cols())
    throw PreconditionError("identity_n_equals_N: square matrix required");
  const double dp = det(p);
  if (dp == 0.0) throw DomainViolation("identity_n_equals_N: singular matrix");
  const int n = p.cols();
  const double k = dilation(p);
  const double p2 = frob_dot(p, p);
  Matrix rhs = transposed(inverse(p));
  rhs -= (n / p2) * p;
  rhs *= -2.0 * k / n;
  const Matrix lhs = dilation_gradient(p);
  return frob(lhs - rhs) / std::max(1.0, frob(lhs));
}

double dilation_gradient_scale(const Matrix& p) {
  const SplusData d = splus_data(p);
  return 2.0 * frob(p) * frob(d.g_inv) * frob(d.g) / d.det_root;
}

ProjectionPair dilation_gradient_projections(const Matrix& p, double tau) {
  if (tau <= 0.0 || tau >= 1.0)
    throw PreconditionError("dilation_gradient_projections: tau must be in (0,1)");
  const Matrix kp = dilation_gradient(p);
  if (frob(kp) <= 1e-13 * dilation_gradient_scale(p)) {
    ProjectionPair out;
    out.proj_range = Matrix(p.rows(), p.rows());
    out.proj_null = Matrix::identity(p.rows());
    out.eps_rank = 0;
    out.sigma.assign(std::min(p.rows(), p.cols()), 0.0);
    return out;
  }
  return projections(kp, tau);
}

std::optional<Matrix> dilation_null_basis(const Matrix& p, double tau) {
  const Matrix kp = dilation_gradient(p);
  if (frob(kp) <= 1e-13 * dilation_gradient_scale(p)) return Matrix::identity(p.rows());
  return null_basis(kp, tau);
}

DilationJet dilation_jet(const Matrix& p) {
  DilationJet j;
  j.k = dilation(p);
  j.k_p = dilation_gradient(p);
  j.k_pp_reduced = dilation_hessian_reduced(p);
  return j;
}

namespace testing {
void set_e_tensor_fault(bool on) { g_e_tensor_fault.store(on); }
}  // namespace testing

}  // namespace qcinf
