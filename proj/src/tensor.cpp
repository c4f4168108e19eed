#include "qcinf/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace qcinf {

// -- vector helpers ----------------------------------------------------------

double dot(const Vec& a, const Vec& b) {
  if (a.size() != b.size()) throw ShapeError("dot: size mismatch");
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm(const Vec& a) { return std::sqrt(dot(a, a)); }

double norm_inf(const Vec& a) {
  double m = 0.0;
  for (double x : a) m = std::max(m, std::fabs(x));
  return m;
}

Vec add(const Vec& a, const Vec& b) {
  if (a.size() != b.size()) throw ShapeError("add: size mismatch");
  Vec r(a);
  for (size_t i = 0; i < r.size(); ++i) r[i] += b[i];
  return r;
}

Vec sub(const Vec& a, const Vec& b) {
  if (a.size() != b.size()) throw ShapeError("sub: size mismatch");
  Vec r(a);
  for (size_t i = 0; i < r.size(); ++i) r[i] -= b[i];
  return r;
}

Vec scaled(const Vec& a, double s) {
  Vec r(a);
  for (double& x : r) x *= s;
  return r;
}

void axpy(Vec& y, double s, const Vec& x) {
  if (x.size() != y.size()) throw ShapeError("axpy: size mismatch");
  for (size_t i = 0; i < y.size(); ++i) y[i] += s * x[i];
}

Vec normalized(const Vec& a) {
  const double n = norm(a);
  if (n == 0.0) throw DomainViolation("normalized: zero vector");
  return scaled(a, 1.0 / n);
}

// -- matrix ------------------------------------------------------------------

Matrix::Matrix(int rows, int cols, std::initializer_list<double> entries) : Matrix(rows, cols) {
  if (static_cast<int>(entries.size()) != rows * cols)
    throw ShapeError("Matrix: initializer size mismatch");
  std::copy(entries.begin(), entries.end(), a_.begin());
}

Matrix Matrix::identity(int n) {
  Matrix m(n, n);
  for (int i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::outer(const Vec& a, const Vec& b) {
  Matrix m(static_cast<int>(a.size()), static_cast<int>(b.size()));
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < m.cols(); ++j) m(i, j) = a[i] * b[j];
  return m;
}

Matrix& Matrix::operator+=(const Matrix& o) {
  if (rows_ != o.rows_ || cols_ != o.cols_) throw ShapeError("Matrix +=: shape mismatch");
  for (size_t i = 0; i < a_.size(); ++i) a_[i] += o.a_[i];
  return *this;
}

Matrix& Matrix::operator-=(const Matrix& o) {
  if (rows_ != o.rows_ || cols_ != o.cols_) throw ShapeError("Matrix -=: shape mismatch");
  for (size_t i = 0; i < a_.size(); ++i) a_[i] -= o.a_[i];
  return *this;
}

Matrix& Matrix::operator*=(double s) {
  for (double& x : a_) x *= s;
  return *this;
}

Vec Matrix::col(int c) const {
  Vec v(rows_);
  for (int r = 0; r < rows_; ++r) v[r] = (*this)(r, c);
  return v;
}

Vec Matrix::row(int r) const {
  Vec v(cols_);
  for (int c = 0; c < cols_; ++c) v[c] = (*this)(r, c);
  return v;
}

Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }

Matrix operator*(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) throw ShapeError("Matrix *: inner dimension mismatch");
  Matrix c(a.rows(), b.cols());
  for (int i = 0; i < a.rows(); ++i)
    for (int k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      for (int j = 0; j < b.cols(); ++j) c(i, j) += aik * b(k, j);
    }
  return c;
}

Matrix operator*(double s, Matrix a) { return a *= s; }

Vec operator*(const Matrix& a, const Vec& x) {
  if (a.cols() != static_cast<int>(x.size())) throw ShapeError("Matrix * Vec: size mismatch");
  Vec y(a.rows(), 0.0);
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j) y[i] += a(i, j) * x[j];
  return y;
}

Matrix transposed(const Matrix& a) {
  Matrix t(a.cols(), a.rows());
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  return t;
}

double trace(const Matrix& a) {
  if (a.rows() != a.cols()) throw ShapeError("trace: square matrix required");
  double s = 0.0;
  for (int i = 0; i < a.rows(); ++i) s += a(i, i);
  return s;
}

double frob(const Matrix& a) {
  double s = 0.0;
  for (double x : a.data()) s += x * x;
  return std::sqrt(s);
}

double max_abs(const Matrix& a) {
  double m = 0.0;
  for (double x : a.data()) m = std::max(m, std::fabs(x));
  return m;
}

double frob_dot(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw ShapeError("frob_dot: shape mismatch");
  double s = 0.0;
  for (size_t i = 0; i < a.data().size(); ++i) s += a.data()[i] * b.data()[i];
  return s;
}

bool all_finite(const Matrix& a) {
  for (double x : a.data())
    if (!std::isfinite(x)) return false;
  return true;
}

namespace {

// LU with partial pivoting; returns false when a pivot vanishes.
// lu holds both factors, perm_sign the permutation parity.
bool lu_factor(Matrix& lu, std::vector<int>& piv, double& perm_sign) {
  const int n = lu.rows();
  piv.resize(n);
  std::iota(piv.begin(), piv.end(), 0);
  perm_sign = 1.0;
  for (int k = 0; k < n; ++k) {
    int p = k;
    double best = std::fabs(lu(k, k));
    for (int r = k + 1; r < n; ++r) {
      const double v = std::fabs(lu(r, k));
      if (v > best) {
        best = v;
        p = r;
      }
    }
    if (best == 0.0) return false;
    if (p != k) {
      for (int c = 0; c < n; ++c) std::swap(lu(k, c), lu(p, c));
      std::swap(piv[k], piv[p]);
      perm_sign = -perm_sign;
    }
    for (int r = k + 1; r < n; ++r) {
      lu(r, k) /= lu(k, k);
      const double m = lu(r, k);
      if (m == 0.0) continue;
      for (int c = k + 1; c < n; ++c) lu(r, c) -= m * lu(k, c);
    }
  }
  return true;
}

}  // namespace

double det(const Matrix& a) {
  if (a.rows() != a.cols()) throw ShapeError("det: square matrix required");
  Matrix lu = a;
  std::vector<int> piv;
  double sign = 1.0;
  if (!lu_factor(lu, piv, sign)) return 0.0;
  double d = sign;
  for (int i = 0; i < a.rows(); ++i) d *= lu(i, i);
  return d;
}

Matrix inverse(const Matrix& a) {
  if (a.rows() != a.cols()) throw ShapeError("inverse: square matrix required");
  const int n = a.rows();
  Matrix lu = a;
  std::vector<int> piv;
  double sign = 1.0;
  if (!lu_factor(lu, piv, sign)) throw DomainViolation("inverse: singular matrix");
  Matrix inv(n, n);
  Vec x(n);
  for (int col = 0; col < n; ++col) {
    // forward/back substitution against the permuted unit vector
    for (int i = 0; i < n; ++i) {
      x[i] = (piv[i] == col) ? 1.0 : 0.0;
      for (int j = 0; j < i; ++j) x[i] -= lu(i, j) * x[j];
    }
    for (int i = n - 1; i >= 0; --i) {
      for (int j = i + 1; j < n; ++j) x[i] -= lu(i, j) * x[j];
      x[i] /= lu(i, i);
    }
    for (int i = 0; i < n; ++i) inv(i, col) = x[i];
  }
  return inv;
}

Matrix cofactor(const Matrix& a) {
  if (a.rows() != a.cols()) throw ShapeError("cofactor: square matrix required");
  const int n = a.rows();
  Matrix c(n, n);
  if (n == 1) {
    c(0, 0) = 1.0;
    return c;
  }
  Matrix minor(n - 1, n - 1);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      int mr = 0;
      for (int r = 0; r < n; ++r) {
        if (r == i) continue;
        int mc = 0;
        for (int col = 0; col < n; ++col) {
          if (col == j) continue;
          minor(mr, mc) = a(r, col);
          ++mc;
        }
        ++mr;
      }
      const double sgn = ((i + j) % 2 == 0) ? 1.0 : -1.0;
      c(i, j) = sgn * det(minor);
    }
  return c;
}

Matrix ahlfors(const Matrix& a) {
  if (a.rows() != a.cols()) throw ShapeError("ahlfors: square matrix required");
  const int n = a.rows();
  Matrix s(n, n);
  const double t = trace(a) / n;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) s(i, j) = 0.5 * (a(i, j) + a(j, i)) - (i == j ? t : 0.0);
  return s;
}

// -- spectral ----------------------------------------------------------------

SymmetricEigen symmetric_spectrum(const Matrix& a) {
  if (a.rows() != a.cols()) throw ShapeError("symmetric_spectrum: square matrix required");
  const int n = a.rows();
  double asym = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) asym = std::max(asym, std::fabs(a(i, j) - a(j, i)));
  if (asym > 1e-10 * std::max(1e-300, frob(a)))
    throw PreconditionError("symmetric_spectrum: input is not symmetric");

  Matrix m = a;
  // symmetrize exactly so Jacobi sees a clean input
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const double v = 0.5 * (m(i, j) + m(j, i));
      m(i, j) = m(j, i) = v;
    }
  Matrix v = Matrix::identity(n);

  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (int p = 0; p < n; ++p)
      for (int q = p + 1; q < n; ++q) off += m(p, q) * m(p, q);
    if (off <= 1e-300 || std::sqrt(off) <= 1e-15 * std::max(1.0, frob(m))) break;
    for (int p = 0; p < n; ++p)
      for (int q = p + 1; q < n; ++q) {
        const double apq = m(p, q);
        if (apq == 0.0) continue;
        const double theta = (m(q, q) - m(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (int k = 0; k < n; ++k) {
          const double mkp = m(k, p), mkq = m(k, q);
          m(k, p) = c * mkp - s * mkq;
          m(k, q) = s * mkp + c * mkq;
        }
        for (int k = 0; k < n; ++k) {
          const double mpk = m(p, k), mqk = m(q, k);
          m(p, k) = c * mpk - s * mqk;
          m(q, k) = s * mpk + c * mqk;
        }
        for (int k = 0; k < n; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
  }

  SymmetricEigen out;
  out.eigenvalues.resize(n);
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  Vec diag(n);
  for (int i = 0; i < n; ++i) diag[i] = m(i, i);
  std::sort(order.begin(), order.end(), [&](int x, int y) { return diag[x] < diag[y]; });
  out.eigenvectors = Matrix(n, n);
  for (int c = 0; c < n; ++c) {
    out.eigenvalues[c] = diag[order[c]];
    for (int r = 0; r < n; ++r) out.eigenvectors(r, c) = v(r, order[c]);
  }
  return out;
}

namespace {

// Completes `cols` orthonormal columns of q (N x N, leading `cols`
// filled) to a full orthonormal basis using canonical vectors.
void complete_basis(Matrix& q, int cols) {
  const int n = q.rows();
  int have = cols;
  for (int cand = 0; cand < n && have < n; ++cand) {
    Vec w(n, 0.0);
    w[cand] = 1.0;
    for (int c = 0; c < have; ++c) {
      double d = 0.0;
      for (int r = 0; r < n; ++r) d += q(r, c) * w[r];
      for (int r = 0; r < n; ++r) w[r] -= d * q(r, c);
    }
    // re-orthogonalize once
    for (int c = 0; c < have; ++c) {
      double d = 0.0;
      for (int r = 0; r < n; ++r) d += q(r, c) * w[r];
      for (int r = 0; r < n; ++r) w[r] -= d * q(r, c);
    }
    const double nw = norm(w);
    if (nw > 1e-8) {
      for (int r = 0; r < n; ++r) q(r, have) = w[r] / nw;
      ++have;
    }
  }
  if (have < n) throw DomainViolation("svd: failed to complete orthonormal basis");
}

}  // namespace

Svd svd(const Matrix& m_in) {
  const bool transpose = m_in.rows() < m_in.cols();
  const Matrix m = transpose ? transposed(m_in) : m_in;
  const int rows = m.rows(), cols = m.cols();

  Matrix a = m;                       // columns get orthogonalized in place
  Matrix v = Matrix::identity(cols);  // accumulated right rotations

  const double scale = std::max(1e-300, frob(a));
  for (int sweep = 0; sweep < 60; ++sweep) {
    bool rotated = false;
    for (int p = 0; p < cols; ++p)
      for (int q = p + 1; q < cols; ++q) {
        double app = 0.0, aqq = 0.0, apq = 0.0;
        for (int r = 0; r < rows; ++r) {
          app += a(r, p) * a(r, p);
          aqq += a(r, q) * a(r, q);
          apq += a(r, p) * a(r, q);
        }
        if (std::fabs(apq) <= 1e-16 * scale * scale) continue;
        if (std::fabs(apq) <= 1e-15 * std::sqrt(app * aqq) + 1e-300) continue;
        rotated = true;
        const double zeta = (aqq - app) / (2.0 * apq);
        const double t = (zeta >= 0.0 ? 1.0 : -1.0) /
                         (std::fabs(zeta) + std::sqrt(zeta * zeta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = c * t;
        for (int r = 0; r < rows; ++r) {
          const double arp = a(r, p), arq = a(r, q);
          a(r, p) = c * arp - s * arq;
          a(r, q) = s * arp + c * arq;
        }
        for (int r = 0; r < cols; ++r) {
          const double vrp = v(r, p), vrq = v(r, q);
          v(r, p) = c * vrp - s * vrq;
          v(r, q) = s * vrp + c * vrq;
        }
      }
    if (!rotated) break;
  }

  Vec sig(cols);
  for (int c = 0; c < cols; ++c) {
    double s = 0.0;
    for (int r = 0; r < rows; ++r) s += a(r, c) * a(r, c);
    sig[c] = std::sqrt(s);
  }
  std::vector<int> order(cols);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int x, int y) { return sig[x] > sig[y]; });

  Matrix u(rows, rows);
  Matrix vperm(cols, cols);
  Vec sigma(cols);
  int filled = 0;
  for (int c = 0; c < cols; ++c) {
    const int oc = order[c];
    sigma[c] = sig[oc];
    for (int r = 0; r < cols; ++r) vperm(r, c) = v(r, oc);
    if (sig[oc] > 1e-300 * scale && sig[oc] > 0.0) {
      for (int r = 0; r < rows; ++r) u(r, filled) = a(r, oc) / sig[oc];
      ++filled;
    }
  }
  complete_basis(u, filled);

  Svd out;
  out.sigma = sigma;
  if (!transpose) {
    out.u = u;
    out.v = vperm;
  } else {
    // m_in = (U S V^T)^T = V S U^T: factors swap roles
    out.u = vperm;
    out.v = u;
  }
  return out;
}

int eps_rank(const Vec& sigma_descending, double tau) {
  if (sigma_descending.empty()) return 0;
  const double top = sigma_descending.front();
  if (top <= 0.0) return 0;
  int r = 0;
  for (double s : sigma_descending)
    if (s > tau * top) ++r;
  return r;
}

int eps_rank(const Matrix& m, double tau) { return eps_rank(svd(m).sigma, tau); }

ProjectionPair projections(const Matrix& m, double tau) {
  if (tau <= 0.0 || tau >= 1.0) throw PreconditionError("projections: tau must be in (0,1)");
  const int big = m.rows();
  const Svd dec = svd(m);
  ProjectionPair out;
  out.sigma = dec.sigma;
  out.eps_rank = eps_rank(dec.sigma, tau);
  out.proj_range = Matrix(big, big);
  for (int k = 0; k < out.eps_rank; ++k)
    for (int i = 0; i < big; ++i)
      for (int j = 0; j < big; ++j) out.proj_range(i, j) += dec.u(i, k) * dec.u(j, k);
  out.proj_null = Matrix::identity(big) - out.proj_range;
  return out;
}

std::optional<Matrix> null_basis(const Matrix& m, double tau) {
  const Svd dec = svd(m);
  const int r = eps_rank(dec.sigma, tau);
  const int big = m.rows();
  if (r >= big) return std::nullopt;
  Matrix basis(big, big - r);
  for (int c = r; c < big; ++c)
    for (int row = 0; row < big; ++row) basis(row, c - r) = dec.u(row, c);
  return basis;
}

// -- tensors -----------------------------------------------------------------

Tensor::Tensor(std::vector<int> dims) : dims_(std::move(dims)) {
  size_t total = 1;
  for (int d : dims_) {
    if (d < 1) throw ShapeError("Tensor: dimensions must be >= 1");
    total *= static_cast<size_t>(d);
  }
  if (dims_.size() > 4) throw ShapeError("Tensor: rank must be <= 4");
  a_.assign(total, 0.0);
}

Tensor Tensor::from_matrix(const Matrix& m) {
  Tensor t({m.rows(), m.cols()});
  t.a_ = m.data();
  return t;
}

size_t Tensor::offset(std::initializer_list<int> idx) const {
  if (idx.size() != dims_.size()) throw ShapeError("Tensor: index rank mismatch");
  size_t off = 0;
  auto it = idx.begin();
  for (size_t k = 0; k < dims_.size(); ++k, ++it) off = off * dims_[k] + *it;
  return off;
}

Tensor& Tensor::operator+=(const Tensor& o) {
  if (dims_ != o.dims_) throw ShapeError("Tensor +=: shape mismatch");
  for (size_t i = 0; i < a_.size(); ++i) a_[i] += o.a_[i];
  return *this;
}

Tensor& Tensor::operator-=(const Tensor& o) {
  if (dims_ != o.dims_) throw ShapeError("Tensor -=: shape mismatch");
  for (size_t i = 0; i < a_.size(); ++i) a_[i] -= o.a_[i];
  return *this;
}

Tensor& Tensor::operator*=(double s) {
  for (double& x : a_) x *= s;
  return *this;
}

double max_abs(const Tensor& t) {
  double m = 0.0;
  for (double x : t.data()) m = std::max(m, std::fabs(x));
  return m;
}

Tensor contract_last(const Tensor& s, const Tensor& t, int slots) {
  if (slots < 0 || slots > s.rank() || slots > t.rank())
    throw ShapeError("contract_last: slot count exceeds operand rank");
  const int sfree = s.rank() - slots;
  const int tfree = t.rank() - slots;
  for (int k = 0; k < slots; ++k)
    if (s.dims()[sfree + k] != t.dims()[tfree + k])
      throw ShapeError("contract_last: contracted dimensions differ");

  std::vector<int> rdims;
  for (int k = 0; k < sfree; ++k) rdims.push_back(s.dims()[k]);
  for (int k = 0; k < tfree; ++k) rdims.push_back(t.dims()[k]);

  size_t sfree_size = 1, tfree_size = 1, csize = 1;
  for (int k = 0; k < sfree; ++k) sfree_size *= s.dims()[k];
  for (int k = 0; k < tfree; ++k) tfree_size *= t.dims()[k];
  for (int k = 0; k < slots; ++k) csize *= s.dims()[sfree + k];

  Tensor r(rdims.empty() ? std::vector<int>{1} : rdims);
  const bool rank0 = rdims.empty();
  // row-major layout means trailing axes are contiguous: operand data
  // factors as [free][contracted]
  for (size_t a = 0; a < sfree_size; ++a)
    for (size_t b = 0; b < tfree_size; ++b) {
      double acc = 0.0;
      const double* ps = s.data().data() + a * csize;
      const double* pt = t.data().data() + b * csize;
      for (size_t c = 0; c < csize; ++c) acc += ps[c] * pt[c];
      r.data()[a * tfree_size + b] = acc;
    }
  if (rank0) r.data().resize(1);
  return r;
}

double contract_all(const Tensor& s, const Tensor& t) {
  if (s.dims() != t.dims()) throw ShapeError("contract_all: shape mismatch");
  double acc = 0.0;
  for (size_t i = 0; i < s.size(); ++i) acc += s.data()[i] * t.data()[i];
  return acc;
}

double scalar(const Tensor& t) {
  if (t.size() != 1) throw ShapeError("scalar: tensor has more than one entry");
  return t.data()[0];
}

}  // namespace qcinf
