#pragma once

#include <cstdint>
#include <initializer_list>
#include <optional>
#include <vector>

#include "qcinf/errors.hpp"

namespace qcinf {

/// Default relative threshold for numerical rank: singular values above
/// tau * sigma_max count toward the rank.
inline constexpr double kDefaultRankTol = 1e-8;

using Vec = std::vector<double>;

// -- small vector helpers ----------------------------------------------------

double dot(const Vec& a, const Vec& b);
double norm(const Vec& a);
double norm_inf(const Vec& a);
Vec add(const Vec& a, const Vec& b);
Vec sub(const Vec& a, const Vec& b);
Vec scaled(const Vec& a, double s);
/// y += s * x
void axpy(Vec& y, double s, const Vec& x);
Vec normalized(const Vec& a);

// -- dense matrix ------------------------------------------------------------

/// Dense row-major matrix. Everything here is desk scale (dimensions of
/// a few), so storage is a plain vector and algorithms favor clarity
/// and robustness over asymptotics.
class Matrix {
public:
  Matrix() = default;
  Matrix(int rows, int cols) : rows_(rows), cols_(cols), a_(static_cast<size_t>(rows * cols), 0.0) {
    if (rows < 1 || cols < 1) throw ShapeError("Matrix: dimensions must be >= 1");
  }
  Matrix(int rows, int cols, std::initializer_list<double> entries);

  static Matrix identity(int n);
  static Matrix zero(int rows, int cols) { return Matrix(rows, cols); }
  /// Rank-one product a b^T.
  static Matrix outer(const Vec& a, const Vec& b);

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  bool empty() const { return a_.empty(); }

  double& operator()(int r, int c) { return a_[static_cast<size_t>(r) * cols_ + c]; }
  double operator()(int r, int c) const { return a_[static_cast<size_t>(r) * cols_ + c]; }

  const std::vector<double>& data() const { return a_; }
  std::vector<double>& data() { return a_; }

  Matrix& operator+=(const Matrix& o);
  Matrix& operator-=(const Matrix& o);
  Matrix& operator*=(double s);

  Vec col(int c) const;
  Vec row(int r) const;

private:
  int rows_ = 0, cols_ = 0;
  std::vector<double> a_;
};

Matrix operator+(Matrix a, const Matrix& b);
Matrix operator-(Matrix a, const Matrix& b);
Matrix operator*(const Matrix& a, const Matrix& b);
Matrix operator*(double s, Matrix a);
Vec operator*(const Matrix& a, const Vec& x);

Matrix transposed(const Matrix& a);
double trace(const Matrix& a);
/// Frobenius norm.
double frob(const Matrix& a);
double max_abs(const Matrix& a);
/// Frobenius inner product tr(A^T B).
double frob_dot(const Matrix& a, const Matrix& b);
bool all_finite(const Matrix& a);

/// Determinant by LU with partial pivoting (square only).
double det(const Matrix& a);
/// Inverse by Gauss-Jordan with partial pivoting; throws DomainViolation
/// when the pivot collapses.
Matrix inverse(const Matrix& a);

/// Cofactor matrix built from signed minors, valid for singular inputs
/// as well: A cof(A)^T = cof(A)^T A = det(A) I.
Matrix cofactor(const Matrix& a);

/// Symmetric traceless part: S(A) = (A + A^T)/2 - (tr A / n) I.
Matrix ahlfors(const Matrix& a);

// -- spectral decompositions -------------------------------------------------

struct SymmetricEigen {
  Vec eigenvalues;     // ascending
  Matrix eigenvectors; // orthonormal columns, matching order
};

/// Cyclic Jacobi eigendecomposition of a symmetric matrix. Throws
/// PreconditionError when |A - A^T| > 1e-10 |A|.
SymmetricEigen symmetric_spectrum(const Matrix& a);

struct Svd {
  Matrix u;   // N x N orthogonal (full left basis)
  Vec sigma;  // min(N,n) singular values, descending
  Matrix v;   // n x n orthogonal
};

/// One-sided Jacobi SVD. Small and rank-deficient inputs welcome; the
/// left basis is completed to a full orthonormal frame so null spaces
/// fall out directly.
Svd svd(const Matrix& m);

/// Number of singular values above tau * sigma_max (0 when sigma_max = 0).
int eps_rank(const Vec& sigma_descending, double tau);
int eps_rank(const Matrix& m, double tau = kDefaultRankTol);

struct ProjectionPair {
  Matrix proj_range;  // N x N projection onto range(M)
  Matrix proj_null;   // N x N projection onto null(M^T)
  int eps_rank = 0;
  Vec sigma;          // descending
};

/// Orthogonal projections onto the range of M and the null space of M^T,
/// split at the relative threshold tau. An all-zero M is a legitimate
/// input: rank 0, proj_null = I.
ProjectionPair projections(const Matrix& m, double tau = kDefaultRankTol);

/// Orthonormal basis of null(M^T) as columns of an N x (N - rank)
/// matrix; nullopt when M has full row rank.
std::optional<Matrix> null_basis(const Matrix& m, double tau = kDefaultRankTol);

// -- dense tensors -----------------------------------------------------------

/// Dense row-major tensor of rank 1..4.
class Tensor {
public:
  Tensor() = default;
  explicit Tensor(std::vector<int> dims);

  static Tensor from_matrix(const Matrix& m);

  int rank() const { return static_cast<int>(dims_.size()); }
  const std::vector<int>& dims() const { return dims_; }
  size_t size() const { return a_.size(); }

  double& operator()(int i) { return a_[offset({i})]; }
  double& operator()(int i, int j) { return a_[offset({i, j})]; }
  double& operator()(int i, int j, int k) { return a_[offset({i, j, k})]; }
  double& operator()(int i, int j, int k, int l) { return a_[offset({i, j, k, l})]; }
  double operator()(int i) const { return a_[offset({i})]; }
  double operator()(int i, int j) const { return a_[offset({i, j})]; }
  double operator()(int i, int j, int k) const { return a_[offset({i, j, k})]; }
  double operator()(int i, int j, int k, int l) const { return a_[offset({i, j, k, l})]; }

  const std::vector<double>& data() const { return a_; }
  std::vector<double>& data() { return a_; }

  Tensor& operator+=(const Tensor& o);
  Tensor& operator-=(const Tensor& o);
  Tensor& operator*=(double s);

private:
  size_t offset(std::initializer_list<int> idx) const;
  std::vector<int> dims_;
  std::vector<double> a_;
};

double max_abs(const Tensor& t);

/// Contraction extending the Frobenius pairing: the trailing `slots`
/// axes of s are summed against the trailing `slots` axes of t (paired
/// in order, dimensions must match). The result keeps s's leading axes
/// followed by t's leading axes; a fully contracted pair yields a
/// rank-0 tensor read out with scalar().
Tensor contract_last(const Tensor& s, const Tensor& t, int slots);

/// contract_last over every axis of both operands; for two matrices
/// this is tr(S^T T).
double contract_all(const Tensor& s, const Tensor& t);

/// Reads the value of a rank-0 (or all-ones-dims) tensor.
double scalar(const Tensor& t);

}  // namespace qcinf
