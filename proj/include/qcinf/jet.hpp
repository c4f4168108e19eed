#pragma once

#include "qcinf/tensor.hpp"

namespace qcinf {

/// Second-order point evaluation of a map u: value, gradient and
/// Hessian. d2u is stored (component, i, j) with
/// d2u(b, i, j) = d^2 u_b / dx_i dx_j, symmetric in (i, j).
struct Jet2 {
  Vec x;       // point in R^n
  Vec u;       // value in R^N
  Matrix du;   // N x n
  Tensor d2u;  // (N, n, n)

  int n() const { return du.cols(); }
  int N() const { return du.rows(); }
};

/// Checks shapes and Hessian symmetry (relative tolerance sym_tol);
/// throws PreconditionError on failure.
void validate_jet(const Jet2& j, double sym_tol = 1e-10);

/// Symmetrizes the Hessian in its two spatial slots in place.
void symmetrize_hessian(Tensor& d2u);

}  // namespace qcinf
