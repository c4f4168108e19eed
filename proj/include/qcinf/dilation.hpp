#pragma once

#include "qcinf/tensor.hpp"

namespace qcinf {

/// Scale-consistent floor on det(P^T P) below which P is treated as
/// outside S+ (the set of immersion gradients).
double splus_det_floor(const Matrix& p);

/// True when det(P^T P) clears the S+ floor.
bool in_splus(const Matrix& p);

/// Dilation K(P) = |P|^2 / det(P^T P)^{1/n}. Always >= n, with equality
/// exactly at conformal P. Throws DomainViolation off S+.
double dilation(const Matrix& p);

/// First derivative K_P(P) = 2 P (P^T P)^{-1} S(P^T P) / det(P^T P)^{1/n},
/// an N x n matrix. Vanishes exactly at conformal P.
Matrix dilation_gradient(const Matrix& p);

/// Constant 4th-order tensor E with components
/// E_{kjlm} = d_{ml} d_{jk} + d_{mj} d_{kl} - (2/n) d_{mk} d_{jl},
/// stored with index order (k, j, l, m).
Tensor e_tensor(int n);

/// Second derivative of K without its final summand: the two displayed
/// terms of the Hessian, stored as (alpha, beta, i, j) with
/// entry = d^2 K / dP_{alpha i} dP_{beta j}. The omitted summand lies in
/// the range of K_P on the left, so any expression of the form
/// [K_P]^perp K_PP (and any contraction with a vector normal to K_P)
/// is exact when evaluated with this reduced tensor.
Tensor dilation_hessian_reduced(const Matrix& p);

/// Default central-difference steps, balanced for first and second
/// differences of K at scale max(1, |P|).
double fd_step_gradient(const Matrix& p);
double fd_step_hessian(const Matrix& p);

/// Central-difference gradient of K; the verification oracle for
/// dilation_gradient. h <= 0 selects the default step.
Matrix dilation_gradient_fd(const Matrix& p, double h = 0.0);

/// Full central-difference Hessian of K, stored as (alpha, beta, i, j)
/// and exactly symmetric under (alpha,i) <-> (beta,j) by construction.
/// Throws DomainViolation when a stencil point leaves S+.
Tensor dilation_hessian_fd(const Matrix& p, double h = 0.0);

/// For square invertible P, the relative residual of
/// K_P(P) = -(2K/n) (P^{-T} - n P / |P|^2).
double identity_n_equals_N(const Matrix& p);

/// Magnitude scale of K_P at P (the product bound of its factors).
/// A computed gradient below ~1e-13 of this is numerically
/// indistinguishable from the conformal zero.
double dilation_gradient_scale(const Matrix& p);

/// Projections of K_P(P) with the conformal zero handled: when the
/// gradient sits at its roundoff floor the pair is (0, I) with rank 0,
/// exactly as for the zero matrix. Always prefer this over
/// projections(dilation_gradient(P)) on possibly-conformal input.
ProjectionPair dilation_gradient_projections(const Matrix& p, double tau = kDefaultRankTol);

/// Orthonormal basis of null(K_P(P)^T), conformal zero included (the
/// full identity basis); nullopt when K_P has full row rank.
std::optional<Matrix> dilation_null_basis(const Matrix& p, double tau = kDefaultRankTol);

/// Point evaluation of the dilation with both derivatives.
struct DilationJet {
  double k = 0.0;
  Matrix k_p;
  Tensor k_pp_reduced;
};

DilationJet dilation_jet(const Matrix& p);

namespace testing {
/// Test instrumentation: flips one sign inside e_tensor so downstream
/// Hessian checks must fail. Never set outside fault-injection tests.
void set_e_tensor_fault(bool on);
}  // namespace testing

}  // namespace qcinf
