#pragma once

#include <functional>
#include <string>

#include "qcinf/dilation.hpp"
#include "qcinf/jet.hpp"

namespace qcinf {

/// Gradient of x -> K(Du(x)) from a second-order jet by the chain rule:
/// D(K(Du))_i = K_P(Du) : D^2u(., i, .).
Vec dilation_gradient_of_k(const Jet2& j);

/// Tangential system: K_P(Du) (x) K_P(Du) : D^2u = K_P(Du) D(K(Du)),
/// a vector in R^N valued in range(K_P).
Vec tangential_residual(const Jet2& j);

/// Contraction (K_PP : D^2u)_a = K_PP(a, b, i, j) d2u(b, i, j).
Vec hessian_contract_d2u(const Tensor& k_pp, const Tensor& d2u);

/// Normal system: [K_P(Du)]^perp (K_PP(Du) : D^2u), valued in
/// null(K_P^T). Uses the reduced Hessian, exact under the projection.
Vec normal_residual(const Jet2& j, double tau = kDefaultRankTol);

struct ResidualBundle {
  Vec tangential;
  Vec normal;
  Vec q_infinity;
  double dilation_value = 0.0;
  bool k_weighted = true;  // whether q_infinity weights the normal term by K
};

/// Full Aronsson system of the dilation:
/// q_infinity = tangential + K * normal (or + normal with
/// k_weighted = false, the renormalized variant).
ResidualBundle q_infinity_residual(const Jet2& j, double tau = kDefaultRankTol,
                                   bool k_weighted = true);

/// Euler-Lagrange residual of the p-th power functional in expanded
/// form: (p-1) K^{p-2} (K_P (x) K_P) : D^2u + K^{p-1} K_PP : D^2u, with
/// the Hessian term evaluated by central differences (no projection is
/// available to kill the omitted analytic summand). With
/// rescaled = true the result is pre-divided by (p-1) K^{p-2}, the form
/// whose p -> infinity limit is the tangential residual.
Vec q_p_expanded(const Jet2& j, double p, bool rescaled = false);

/// Infinity-Laplacian residual (Du (x) Du + |Du|^2 [Du]^perp (x) I) : D^2u.
Vec infinity_laplacian_residual(const Jet2& j, double tau = kDefaultRankTol);

/// A user-supplied Hamiltonian with value and gradient; the Hessian is
/// obtained by central differences of the gradient.
struct Hamiltonian {
  std::string name;
  std::function<double(const Matrix&)> value;
  std::function<Matrix(const Matrix&)> gradient;
};

/// General Aronsson operator (H_P (x) H_P + H [H_P]^perp H_PP)(Du) : D^2u.
Vec a_infinity_residual(const Jet2& j, const Hamiltonian& h, double tau = kDefaultRankTol);

/// Geometric form of the tangential system: S(g) D(K(Du)) with
/// g = Du^T Du. Shares its zero set with tangential_residual on
/// immersion jets.
Vec geometric_tangential(const Jet2& j);

/// Generalized second-fundamental-form pairing Dnu : K_P(Du) for a
/// normal section nu with spatial gradient dnu (N x n). Requires
/// nu^T K_P(Du) = 0 at the point (tolerance normal_tol, relative).
double second_fundamental_contraction(const Matrix& dnu, const Vec& nu, const Jet2& j,
                                      double normal_tol = 1e-8);

}  // namespace qcinf
