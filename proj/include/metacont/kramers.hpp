#pragma once

#include <Eigen/Dense>

#include <vector>

#include "metacont/continuation.hpp"
#include "metacont/models.hpp"

namespace metacont {

/// First-passage estimate for a gradient system: leading-order expected time
/// from the minimum x* over the saddle z* into a small ball around the
/// opposite minimum.
struct KramersEstimate {
  Eigen::VectorXd x_star;
  Eigen::VectorXd z_star;
  double mu = 0.0;
  double sigma = 0.0;
  /// U(z*) - U(x*), positive.
  double barrier = 0.0;
  /// Unstable rate at the saddle: minus the most negative Hessian eigenvalue.
  double lambda_unstable = 0.0;
  double det_saddle = 0.0;
  double det_min = 0.0;
  double expected_time = 0.0;
  /// Magnitude of the relative asymptotic correction, sigma |ln(sigma^2/2)|^{3/2};
  /// reported, not applied.
  double correction_bound = 0.0;
  int rayleigh_iters = 0;
};

/// Determinant via partially pivoted LU: permutation sign times the product
/// of pivots; returns exact 0 once a pivot magnitude underflows 1e-300.
[[nodiscard]] double lu_determinant(const Eigen::Ref<const Eigen::MatrixXd>& a);

struct RayleighResult {
  double lambda = 0.0;
  Eigen::VectorXd v;
  int iterations = 0;
  double residual = 0.0;
  /// Set when the iteration cap was hit and a full decomposition supplied the
  /// answer instead.
  bool used_fallback = false;
};

/// Rayleigh quotient iteration for a symmetric matrix from the warm start
/// (v0, lambda0): v <- normalize((A - lambda I)^{-1} v), lambda <- v^T A v.
/// Converges cubically to the eigenpair tracked by the warm start; an exactly
/// singular shift is nudged (it signals convergence). Symmetry is asserted to
/// 1e-10. After max_iter the full symmetric decomposition is used as a
/// flagged fallback.
[[nodiscard]] RayleighResult rayleigh_leading_eigen(
    const Eigen::Ref<const Eigen::MatrixXd>& a, const Eigen::VectorXd& v0,
    double lambda0, double tol = 1e-12, int max_iter = 50);

/// Eyring-Kramers leading-order time
///   2 pi / lambda(z*) * sqrt(|det D2U(z*)| / det D2U(x*)) * exp(2 [U(z*) - U(x*)] / sigma^2)
/// for a gradient system (D2U = -jacobian of the drift). x_star must be a
/// local minimum and z_star a saddle with exactly one unstable direction;
/// both are verified through the Hessian eigenvalues.
[[nodiscard]] KramersEstimate eyring_kramers_time(const SdeSystem& system,
                                                  const Eigen::VectorXd& x_star,
                                                  const Eigen::VectorXd& z_star,
                                                  double mu, double sigma);

/// Sweeps paired minimum/saddle branches (nearest mu within pair_tol,
/// nonpositive meaning 2x the mu spacing), warm starting the saddle Hessian
/// eigenpair with Rayleigh iteration from the previous point. Unpairable or
/// failing points are skipped.
[[nodiscard]] std::vector<KramersEstimate> kramers_along_branch(
    const SdeSystem& system, const Branch& minima, const Branch& saddles, double sigma,
    double pair_tol = 0.0);

}  // namespace metacont
