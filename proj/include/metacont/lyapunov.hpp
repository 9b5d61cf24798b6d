#pragma once

#include <Eigen/Dense>

#include <optional>
#include <utility>

namespace metacont {

enum class LyapunovMethod { GaussSeidel, Smith, BartelsStewart };

[[nodiscard]] const char* to_string(LyapunovMethod m);

/// Solution record for A C + C A^T + B = 0.
struct CovarianceResult {
  Eigen::MatrixXd c;
  /// Frobenius norm of A C + C A^T + B.
  double residual = 0.0;
  /// Sweeps (Gauss-Seidel) or squarings (Smith); 0 for the direct solver.
  int iterations = 0;
  LyapunovMethod method = LyapunovMethod::BartelsStewart;
  /// Singular values of C in descending order.
  Eigen::VectorXd singular_values;
  /// Count above rank_tol * max singular value.
  int numerical_rank = 0;
};

struct LyapunovOptions {
  double tol = 1e-9;
  /// Gauss-Seidel sweep cap; Smith uses max_squarings instead.
  int max_iter = 10000;
  int max_squarings = 60;
  /// Smith shift parameter.
  double q = 0.1;
  double rank_tol = 1e-10;
  /// Solvability precheck: reject A whose largest eigenvalue real part is
  /// nonnegative. Disable only to probe solver failure modes directly.
  bool check_hurwitz = true;
};

/// Dense Kronecker form of the Lyapunov equation: returns (Ak, b) with
/// Ak = I (x) A + A (x) I and b the column-major stacking of B, so that
/// Ak vec(C) = -b. Dimensions above kron_cap are rejected before allocation.
[[nodiscard]] std::pair<Eigen::MatrixXd, Eigen::VectorXd> kron_system(
    const Eigen::Ref<const Eigen::MatrixXd>& a,
    const Eigen::Ref<const Eigen::MatrixXd>& b, int kron_cap = 60);

/// Gauss-Seidel sweeps on the Kronecker system, performed matrix-free on the
/// entries of C in column-major order. Starts from c_init (warm start) when
/// given, else from C_ij = -B_ij / (A_ii + A_jj). Stops once both the sweep
/// increment is below tol and the residual satisfies the result contract.
[[nodiscard]] CovarianceResult gauss_seidel_solve(
    const Eigen::Ref<const Eigen::MatrixXd>& a,
    const Eigen::Ref<const Eigen::MatrixXd>& b,
    const std::optional<Eigen::MatrixXd>& c_init = std::nullopt,
    const LyapunovOptions& opts = {});

/// Smith iteration with fixed shift q: C(0) = 2q (qI-A)^{-1} B (qI-A^T)^{-1},
/// C(k+1) = C(k) + G^(2^k) C(k) G^(2^k)^T with G = (qI-A)^{-1}(qI+A), squaring
/// the running power each step. No warm start by construction.
[[nodiscard]] CovarianceResult smith_solve(const Eigen::Ref<const Eigen::MatrixXd>& a,
                                           const Eigen::Ref<const Eigen::MatrixXd>& b,
                                           const LyapunovOptions& opts = {});

/// Direct solve via the real Schur decomposition of A and block
/// back-substitution over the quasi-triangular factor.
[[nodiscard]] CovarianceResult bartels_stewart_solve(
    const Eigen::Ref<const Eigen::MatrixXd>& a,
    const Eigen::Ref<const Eigen::MatrixXd>& b, const LyapunovOptions& opts = {});

/// Numerical rank of [sF  sAF  ...  sA^{n-1}F] for sF = sigma * F, via
/// singular values with threshold rank_tol * sigma_max.
[[nodiscard]] int controllability_rank(const Eigen::Ref<const Eigen::MatrixXd>& a,
                                       const Eigen::Ref<const Eigen::MatrixXd>& f_sigma,
                                       double rank_tol = 1e-10);

/// Numerical rank and singular values (descending) of a symmetric matrix,
/// computed from the absolute eigenvalues.
[[nodiscard]] std::pair<int, Eigen::VectorXd> covariance_degeneracy(
    const Eigen::Ref<const Eigen::MatrixXd>& c, double rank_tol = 1e-10);

}  // namespace metacont
