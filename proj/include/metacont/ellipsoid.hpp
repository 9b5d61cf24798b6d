#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "metacont/continuation.hpp"

namespace metacont {

/// Confidence ellipsoid with center x* and shape matrix Q = h^2 C, allowed to
/// be degenerate (positive semidefinite Q of any rank).
struct Ellipsoid {
  Eigen::VectorXd center;
  Eigen::MatrixXd shape;
  double h = 1.0;
  int rank = 0;
};

/// Builds the ellipsoid from a covariance matrix; rank is the numerical rank
/// of the shape matrix at rank_tol.
[[nodiscard]] Ellipsoid make_ellipsoid(const Eigen::VectorXd& center,
                                       const Eigen::Ref<const Eigen::MatrixXd>& covariance,
                                       double h, double rank_tol = 1e-10);

/// Support function v^T x* + sqrt(v^T Q v); positively homogeneous of degree
/// one in v, with the quadratic form clamped at zero against roundoff.
[[nodiscard]] double support_function(const Ellipsoid& e, const Eigen::VectorXd& v);

/// Result of one distance computation delta = max over unit v of the gap
/// between the two supporting half spaces. Sign: positive disjoint, zero
/// touching, negative intersecting.
struct DistanceResult {
  double delta = 0.0;
  Eigen::VectorXd v_star;
  int iterations = 0;
  int function_evals = 0;
  bool converged = false;
  double kkt_residual = 0.0;
};

struct DistanceOptions {
  double tol = 1e-8;
  int max_iter = 200;
  std::optional<Eigen::VectorXd> v_init;
  /// Extra random unit starting directions for verification runs; the best
  /// converged result wins. 0 keeps the single cold or warm start.
  int multistart = 0;
  std::uint64_t multistart_seed = 0x6d657461636f6eULL;
};

/// Objective G(v) = -v^T x1 + sqrt(v^T Q1 v) + v^T x2 + sqrt(v^T Q2 v), so
/// that delta = -min G on the unit sphere. Exposed for derivative checks.
[[nodiscard]] double distance_objective(const Ellipsoid& e1, const Ellipsoid& e2,
                                        const Eigen::VectorXd& v);

/// Analytic gradient of the objective; degenerate directions (v^T Q v = 0)
/// contribute the subgradient 0 for their square-root term.
[[nodiscard]] Eigen::VectorXd distance_gradient(const Ellipsoid& e1, const Ellipsoid& e2,
                                                const Eigen::VectorXd& v);

/// Analytic Hessian of the objective (not of the Lagrangian).
[[nodiscard]] Eigen::MatrixXd distance_hessian(const Ellipsoid& e1, const Ellipsoid& e2,
                                               const Eigen::VectorXd& v);

/// Internal state of the SQP iteration on min G subject to ||v||^2 = 1.
struct SqpState {
  Eigen::VectorXd v;
  /// Lagrange multiplier estimate.
  double u = 0.0;
  /// l1 merit penalty, kept at least |u| + 1.
  double rho = 1.0;
  int iterations = 0;
  int function_evals = 0;
  bool converged = false;
  double kkt_residual = 0.0;
  double step_norm = 0.0;
};

[[nodiscard]] SqpState sqp_init(const Ellipsoid& e1, const Ellipsoid& e2,
                                const Eigen::VectorXd& v0);

/// One SQP step: solves the equality-constrained QP through its KKT system
/// (Hessian regularized by tau I doubling from 1e-8 when singular), then a
/// backtracking line search on the l1 merit function.
[[nodiscard]] SqpState sqp_iteration(const Ellipsoid& e1, const Ellipsoid& e2,
                                     SqpState state);

/// Distance between two ellipsoids by warm-startable SQP. Cold start is the
/// normalized center difference. Non-convergence is reported in the result,
/// never silently as a wrong sign.
[[nodiscard]] DistanceResult distance(const Ellipsoid& e1, const Ellipsoid& e2,
                                      const DistanceOptions& opts = {});

/// One distance sample along a branch pair.
struct BranchDistancePoint {
  double mu = 0.0;
  std::size_t index_a = 0;
  std::size_t index_b = 0;
  DistanceResult result;
};

struct BranchDistanceOptions {
  double h = 1.0;
  double tol = 1e-8;
  int max_iter = 200;
  /// Evaluate at every k-th usable point of the driving branch.
  int every_k = 1;
  /// Pairing window in mu between the two branches; nonpositive means
  /// 2 * continuation step is used.
  double pair_tol = 0.0;
  /// Chain each solve from the previous maximizer; disable to benchmark
  /// per-point cold starts.
  bool warm_start = true;
};

/// Sweeps the driving branch (a), pairing each usable point with the
/// nearest-mu stable point of branch (b), warm starting every solve from the
/// previous maximizer. Points without a covariance (non-stable) or without a
/// partner are skipped; failed solves are recorded, not fatal.
[[nodiscard]] std::vector<BranchDistancePoint> distance_along_branch(
    const Branch& branch_a, const std::vector<std::optional<Eigen::MatrixXd>>& cov_a,
    const Branch& branch_b, const std::vector<std::optional<Eigen::MatrixXd>>& cov_b,
    const BranchDistanceOptions& opts = {});

/// 64-point boundary polyline of a planar ellipsoid, rows (x1, x2) at angles
/// 2 pi k / n around the principal axes; degenerate shapes collapse to a
/// segment or point. Only defined for dimension 2.
[[nodiscard]] Eigen::MatrixXd ellipse_polyline(const Ellipsoid& e, int n_points = 64);

}  // namespace metacont
