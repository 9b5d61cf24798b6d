#include "metacont/ellipsoid.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>

#include "metacont/lyapunov.hpp"

namespace metacont {

namespace {

double clamped_quadratic(const Eigen::MatrixXd& q, const Eigen::VectorXd& v) {
  return std::max(0.0, v.dot(q * v));
}

/// Square-root term value, gradient and Hessian contribution of one ellipsoid;
/// the degenerate case s = 0 contributes zero derivatives (subgradient choice).
struct SqrtTerm {
  double s = 0.0;
  Eigen::VectorXd grad;
  Eigen::MatrixXd hess;
};

SqrtTerm sqrt_term(const Eigen::MatrixXd& q, const Eigen::VectorXd& v, bool with_hess) {
  SqrtTerm term;
  const Eigen::VectorXd qv = q * v;
  term.s = std::sqrt(std::max(0.0, v.dot(qv)));
  if (term.s > 0.0) {
    term.grad = qv / term.s;
    if (with_hess) {
      term.hess = q / term.s - (qv * qv.transpose()) / (term.s * term.s * term.s);
    }
  } else {
    term.grad = Eigen::VectorXd::Zero(v.size());
    if (with_hess) term.hess = Eigen::MatrixXd::Zero(v.size(), v.size());
  }
  return term;
}

}  // namespace

Ellipsoid make_ellipsoid(const Eigen::VectorXd& center,
                         const Eigen::Ref<const Eigen::MatrixXd>& covariance, double h,
                         double rank_tol) {
  if (h <= 0.0) {
    throw std::invalid_argument("make_ellipsoid: confidence parameter h must be positive");
  }
  if (covariance.rows() != covariance.cols() || covariance.rows() != center.size()) {
    throw std::invalid_argument("make_ellipsoid: covariance/center dimension mismatch");
  }
  Ellipsoid e;
  e.center = center;
  e.shape = h * h * 0.5 * (covariance + covariance.transpose());
  e.h = h;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(e.shape);
  const double scale = std::max(1.0, eig.eigenvalues().cwiseAbs().maxCoeff());
  if (eig.eigenvalues().minCoeff() < -rank_tol * scale) {
    std::ostringstream msg;
    msg << "make_ellipsoid: shape matrix has negative eigenvalue "
        << eig.eigenvalues().minCoeff() << ", not a covariance";
    throw std::domain_error(msg.str());
  }
  auto [rank, svals] = covariance_degeneracy(e.shape, rank_tol);
  (void)svals;
  e.rank = rank;
  return e;
}

double support_function(const Ellipsoid& e, const Eigen::VectorXd& v) {
  return v.dot(e.center) + std::sqrt(clamped_quadratic(e.shape, v));
}

double distance_objective(const Ellipsoid& e1, const Ellipsoid& e2,
                          const Eigen::VectorXd& v) {
  return -v.dot(e1.center) + std::sqrt(clamped_quadratic(e1.shape, v)) +
         v.dot(e2.center) + std::sqrt(clamped_quadratic(e2.shape, v));
}

Eigen::VectorXd distance_gradient(const Ellipsoid& e1, const Ellipsoid& e2,
                                  const Eigen::VectorXd& v) {
  const SqrtTerm t1 = sqrt_term(e1.shape, v, false);
  const SqrtTerm t2 = sqrt_term(e2.shape, v, false);
  return -e1.center + t1.grad + e2.center + t2.grad;
}

Eigen::MatrixXd distance_hessian(const Ellipsoid& e1, const Ellipsoid& e2,
                                 const Eigen::VectorXd& v) {
  const SqrtTerm t1 = sqrt_term(e1.shape, v, true);
  const SqrtTerm t2 = sqrt_term(e2.shape, v, true);
  return t1.hess + t2.hess;
}

SqpState sqp_init(const Ellipsoid& e1, const Ellipsoid& e2, const Eigen::VectorXd& v0) {
  if (v0.size() != e1.center.size()) {
    throw std::invalid_argument("sqp_init: start vector has wrong dimension");
  }
  const double norm = v0.norm();
  if (norm == 0.0) {
    throw std::invalid_argument("sqp_init: start vector must be nonzero");
  }
  SqpState state;
  state.v = v0 / norm;
  const Eigen::VectorXd grad = distance_gradient(e1, e2, state.v);
  // Least-squares multiplier for the constraint gradient 2v at ||v|| = 1.
  state.u = -0.5 * state.v.dot(grad);
  state.rho = std::abs(state.u) + 1.0;
  state.kkt_residual = (grad + 2.0 * state.u * state.v).norm();
  return state;
}

SqpState sqp_iteration(const Ellipsoid& e1, const Ellipsoid& e2, SqpState state) {
  const int n = static_cast<int>(state.v.size());
  const Eigen::VectorXd& v = state.v;
  const double g = v.squaredNorm() - 1.0;
  const Eigen::VectorXd grad_g = 2.0 * v;
  const Eigen::VectorXd grad = distance_gradient(e1, e2, v);
  const Eigen::MatrixXd hess_lagrangian =
      distance_hessian(e1, e2, v) + 2.0 * state.u * Eigen::MatrixXd::Identity(n, n);

  Eigen::VectorXd w;
  double lambda = state.u;
  double rho = state.rho;
  double directional = 0.0;
  double tau = 0.0;
  bool solved = false;
  while (!solved) {
    Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(n + 1, n + 1);
    kkt.topLeftCorner(n, n) = hess_lagrangian;
    kkt.topLeftCorner(n, n).diagonal().array() += tau;
    kkt.topRightCorner(n, 1) = grad_g;
    kkt.bottomLeftCorner(1, n) = grad_g.transpose();
    Eigen::VectorXd rhs(n + 1);
    rhs.head(n) = -grad;
    rhs[n] = -g;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(kkt);
    Eigen::VectorXd sol;
    if (lu.isInvertible()) {
      sol = lu.solve(rhs);
    }
    if (sol.size() == n + 1 && sol.allFinite()) {
      w = sol.head(n);
      lambda = sol[n];
      rho = std::max(state.rho, std::abs(lambda) + 1.0);
      directional = grad.dot(w) - rho * std::abs(g);
      if (directional < 0.0 || w.norm() <= 1e-14) {
        solved = true;
        break;
      }
    }
    tau = (tau == 0.0) ? 1e-8 : 2.0 * tau;
    if (tau > 1e12) {
      // The QP cannot produce a usable step; report the stall.
      state.iterations += 1;
      state.converged = false;
      state.step_norm = 0.0;
      return state;
    }
  }

  // Backtracking line search on the l1 merit function G + rho |g|.
  const double merit_0 = distance_objective(e1, e2, v) + rho * std::abs(g);
  state.function_evals += 1;
  const double c1 = 1e-4;
  double alpha = 1.0;
  Eigen::VectorXd v_next = v + w;
  for (int trial = 0; trial < 40; ++trial) {
    v_next = v + alpha * w;
    const double merit =
        distance_objective(e1, e2, v_next) + rho * std::abs(v_next.squaredNorm() - 1.0);
    state.function_evals += 1;
    if (merit <= merit_0 + c1 * alpha * directional) break;
    alpha *= 0.5;
  }

  state.v = v_next;
  state.u = lambda;
  state.rho = rho;
  state.iterations += 1;
  state.step_norm = w.norm();

  const double g_next = state.v.squaredNorm() - 1.0;
  const Eigen::VectorXd grad_next = distance_gradient(e1, e2, state.v);
  state.kkt_residual = std::max(
      (grad_next + 2.0 * state.u * state.v).norm(), std::abs(g_next));
  state.converged = state.step_norm <= 1e-8 && state.kkt_residual <= 1e-8;
  return state;
}

DistanceResult distance(const Ellipsoid& e1, const Ellipsoid& e2,
                        const DistanceOptions& opts) {
  if (e1.center.size() != e2.center.size()) {
    throw std::invalid_argument("distance: ellipsoid dimensions differ");
  }
  const int n = static_cast<int>(e1.center.size());

  std::vector<Eigen::VectorXd> starts;
  if (opts.v_init && opts.v_init->norm() > 0.0) {
    starts.push_back(*opts.v_init);
  } else {
    Eigen::VectorXd v0 = e1.center - e2.center;
    if (v0.norm() == 0.0) v0 = Eigen::VectorXd::Unit(n, 0);
    starts.push_back(v0);
  }
  if (opts.multistart > 0) {
    std::mt19937_64 rng(opts.multistart_seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (int m = 0; m < opts.multistart; ++m) {
      Eigen::VectorXd v(n);
      do {
        for (int i = 0; i < n; ++i) v[i] = normal(rng);
      } while (v.norm() == 0.0);
      starts.push_back(v);
    }
  }

  DistanceResult best;
  bool have_best = false;
  for (const Eigen::VectorXd& v0 : starts) {
    SqpState state = sqp_init(e1, e2, v0);
    while (state.iterations < opts.max_iter) {
      state = sqp_iteration(e1, e2, state);
      state.converged = state.step_norm <= opts.tol && state.kkt_residual <= opts.tol;
      if (state.converged) break;
      if (state.step_norm == 0.0) break;  // regularization gave up
    }

    DistanceResult result;
    const double norm = state.v.norm();
    Eigen::VectorXd v_star = norm > 0.0 ? Eigen::VectorXd(state.v / norm) : state.v;
    result.v_star = v_star;
    // Degree-1 homogeneity of G makes evaluation at the normalized maximizer
    // exact regardless of the constraint residual.
    result.delta = -distance_objective(e1, e2, v_star);
    result.iterations = state.iterations;
    result.function_evals = state.function_evals + 1;
    result.converged = state.converged;
    result.kkt_residual = state.kkt_residual;

    if (!have_best) {
      best = result;
      have_best = true;
    } else if (result.converged && (!best.converged || result.delta > best.delta)) {
      best = result;
    }
  }
  return best;
}

std::vector<BranchDistancePoint> distance_along_branch(
    const Branch& branch_a, const std::vector<std::optional<Eigen::MatrixXd>>& cov_a,
    const Branch& branch_b, const std::vector<std::optional<Eigen::MatrixXd>>& cov_b,
    const BranchDistanceOptions& opts) {
  if (cov_a.size() != branch_a.points.size() || cov_b.size() != branch_b.points.size()) {
    throw std::invalid_argument(
        "distance_along_branch: covariance list must parallel the branch points");
  }
  if (opts.every_k < 1) {
    throw std::invalid_argument("distance_along_branch: every_k must be >= 1");
  }

  double pair_tol = opts.pair_tol;
  if (pair_tol <= 0.0) {
    double max_dmu = 0.0;
    for (std::size_t i = 0; i + 1 < branch_b.points.size(); ++i) {
      max_dmu = std::max(max_dmu,
                         std::abs(branch_b.points[i + 1].mu - branch_b.points[i].mu));
    }
    pair_tol = max_dmu > 0.0 ? 2.0 * max_dmu : 2e-3;
  }

  std::vector<BranchDistancePoint> out;
  std::optional<Eigen::VectorXd> warm;
  for (std::size_t ia = 0; ia < branch_a.points.size(); ia += opts.every_k) {
    if (!cov_a[ia]) continue;
    const double mu = branch_a.points[ia].mu;

    std::size_t ib_best = branch_b.points.size();
    double best_gap = pair_tol;
    for (std::size_t ib = 0; ib < branch_b.points.size(); ++ib) {
      if (!cov_b[ib]) continue;
      const double gap = std::abs(branch_b.points[ib].mu - mu);
      if (gap <= best_gap) {
        best_gap = gap;
        ib_best = ib;
      }
    }
    if (ib_best == branch_b.points.size()) continue;

    BranchDistancePoint point;
    point.mu = mu;
    point.index_a = ia;
    point.index_b = ib_best;
    try {
      const Ellipsoid ea = make_ellipsoid(branch_a.points[ia].x, *cov_a[ia], opts.h);
      const Ellipsoid eb =
          make_ellipsoid(branch_b.points[ib_best].x, *cov_b[ib_best], opts.h);
      DistanceOptions dist_opts;
      dist_opts.tol = opts.tol;
      dist_opts.max_iter = opts.max_iter;
      if (opts.warm_start) dist_opts.v_init = warm;
      point.result = distance(ea, eb, dist_opts);
      if (point.result.converged) warm = point.result.v_star;
    } catch (const std::exception&) {
      point.result.converged = false;
      point.result.delta = std::numeric_limits<double>::quiet_NaN();
    }
    out.push_back(std::move(point));
  }
  return out;
}

Eigen::MatrixXd ellipse_polyline(const Ellipsoid& e, int n_points) {
  if (e.center.size() != 2) {
    throw std::invalid_argument("ellipse_polyline: only defined in dimension 2");
  }
  if (n_points < 2) {
    throw std::invalid_argument("ellipse_polyline: need at least 2 points");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(e.shape);
  const Eigen::VectorXd axes = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  const Eigen::MatrixXd& frame = eig.eigenvectors();
  Eigen::MatrixXd out(n_points, 2);
  const double two_pi = 2.0 * std::numbers::pi;
  for (int k = 0; k < n_points; ++k) {
    const double theta = two_pi * static_cast<double>(k) / static_cast<double>(n_points);
    Eigen::Vector2d unit(axes[0] * std::cos(theta), axes[1] * std::sin(theta));
    out.row(k) = (e.center + frame * unit).transpose();
  }
  return out;
}

}  // namespace metacont
