#include "metacont/kramers.hpp"

#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace metacont {

namespace {

void check_symmetric(const Eigen::Ref<const Eigen::MatrixXd>& a, const char* where) {
  if (a.rows() != a.cols()) {
    throw std::invalid_argument(std::string(where) + ": matrix must be square");
  }
  const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
  const double asym = (a - a.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-10 * scale) {
    std::ostringstream msg;
    msg << where << ": matrix is not symmetric (max asymmetry " << asym << ")";
    throw std::invalid_argument(msg.str());
  }
}

/// Hessian of the potential, available as minus the drift Jacobian.
Eigen::MatrixXd potential_hessian(const SdeSystem& system, const Eigen::VectorXd& x,
                                  double mu) {
  Eigen::MatrixXd h = -eval_jacobian(system, x, mu);
  return 0.5 * (h + h.transpose()).eval();
}

void check_equilibrium(const SdeSystem& system, const Eigen::VectorXd& x, double mu,
                       const char* label) {
  const double residual = eval_drift(system, x, mu).norm();
  if (residual > 1e-6) {
    std::ostringstream msg;
    msg << "eyring_kramers_time: " << label << " is not an equilibrium at mu = " << mu
        << " (drift norm " << residual << ")";
    throw std::domain_error(msg.str());
  }
}

/// Assembles the estimate once the unstable saddle rate is known; validates
/// the determinant signs implied by the index of each critical point.
KramersEstimate assemble_estimate(const SdeSystem& system, const Eigen::VectorXd& x_star,
                                  const Eigen::VectorXd& z_star, double mu, double sigma,
                                  double lambda_unstable, int rayleigh_iters) {
  KramersEstimate est;
  est.x_star = x_star;
  est.z_star = z_star;
  est.mu = mu;
  est.sigma = sigma;
  est.lambda_unstable = lambda_unstable;
  est.rayleigh_iters = rayleigh_iters;

  est.barrier = system.potential(z_star, mu) - system.potential(x_star, mu);
  if (est.barrier <= 0.0) {
    std::ostringstream msg;
    msg << "eyring_kramers_time: nonpositive barrier " << est.barrier
        << " between minimum and saddle at mu = " << mu;
    throw std::domain_error(msg.str());
  }
  est.det_min = lu_determinant(potential_hessian(system, x_star, mu));
  est.det_saddle = lu_determinant(potential_hessian(system, z_star, mu));
  if (est.det_min <= 0.0) {
    throw std::domain_error(
        "eyring_kramers_time: Hessian determinant at the minimum is not positive");
  }
  if (est.det_saddle >= 0.0) {
    throw std::domain_error(
        "eyring_kramers_time: Hessian determinant at the saddle is not negative");
  }
  if (lambda_unstable <= 0.0) {
    throw std::domain_error("eyring_kramers_time: unstable rate must be positive");
  }

  est.expected_time = 2.0 * std::numbers::pi / lambda_unstable *
                      std::sqrt(std::abs(est.det_saddle) / est.det_min) *
                      std::exp(2.0 * est.barrier / (sigma * sigma));
  const double log_term = std::abs(std::log(sigma * sigma / 2.0));
  est.correction_bound = sigma * log_term * std::sqrt(log_term);
  return est;
}

}  // namespace

double lu_determinant(const Eigen::Ref<const Eigen::MatrixXd>& a) {
  if (a.rows() != a.cols()) {
    throw std::invalid_argument("lu_determinant: matrix must be square");
  }
  if (a.rows() == 0) return 1.0;
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(a);
  double det = static_cast<double>(lu.permutationP().determinant());
  for (int i = 0; i < a.rows(); ++i) {
    const double pivot = lu.matrixLU()(i, i);
    if (std::abs(pivot) < 1e-300) return 0.0;
    det *= pivot;
  }
  return det;
}

RayleighResult rayleigh_leading_eigen(const Eigen::Ref<const Eigen::MatrixXd>& a,
                                      const Eigen::VectorXd& v0, double lambda0,
                                      double tol, int max_iter) {
  check_symmetric(a, "rayleigh_leading_eigen");
  if (v0.size() != a.rows() || v0.norm() == 0.0) {
    throw std::invalid_argument("rayleigh_leading_eigen: invalid start vector");
  }
  const int n = static_cast<int>(a.rows());
  RayleighResult result;
  Eigen::VectorXd v = v0 / v0.norm();
  double lambda = lambda0;
  for (int iter = 1; iter <= max_iter; ++iter) {
    Eigen::MatrixXd shifted = a;
    shifted.diagonal().array() -= lambda;
    Eigen::VectorXd w = Eigen::PartialPivLU<Eigen::MatrixXd>(shifted).solve(v);
    if (!w.allFinite() || w.norm() == 0.0) {
      // The shift hit an eigenvalue exactly; nudge it off the spectrum.
      lambda += 1e-12 * std::max(1.0, std::abs(lambda));
      shifted = a;
      shifted.diagonal().array() -= lambda;
      w = Eigen::PartialPivLU<Eigen::MatrixXd>(shifted).solve(v);
      if (!w.allFinite() || w.norm() == 0.0) {
        lambda += 1e-6 * std::max(1.0, std::abs(lambda));
        continue;
      }
    }
    v = w / w.norm();
    lambda = v.dot(a * v);
    result.iterations = iter;
    result.residual = (a * v - lambda * v).norm();
    if (result.residual <= tol) {
      result.lambda = lambda;
      result.v = v;
      return result;
    }
  }

  // Iteration cap reached: fall back to the full symmetric decomposition and
  // return the eigenpair nearest the last shift.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (a + a.transpose()));
  if (eig.info() != Eigen::Success) {
    throw std::runtime_error("rayleigh_leading_eigen: fallback decomposition failed");
  }
  int best = 0;
  for (int i = 1; i < n; ++i) {
    if (std::abs(eig.eigenvalues()[i] - lambda) < std::abs(eig.eigenvalues()[best] - lambda)) {
      best = i;
    }
  }
  result.lambda = eig.eigenvalues()[best];
  result.v = eig.eigenvectors().col(best);
  result.residual = (a * result.v - result.lambda * result.v).norm();
  result.used_fallback = true;
  return result;
}

KramersEstimate eyring_kramers_time(const SdeSystem& system, const Eigen::VectorXd& x_star,
                                    const Eigen::VectorXd& z_star, double mu, double sigma) {
  if (!system.potential) {
    throw std::invalid_argument(
        "eyring_kramers_time: system has no potential (gradient systems only)");
  }
  if (sigma <= 0.0) {
    throw std::invalid_argument("eyring_kramers_time: sigma must be positive");
  }
  check_equilibrium(system, x_star, mu, "x_star");
  check_equilibrium(system, z_star, mu, "z_star");

  const Eigen::MatrixXd h_min = potential_hessian(system, x_star, mu);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig_min(h_min);
  if (eig_min.eigenvalues().minCoeff() <= 0.0) {
    throw std::domain_error("eyring_kramers_time: x_star is not a local minimum");
  }
  const Eigen::MatrixXd h_saddle = potential_hessian(system, z_star, mu);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig_saddle(h_saddle);
  int negatives = 0;
  for (int i = 0; i < eig_saddle.eigenvalues().size(); ++i) {
    if (eig_saddle.eigenvalues()[i] < 0.0) ++negatives;
  }
  if (negatives != 1) {
    std::ostringstream msg;
    msg << "eyring_kramers_time: z_star has " << negatives
        << " unstable directions, expected exactly 1";
    throw std::domain_error(msg.str());
  }

  const double lambda_unstable = -eig_saddle.eigenvalues().minCoeff();
  return assemble_estimate(system, x_star, z_star, mu, sigma, lambda_unstable, 0);
}

std::vector<KramersEstimate> kramers_along_branch(const SdeSystem& system,
                                                  const Branch& minima,
                                                  const Branch& saddles, double sigma,
                                                  double pair_tol) {
  if (pair_tol <= 0.0) {
    double max_dmu = 0.0;
    for (std::size_t i = 0; i + 1 < saddles.points.size(); ++i) {
      max_dmu = std::max(max_dmu,
                         std::abs(saddles.points[i + 1].mu - saddles.points[i].mu));
    }
    pair_tol = max_dmu > 0.0 ? 2.0 * max_dmu : 2e-3;
  }

  std::vector<KramersEstimate> estimates;
  bool have_warm = false;
  Eigen::VectorXd warm_v;
  double warm_lambda = 0.0;
  for (const BranchPoint& min_point : minima.points) {
    if (min_point.stability != Stability::Stable) continue;
    const double mu = min_point.mu;

    std::size_t best = saddles.points.size();
    double best_gap = pair_tol;
    for (std::size_t i = 0; i < saddles.points.size(); ++i) {
      const double gap = std::abs(saddles.points[i].mu - mu);
      if (gap <= best_gap) {
        best_gap = gap;
        best = i;
      }
    }
    if (best == saddles.points.size()) continue;
    const Eigen::VectorXd& z = saddles.points[best].x;

    try {
      KramersEstimate est;
      if (have_warm) {
        const Eigen::MatrixXd h_saddle = potential_hessian(system, z, mu);
        const RayleighResult rq =
            rayleigh_leading_eigen(h_saddle, warm_v, warm_lambda, 1e-12, 50);
        if (rq.lambda >= 0.0) {
          // The tracked eigenvalue left the unstable half line; re-anchor.
          have_warm = false;
        } else {
          est = assemble_estimate(system, min_point.x, z, mu, sigma, -rq.lambda,
                                  rq.iterations);
          warm_v = rq.v;
          warm_lambda = rq.lambda;
        }
      }
      if (!have_warm) {
        est = eyring_kramers_time(system, min_point.x, z, mu, sigma);
        const Eigen::MatrixXd h_saddle = potential_hessian(system, z, mu);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(h_saddle);
        warm_lambda = eig.eigenvalues().minCoeff();
        warm_v = eig.eigenvectors().col(0);
        have_warm = true;
      }
      estimates.push_back(std::move(est));
    } catch (const std::exception&) {
      // Unusable pairing at this mu; skip the point, keep the sweep alive.
      continue;
    }
  }
  return estimates;
}

}  // namespace metacont
