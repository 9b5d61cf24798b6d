#include "metacont/continuation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "metacont/spectral.hpp"

namespace metacont {

std::string to_string(Stability s) {
  switch (s) {
    case Stability::Stable: return "stable";
    case Stability::Saddle: return "saddle";
    case Stability::Unstable: return "unstable";
    case Stability::Marginal: return "marginal";
  }
  return "unknown";
}

std::string to_string(EventKind k) {
  switch (k) {
    case EventKind::Fold: return "fold";
    case EventKind::Hopf: return "hopf";
    case EventKind::NeutralSaddleSuspect: return "neutral-saddle-suspect";
  }
  return "unknown";
}

namespace {

/// Parameter derivative of the drift by central differences.
Eigen::VectorXd drift_mu_derivative(const SdeSystem& system, const Eigen::VectorXd& x,
                                    double mu) {
  const double step =
      std::sqrt(std::numeric_limits<double>::epsilon()) * std::max(1.0, std::abs(mu));
  return (eval_drift(system, x, mu + step) - eval_drift(system, x, mu - step)) /
         (2.0 * step);
}

/// Solves the bordered system [A f_mu; t_ref^T] t = e_{n+1}; the solution has
/// positive inner product with t_ref and survives fold points, where A alone
/// is singular. Returns the normalized tangent.
Eigen::VectorXd bordered_tangent(const SdeSystem& system, const Eigen::VectorXd& x,
                                 double mu, const Eigen::VectorXd& t_ref) {
  const int n = system.dim_state;
  Eigen::MatrixXd m(n + 1, n + 1);
  m.topLeftCorner(n, n) = eval_jacobian(system, x, mu);
  m.topRightCorner(n, 1) = drift_mu_derivative(system, x, mu);
  m.bottomRows(1) = t_ref.transpose();
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n + 1);
  rhs[n] = 1.0;
  Eigen::FullPivLU<Eigen::MatrixXd> lu(m);
  Eigen::VectorXd t = lu.solve(rhs);
  if (!t.allFinite() || t.norm() == 0.0) {
    throw std::runtime_error("continuation: tangent system is singular");
  }
  const double consistency = (m * t - rhs).norm();
  if (consistency > 1e-6 * std::max(1.0, t.norm())) {
    throw std::runtime_error("continuation: tangent system is inconsistent");
  }
  return t / t.norm();
}

/// Newton corrector in the hyperplane through y_pred orthogonal to t: solves
/// f(x; mu) = 0, t^T (y - y_pred) = 0. Returns false on failure.
bool correct_on_hyperplane(const SdeSystem& system, const Eigen::VectorXd& t,
                           const Eigen::VectorXd& y_pred, double tol, int max_iter,
                           Eigen::VectorXd& y_out, std::string& why) {
  const int n = system.dim_state;
  Eigen::VectorXd y = y_pred;
  for (int iter = 0; iter < max_iter; ++iter) {
    const Eigen::VectorXd x = y.head(n);
    const double mu = y[n];
    Eigen::VectorXd residual(n + 1);
    try {
      residual.head(n) = eval_drift(system, x, mu);
    } catch (const std::exception& e) {
      why = e.what();
      return false;
    }
    residual[n] = t.dot(y - y_pred);
    if (residual.norm() < tol) {
      y_out = y;
      return true;
    }
    Eigen::MatrixXd m(n + 1, n + 1);
    try {
      m.topLeftCorner(n, n) = eval_jacobian(system, x, mu);
      m.topRightCorner(n, 1) = drift_mu_derivative(system, x, mu);
    } catch (const std::exception& e) {
      why = e.what();
      return false;
    }
    m.bottomRows(1) = t.transpose();
    Eigen::FullPivLU<Eigen::MatrixXd> lu(m);
    const Eigen::VectorXd delta = lu.solve(residual);
    if (!delta.allFinite()) {
      why = "singular corrector system";
      return false;
    }
    y -= delta;
  }
  // Accept a final iterate that meets the tolerance after the last update.
  double final_norm = std::numeric_limits<double>::quiet_NaN();
  try {
    Eigen::VectorXd residual(n + 1);
    residual.head(n) = eval_drift(system, y.head(n), y[n]);
    residual[n] = t.dot(y - y_pred);
    final_norm = residual.norm();
    if (final_norm < tol) {
      y_out = y;
      return true;
    }
  } catch (const std::exception& e) {
    why = e.what();
    return false;
  }
  std::ostringstream msg;
  msg << "no convergence in " << max_iter << " iterations, residual " << final_norm;
  why = msg.str();
  return false;
}

BranchPoint make_point(const SdeSystem& system, const Eigen::VectorXd& x, double mu,
                       const Eigen::VectorXd& tangent, double marginal_band) {
  BranchPoint p;
  p.x = x;
  p.mu = mu;
  p.jacobian = eval_jacobian(system, x, mu);
  p.eigenvalues = eigenvalues_dense(p.jacobian);
  p.stability = classify_stability(p.eigenvalues, marginal_band);
  p.tangent = tangent;
  return p;
}

Eigen::VectorXd stack(const Eigen::VectorXd& x, double mu) {
  Eigen::VectorXd y(x.size() + 1);
  y.head(x.size()) = x;
  y[x.size()] = mu;
  return y;
}

/// Real part of the leading complex-conjugate pair, or NaN when the spectrum
/// is entirely real.
double complex_pair_real_part(const Eigen::VectorXcd& eigenvalues) {
  for (int i = 0; i < eigenvalues.size(); ++i) {
    if (eigenvalues[i].imag() != 0.0) return eigenvalues[i].real();
  }
  return std::numeric_limits<double>::quiet_NaN();
}

double fold_test(const BranchPoint& p) { return p.jacobian.determinant(); }

struct ChordSample {
  Eigen::VectorXd x;
  double mu = 0.0;
  Eigen::VectorXcd eigenvalues;
};

/// Corrects the convex combination (1 - s) p_a + s p_b back onto the branch,
/// orthogonally to the chord.
bool sample_chord(const SdeSystem& system, const Eigen::VectorXd& ya,
                  const Eigen::VectorXd& yb, double s, double newton_tol,
                  ChordSample& out) {
  const Eigen::VectorXd chord = yb - ya;
  if (chord.norm() == 0.0) return false;
  const Eigen::VectorXd direction = chord / chord.norm();
  const Eigen::VectorXd y_pred = (1.0 - s) * ya + s * yb;
  Eigen::VectorXd y;
  std::string why;
  if (!correct_on_hyperplane(system, direction, y_pred, newton_tol, 25, y, why)) {
    return false;
  }
  out.x = y.head(y.size() - 1);
  out.mu = y[y.size() - 1];
  out.eigenvalues = eigenvalues_dense(eval_jacobian(system, out.x, out.mu));
  return true;
}

}  // namespace

Eigen::VectorXd newton_equilibrium(const SdeSystem& system, const Eigen::VectorXd& x0,
                                   double mu, double tol, int max_iter) {
  Eigen::VectorXd x = x0;
  double residual_norm = std::numeric_limits<double>::quiet_NaN();
  for (int iter = 0; iter <= max_iter; ++iter) {
    const Eigen::VectorXd f = eval_drift(system, x, mu);
    residual_norm = f.norm();
    if (residual_norm < tol) return x;
    if (iter == max_iter) break;
    const Eigen::MatrixXd jac = eval_jacobian(system, x, mu);
    Eigen::FullPivLU<Eigen::MatrixXd> lu(jac);
    if (!lu.isInvertible()) {
      std::ostringstream msg;
      msg << "newton_equilibrium: singular Jacobian at mu = " << mu << ", residual "
          << residual_norm;
      throw std::runtime_error(msg.str());
    }
    x -= lu.solve(f);
  }
  std::ostringstream msg;
  msg << "newton_equilibrium: no convergence in " << max_iter
      << " iterations at mu = " << mu << ", residual " << residual_norm;
  throw std::runtime_error(msg.str());
}

Stability classify_stability(const Eigen::VectorXcd& eigenvalues, double marginal_band) {
  bool any_marginal = false, any_positive = false, any_negative = false;
  for (int i = 0; i < eigenvalues.size(); ++i) {
    const double re = eigenvalues[i].real();
    if (std::abs(re) <= marginal_band) {
      any_marginal = true;
    } else if (re > 0.0) {
      any_positive = true;
    } else {
      any_negative = true;
    }
  }
  if (any_marginal) return Stability::Marginal;
  if (any_positive && any_negative) return Stability::Saddle;
  if (any_positive) return Stability::Unstable;
  return Stability::Stable;
}

Branch continue_branch(const SdeSystem& system, const Eigen::VectorXd& x0, double mu0,
                       const ContinuationOptions& opts) {
  if (opts.step <= 0.0) throw std::invalid_argument("continue_branch: step must be positive");
  if (opts.direction != 1 && opts.direction != -1) {
    throw std::invalid_argument("continue_branch: direction must be +1 or -1");
  }
  const int n = system.dim_state;
  Branch branch;

  Eigen::VectorXd x = newton_equilibrium(system, x0, mu0, opts.newton_tol,
                                         opts.newton_max_iter);
  Eigen::VectorXd t_ref = Eigen::VectorXd::Zero(n + 1);
  t_ref[n] = static_cast<double>(opts.direction);
  Eigen::VectorXd t = bordered_tangent(system, x, mu0, t_ref);
  branch.points.push_back(make_point(system, x, mu0, t, opts.marginal_band));
  const Eigen::VectorXd y_first = stack(x, mu0);

  double step = opts.step;
  Eigen::VectorXd y = y_first;
  branch.termination = "steps";
  for (int k = 0; k < opts.n_steps; ++k) {
    bool accepted = false;
    std::string why;
    Eigen::VectorXd y_next;
    while (true) {
      const Eigen::VectorXd y_pred = y + step * t;
      if (correct_on_hyperplane(system, t, y_pred, opts.newton_tol, opts.newton_max_iter,
                                y_next, why)) {
        accepted = true;
        break;
      }
      if (!opts.adaptive || step <= opts.min_step) break;
      step = std::max(0.5 * step, opts.min_step);
    }
    if (!accepted) {
      branch.termination = "corrector-failure: " + why;
      break;
    }

    const double mu_next = y_next[n];
    if (mu_next < opts.mu_min || mu_next > opts.mu_max) {
      branch.termination = "parameter-bound";
      break;
    }
    if (opts.detect_closed_loop && k >= 9 && (y_next - y_first).norm() <= step) {
      branch.closed = true;
      branch.termination = "closed-loop";
      break;
    }

    Eigen::VectorXd t_next;
    try {
      t_next = bordered_tangent(system, y_next.head(n), mu_next, t);
    } catch (const std::exception& e) {
      branch.termination = std::string("corrector-failure: ") + e.what();
      break;
    }
    branch.points.push_back(
        make_point(system, y_next.head(n), mu_next, t_next, opts.marginal_band));
    y = y_next;
    t = t_next;
    if (opts.adaptive && step < opts.step) {
      step = std::min(2.0 * step, opts.step);
    }
  }

  if (opts.detect_events && branch.points.size() >= 2) {
    branch.events = detect_events(system, branch, opts.event_mu_tol, opts.event_test_tol,
                                  opts.newton_tol);
  }
  return branch;
}

std::vector<BranchEvent> detect_events(const SdeSystem& system, const Branch& branch,
                                       double mu_tol, double test_tol, double newton_tol) {
  std::vector<BranchEvent> events;
  const auto& pts = branch.points;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    struct Candidate {
      EventKind kind;
      double lo, hi;
    };
    std::vector<Candidate> candidates;

    const double det_a = fold_test(pts[i]);
    const double det_b = fold_test(pts[i + 1]);
    if (det_a * det_b < 0.0) {
      candidates.push_back({EventKind::Fold, det_a, det_b});
    }
    const double hopf_a = complex_pair_real_part(pts[i].eigenvalues);
    const double hopf_b = complex_pair_real_part(pts[i + 1].eigenvalues);
    if (std::isfinite(hopf_a) && std::isfinite(hopf_b) && hopf_a * hopf_b < 0.0) {
      candidates.push_back({EventKind::Hopf, hopf_a, hopf_b});
    }

    const Eigen::VectorXd ya = stack(pts[i].x, pts[i].mu);
    const Eigen::VectorXd yb = stack(pts[i + 1].x, pts[i + 1].mu);
    for (const Candidate& cand : candidates) {
      double s_lo = 0.0, s_hi = 1.0;
      double mu_lo = pts[i].mu, mu_hi = pts[i + 1].mu;
      double test_lo = cand.lo;
      ChordSample mid;
      bool refined = false;
      for (int iter = 0; iter < 80; ++iter) {
        const double s_mid = 0.5 * (s_lo + s_hi);
        if (!sample_chord(system, ya, yb, s_mid, newton_tol, mid)) break;
        double test_mid;
        if (cand.kind == EventKind::Fold) {
          test_mid = eval_jacobian(system, mid.x, mid.mu).determinant();
        } else {
          test_mid = complex_pair_real_part(mid.eigenvalues);
          if (!std::isfinite(test_mid)) {
            // The pair became real inside the bracket; treat the real part of
            // the leading eigenvalue as the test to keep bisecting.
            test_mid = mid.eigenvalues[0].real();
          }
        }
        if (test_lo * test_mid <= 0.0) {
          s_hi = s_mid;
          mu_hi = mid.mu;
        } else {
          s_lo = s_mid;
          mu_lo = mid.mu;
          test_lo = test_mid;
        }
        if ((std::abs(mu_hi - mu_lo) < mu_tol || s_hi - s_lo < 1e-14) &&
            std::abs(test_mid) < test_tol) {
          refined = true;
          break;
        }
      }
      if (!refined && mid.x.size() == 0) continue;

      BranchEvent event;
      event.index = i;
      event.kind = cand.kind;
      event.mu = mid.mu;
      event.x = mid.x;
      if (cand.kind == EventKind::Hopf) {
        const double re = complex_pair_real_part(mid.eigenvalues);
        if (!std::isfinite(re)) {
          event.kind = EventKind::NeutralSaddleSuspect;
          event.test_value = std::abs(mid.eigenvalues[0].real());
        } else {
          double imag_max = 0.0;
          for (int j = 0; j < mid.eigenvalues.size(); ++j) {
            imag_max = std::max(imag_max, std::abs(mid.eigenvalues[j].imag()));
          }
          if (imag_max < 1e-8) event.kind = EventKind::NeutralSaddleSuspect;
          event.test_value = std::abs(re);
        }
      } else {
        event.test_value = std::abs(eval_jacobian(system, mid.x, mid.mu).determinant());
      }
      events.push_back(std::move(event));
    }
  }
  return events;
}

}  // namespace metacont
