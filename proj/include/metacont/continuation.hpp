#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "metacont/models.hpp"

namespace metacont {

enum class Stability { Stable, Saddle, Unstable, Marginal };

enum class EventKind { Fold, Hopf, NeutralSaddleSuspect };

[[nodiscard]] std::string to_string(Stability s);
[[nodiscard]] std::string to_string(EventKind k);

/// One accepted point of an equilibrium branch.
struct BranchPoint {
  Eigen::VectorXd x;
  double mu = 0.0;
  Eigen::MatrixXd jacobian;
  /// Sorted by descending real part.
  Eigen::VectorXcd eigenvalues;
  Stability stability = Stability::Stable;
  /// Unit tangent in (x, mu) space, dimension n + 1.
  Eigen::VectorXd tangent;
};

/// A stability/bifurcation event bracketed between points index and index + 1
/// and refined by bisection along the branch.
struct BranchEvent {
  std::size_t index = 0;
  EventKind kind = EventKind::Fold;
  double mu = 0.0;
  Eigen::VectorXd x;
  /// |test function| at the refined location.
  double test_value = 0.0;
};

struct Branch {
  std::vector<BranchPoint> points;
  std::vector<BranchEvent> events;
  /// The branch returned to within one step of its start (isola).
  bool closed = false;
  /// Why continuation stopped: "steps", "parameter-bound", "closed-loop" or
  /// "corrector-failure: ...".
  std::string termination;
};

struct ContinuationOptions {
  double step = 1e-3;
  int n_steps = 1000;
  double newton_tol = 1e-10;
  int newton_max_iter = 25;
  /// Initial direction of the mu component of the tangent: +1 or -1.
  int direction = +1;
  double mu_min = -std::numeric_limits<double>::infinity();
  double mu_max = std::numeric_limits<double>::infinity();
  /// Fixed step by default; if true, halve on corrector failure and double on
  /// easy steps within [min_step, 10 * step].
  bool adaptive = false;
  double min_step = 1e-6;
  /// Half width of the eigenvalue band classified as marginal.
  double marginal_band = 1e-8;
  bool detect_closed_loop = true;
  /// Run event detection and refinement after continuation.
  bool detect_events = true;
  double event_mu_tol = 1e-6;
  double event_test_tol = 1e-8;
};

/// Newton iteration for f(x; mu) = 0 from x0. Raises std::runtime_error on a
/// singular Jacobian or when max_iter is exceeded (message carries the last
/// residual norm).
[[nodiscard]] Eigen::VectorXd newton_equilibrium(const SdeSystem& system,
                                                 const Eigen::VectorXd& x0, double mu,
                                                 double tol = 1e-10, int max_iter = 25);

/// Classifies by eigenvalue real parts: stable below -marginal_band, marginal
/// within the band, saddle with real parts on both sides, unstable otherwise.
[[nodiscard]] Stability classify_stability(const Eigen::VectorXcd& eigenvalues,
                                           double marginal_band = 1e-8);

/// Pseudo-arclength continuation: unit-tangent predictor of length step,
/// Newton corrector in the hyperplane orthogonal to the tangent. Continues
/// through folds; each accepted point records Jacobian, eigenvalues,
/// stability and tangent.
[[nodiscard]] Branch continue_branch(const SdeSystem& system, const Eigen::VectorXd& x0,
                                     double mu0, const ContinuationOptions& opts = {});

/// Scans a branch for sign changes of det(A) (fold) and of the real part of
/// the leading complex eigenvalue pair (Hopf), then refines each bracket by
/// bisection along the chord between the bracketing points until the mu
/// bracket is below mu_tol and the test function is below test_tol.
/// Refined crossings whose eigenvalue pair turns out real are classified
/// NeutralSaddleSuspect.
[[nodiscard]] std::vector<BranchEvent> detect_events(const SdeSystem& system,
                                                     const Branch& branch,
                                                     double mu_tol = 1e-6,
                                                     double test_tol = 1e-8,
                                                     double newton_tol = 1e-10);

}  // namespace metacont
