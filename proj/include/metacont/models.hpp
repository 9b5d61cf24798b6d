#pragma once

#include <Eigen/Dense>

#include <functional>
#include <string>

namespace metacont {

/// How the diffusion matrix depends on the state.
enum class NoiseMode { AdditiveConstant, StateDependent };

/// Noise level and structure tag for a simulation or covariance computation.
struct NoiseSpec {
  double sigma = 0.0;
  NoiseMode mode = NoiseMode::AdditiveConstant;
};

/// Parameterized SDE  dx = f(x; mu) dt + sigma F(x; mu) dW  with optional
/// analytic Jacobian and, for gradient systems, a potential with f = -grad U.
struct SdeSystem {
  int dim_state = 0;
  int dim_noise = 0;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&, double)> drift;
  std::function<Eigen::MatrixXd(const Eigen::VectorXd&, double)> diffusion;
  /// Analytic Jacobian of the drift; empty means finite differences are used.
  std::function<Eigen::MatrixXd(const Eigen::VectorXd&, double)> jacobian;
  /// Present only for gradient systems.
  std::function<double(const Eigen::VectorXd&, double)> potential;
  /// States live in the closed positive orthant (population models).
  bool nonnegative_domain = false;
  std::string name;
};

/// Fixed parameters of the two-population neural competition model.
struct Neural2Params {
  double beta = 1.1;
  double g = 0.5;
  double r = 10.0;
  double theta = 0.2;
  double y1 = 0.7;
  double y2 = 0.75;
};

/// Fixed parameters of the Rosenzweig-MacArthur predator-prey model; the
/// continuation parameter is the prey carrying capacity gamma.
struct RmParams {
  double beta = 3.0;
  double m = 1.0;
};

/// Evaluates the drift, rejecting non-finite output with a diagnostic that
/// names the offending component.
[[nodiscard]] Eigen::VectorXd eval_drift(const SdeSystem& system,
                                         const Eigen::VectorXd& x, double mu);

/// Analytic Jacobian when supplied, otherwise second order central
/// differences with step sqrt(eps) * max(1, |x_i|) per component.
[[nodiscard]] Eigen::MatrixXd eval_jacobian(const SdeSystem& system,
                                            const Eigen::VectorXd& x, double mu);

/// Logistic gain 1 / (1 + exp(-r (u - theta))); strictly increasing, range (0,1).
[[nodiscard]] double sigmoid_gain(double u, double r, double theta);

/// Drift of the neural competition fast subsystem; mu is the input current I_c.
[[nodiscard]] Eigen::VectorXd neural_drift(const Eigen::VectorXd& x, double mu,
                                           const Neural2Params& p = {});

/// Rosenzweig-MacArthur drift in the standard grouping
/// x' = x (1 - x/gamma) - x y / (1 + x),  y' = beta x y / (1 + x) - m y.
[[nodiscard]] Eigen::VectorXd rm_drift(const Eigen::VectorXd& x, double gamma,
                                       const RmParams& p = {});

/// Symmetric PSD fluctuation matrix B(x, y) of the finite-population
/// expansion; the simulated diffusion is any factor with Phi Phi^T = B.
[[nodiscard]] Eigen::MatrixXd rm_noise_matrix(const Eigen::VectorXd& x, double gamma,
                                              const RmParams& p = {});

[[nodiscard]] SdeSystem make_pitchfork();
[[nodiscard]] SdeSystem make_neural2(const Neural2Params& p = {});
[[nodiscard]] SdeSystem make_rosenzweig_macarthur(const RmParams& p = {});

/// Builds a built-in model from its identifier: "pitchfork", "neural2" or
/// "rosenzweig-macarthur". Unknown names raise std::invalid_argument.
[[nodiscard]] SdeSystem make_builtin(const std::string& name);

}  // namespace metacont
