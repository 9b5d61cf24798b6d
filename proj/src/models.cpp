#include "metacont/models.hpp"

#include "metacont/spectral.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace metacont {

namespace {

void check_dim(const char* where, const Eigen::VectorXd& x, int dim) {
  if (static_cast<int>(x.size()) != dim) {
    std::ostringstream msg;
    msg << where << ": state has " << x.size() << " components, expected " << dim;
    throw std::invalid_argument(msg.str());
  }
}

}  // namespace

Eigen::VectorXd eval_drift(const SdeSystem& system, const Eigen::VectorXd& x, double mu) {
  check_dim("eval_drift", x, system.dim_state);
  Eigen::VectorXd f = system.drift(x, mu);
  for (int i = 0; i < f.size(); ++i) {
    if (!std::isfinite(f[i])) {
      std::ostringstream msg;
      msg << "eval_drift: component " << (i + 1) << " of " << system.name
          << " is non-finite at mu = " << mu;
      throw std::domain_error(msg.str());
    }
  }
  return f;
}

Eigen::MatrixXd eval_jacobian(const SdeSystem& system, const Eigen::VectorXd& x, double mu) {
  check_dim("eval_jacobian", x, system.dim_state);
  if (system.jacobian) {
    return system.jacobian(x, mu);
  }
  const int n = system.dim_state;
  const double root_eps = std::sqrt(std::numeric_limits<double>::epsilon());
  Eigen::MatrixXd jac(n, n);
  Eigen::VectorXd xp = x, xm = x;
  for (int j = 0; j < n; ++j) {
    const double step = root_eps * std::max(1.0, std::abs(x[j]));
    xp[j] = x[j] + step;
    xm[j] = x[j] - step;
    jac.col(j) = (eval_drift(system, xp, mu) - eval_drift(system, xm, mu)) / (2.0 * step);
    xp[j] = x[j];
    xm[j] = x[j];
  }
  return jac;
}

double sigmoid_gain(double u, double r, double theta) {
  return 1.0 / (1.0 + std::exp(-r * (u - theta)));
}

Eigen::VectorXd neural_drift(const Eigen::VectorXd& x, double mu, const Neural2Params& p) {
  Eigen::VectorXd f(2);
  f[0] = -x[0] + sigmoid_gain(mu - p.beta * x[1] - p.g * p.y1, p.r, p.theta);
  f[1] = -x[1] + sigmoid_gain(mu - p.beta * x[0] - p.g * p.y2, p.r, p.theta);
  return f;
}

Eigen::VectorXd rm_drift(const Eigen::VectorXd& x, double gamma, const RmParams& p) {
  const double holling = x[0] / (1.0 + x[0]);
  Eigen::VectorXd f(2);
  f[0] = x[0] * (1.0 - x[0] / gamma) - holling * x[1];
  f[1] = p.beta * holling * x[1] - p.m * x[1];
  return f;
}

Eigen::MatrixXd rm_noise_matrix(const Eigen::VectorXd& x, double gamma, const RmParams& p) {
  const double holling = x[0] / (1.0 + x[0]);
  const double cross = holling * x[1];
  Eigen::MatrixXd b(2, 2);
  b(0, 0) = x[0] * (1.0 + holling * x[1] - x[0] / gamma);
  b(0, 1) = -cross;
  b(1, 0) = -cross;
  b(1, 1) = x[1] * (p.beta * holling + p.m);
  return b;
}

SdeSystem make_pitchfork() {
  SdeSystem s;
  s.dim_state = 1;
  s.dim_noise = 1;
  s.name = "pitchfork";
  s.drift = [](const Eigen::VectorXd& x, double mu) {
    Eigen::VectorXd f(1);
    f[0] = mu * x[0] - x[0] * x[0] * x[0];
    return f;
  };
  s.jacobian = [](const Eigen::VectorXd& x, double mu) {
    Eigen::MatrixXd jac(1, 1);
    jac(0, 0) = mu - 3.0 * x[0] * x[0];
    return jac;
  };
  s.diffusion = [](const Eigen::VectorXd&, double) {
    return Eigen::MatrixXd::Identity(1, 1);
  };
  s.potential = [](const Eigen::VectorXd& x, double mu) {
    const double x2 = x[0] * x[0];
    return -0.5 * mu * x2 + 0.25 * x2 * x2;
  };
  return s;
}

SdeSystem make_neural2(const Neural2Params& p) {
  SdeSystem s;
  s.dim_state = 2;
  s.dim_noise = 2;
  s.name = "neural2";
  s.drift = [p](const Eigen::VectorXd& x, double mu) { return neural_drift(x, mu, p); };
  s.jacobian = [p](const Eigen::VectorXd& x, double mu) {
    // S' = r S (1 - S) for the logistic gain.
    const double s1 = sigmoid_gain(mu - p.beta * x[1] - p.g * p.y1, p.r, p.theta);
    const double s2 = sigmoid_gain(mu - p.beta * x[0] - p.g * p.y2, p.r, p.theta);
    Eigen::MatrixXd jac(2, 2);
    jac(0, 0) = -1.0;
    jac(0, 1) = -p.beta * p.r * s1 * (1.0 - s1);
    jac(1, 0) = -p.beta * p.r * s2 * (1.0 - s2);
    jac(1, 1) = -1.0;
    return jac;
  };
  // Correlated additive noise with structure F F^T = [[1, 0.4], [0.4, 1]].
  Eigen::MatrixXd structure(2, 2);
  structure << 1.0, 0.4, 0.4, 1.0;
  const Eigen::MatrixXd factor = structure.llt().matrixL();
  s.diffusion = [factor](const Eigen::VectorXd&, double) { return factor; };
  return s;
}

SdeSystem make_rosenzweig_macarthur(const RmParams& p) {
  SdeSystem s;
  s.dim_state = 2;
  s.dim_noise = 2;
  s.name = "rosenzweig-macarthur";
  s.nonnegative_domain = true;
  s.drift = [p](const Eigen::VectorXd& x, double gamma) { return rm_drift(x, gamma, p); };
  s.jacobian = [p](const Eigen::VectorXd& x, double gamma) {
    const double denom = 1.0 + x[0];
    const double dholling = 1.0 / (denom * denom);
    Eigen::MatrixXd jac(2, 2);
    jac(0, 0) = 1.0 - 2.0 * x[0] / gamma - x[1] * dholling;
    jac(0, 1) = -x[0] / denom;
    jac(1, 0) = p.beta * x[1] * dholling;
    jac(1, 1) = p.beta * x[0] / denom - p.m;
    return jac;
  };
  s.diffusion = [p](const Eigen::VectorXd& x, double gamma) {
    return psd_sqrt_factor(rm_noise_matrix(x, gamma, p));
  };
  return s;
}

SdeSystem make_builtin(const std::string& name) {
  if (name == "pitchfork") return make_pitchfork();
  if (name == "neural2") return make_neural2();
  if (name == "rosenzweig-macarthur") return make_rosenzweig_macarthur();
  throw std::invalid_argument("make_builtin: unknown model '" + name +
                              "' (expected pitchfork, neural2 or rosenzweig-macarthur)");
}

}  // namespace metacont
