#include "metacont/spectral.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <sstream>
#include <stdexcept>

namespace metacont {

Eigen::VectorXcd eigenvalues_dense(const Eigen::Ref<const Eigen::MatrixXd>& a) {
  if (a.rows() != a.cols()) {
    std::ostringstream msg;
    msg << "eigenvalues_dense: matrix is " << a.rows() << "x" << a.cols();
    throw std::invalid_argument(msg.str());
  }
  Eigen::EigenSolver<Eigen::MatrixXd> solver(a, /*computeEigenvectors=*/false);
  if (solver.info() != Eigen::Success) {
    throw std::runtime_error("eigenvalues_dense: QR iteration did not converge");
  }
  Eigen::VectorXcd ev = solver.eigenvalues();
  std::sort(ev.data(), ev.data() + ev.size(),
            [](const std::complex<double>& p, const std::complex<double>& q) {
              if (p.real() != q.real()) return p.real() > q.real();
              return p.imag() > q.imag();
            });
  return ev;
}

double max_real_part(const Eigen::VectorXcd& eigenvalues) {
  if (eigenvalues.size() == 0) {
    throw std::invalid_argument("max_real_part: empty spectrum");
  }
  return eigenvalues.real().maxCoeff();
}

Eigen::MatrixXd psd_sqrt_factor(const Eigen::Ref<const Eigen::MatrixXd>& s,
                                double clamp_tol) {
  if (s.rows() != s.cols()) {
    throw std::invalid_argument("psd_sqrt_factor: matrix is not square");
  }
  const Eigen::MatrixXd sym = 0.5 * (s + s.transpose());
  Eigen::LLT<Eigen::MatrixXd> llt(sym);
  if (llt.info() == Eigen::Success) {
    return llt.matrixL();
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym);
  if (eig.info() != Eigen::Success) {
    throw std::runtime_error("psd_sqrt_factor: eigendecomposition failed");
  }
  const Eigen::VectorXd vals = eig.eigenvalues();
  const double scale = vals.cwiseAbs().maxCoeff();
  if (vals.minCoeff() < -clamp_tol * std::max(scale, 1.0)) {
    std::ostringstream msg;
    msg << "psd_sqrt_factor: matrix has negative eigenvalue " << vals.minCoeff()
        << ", not a covariance";
    throw std::domain_error(msg.str());
  }
  const Eigen::VectorXd roots = vals.cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * roots.asDiagonal() * eig.eigenvectors().transpose();
}

}  // namespace metacont
