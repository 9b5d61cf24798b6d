#pragma once

#include <Eigen/Dense>

namespace metacont {

/// All eigenvalues of a real dense matrix, sorted by descending real part
/// (ties by descending imaginary part). Backed by a Hessenberg reduction plus
/// shifted QR iteration; iteration failure raises std::runtime_error.
[[nodiscard]] Eigen::VectorXcd eigenvalues_dense(const Eigen::Ref<const Eigen::MatrixXd>& a);

[[nodiscard]] double max_real_part(const Eigen::VectorXcd& eigenvalues);

/// Symmetric PSD square root P of a symmetric PSD matrix s, so P P^T = s.
/// Cholesky is attempted first; on failure (semidefinite or roundoff-negative
/// input) falls back to the eigendecomposition square root with eigenvalues
/// clamped at zero. Eigenvalues below -clamp_tol * max |eig| raise
/// std::domain_error since the input is then not a covariance-like matrix.
[[nodiscard]] Eigen::MatrixXd psd_sqrt_factor(const Eigen::Ref<const Eigen::MatrixXd>& s,
                                              double clamp_tol = 1e-10);

}  // namespace metacont
