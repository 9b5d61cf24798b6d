#include "metacont/lyapunov.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "metacont/spectral.hpp"

namespace metacont {

const char* to_string(LyapunovMethod m) {
  switch (m) {
    case LyapunovMethod::GaussSeidel: return "gauss-seidel";
    case LyapunovMethod::Smith: return "smith";
    case LyapunovMethod::BartelsStewart: return "bartels-stewart";
  }
  return "unknown";
}

namespace {

void check_problem(const Eigen::Ref<const Eigen::MatrixXd>& a,
                   const Eigen::Ref<const Eigen::MatrixXd>& b,
                   const LyapunovOptions& opts) {
  if (a.rows() != a.cols()) {
    throw std::invalid_argument("lyapunov: A must be square");
  }
  if (b.rows() != a.rows() || b.cols() != a.cols()) {
    std::ostringstream msg;
    msg << "lyapunov: B is " << b.rows() << "x" << b.cols() << ", expected "
        << a.rows() << "x" << a.rows();
    throw std::invalid_argument(msg.str());
  }
  const double scale = std::max(1.0, b.cwiseAbs().maxCoeff());
  const double asym = (b - b.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-12 * scale) {
    std::ostringstream msg;
    msg << "lyapunov: B is not symmetric (max asymmetry " << asym << ")";
    throw std::invalid_argument(msg.str());
  }
  if (opts.check_hurwitz) {
    const double top = max_real_part(eigenvalues_dense(a));
    if (top >= 0.0) {
      std::ostringstream msg;
      msg << "lyapunov: A is not Hurwitz (max Re eig = " << top
          << "), stationary covariance undefined";
      throw std::invalid_argument(msg.str());
    }
  }
}

double lyapunov_residual(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                         const Eigen::MatrixXd& c) {
  return (a * c + c * a.transpose() + b).norm();
}

CovarianceResult finish_result(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                               Eigen::MatrixXd c, LyapunovMethod method, int iterations,
                               double rank_tol) {
  CovarianceResult result;
  c = 0.5 * (c + c.transpose()).eval();
  result.c = std::move(c);
  result.residual = lyapunov_residual(a, b, result.c);
  result.iterations = iterations;
  result.method = method;
  auto [rank, svals] = covariance_degeneracy(result.c, rank_tol);
  result.numerical_rank = rank;
  result.singular_values = std::move(svals);
  return result;
}

}  // namespace

std::pair<Eigen::MatrixXd, Eigen::VectorXd> kron_system(
    const Eigen::Ref<const Eigen::MatrixXd>& a,
    const Eigen::Ref<const Eigen::MatrixXd>& b, int kron_cap) {
  if (a.rows() != a.cols() || b.rows() != b.cols() || a.rows() != b.rows()) {
    throw std::invalid_argument("kron_system: A and B must be square of equal size");
  }
  const int n = static_cast<int>(a.rows());
  if (n > kron_cap) {
    std::ostringstream msg;
    msg << "kron_system: n = " << n << " exceeds the dense cap " << kron_cap
        << " (n^2 x n^2 allocation); use smith_solve or bartels_stewart_solve";
    throw std::invalid_argument(msg.str());
  }
  Eigen::MatrixXd ak = Eigen::MatrixXd::Zero(n * n, n * n);
  for (int j = 0; j < n; ++j) {
    ak.block(j * n, j * n, n, n) += a;
    for (int l = 0; l < n; ++l) {
      ak.block(j * n, l * n, n, n).diagonal().array() += a(j, l);
    }
  }
  const Eigen::MatrixXd bm = b;
  Eigen::VectorXd vec_b = Eigen::Map<const Eigen::VectorXd>(bm.data(), n * n);
  return {std::move(ak), std::move(vec_b)};
}

CovarianceResult gauss_seidel_solve(const Eigen::Ref<const Eigen::MatrixXd>& a,
                                    const Eigen::Ref<const Eigen::MatrixXd>& b,
                                    const std::optional<Eigen::MatrixXd>& c_init,
                                    const LyapunovOptions& opts) {
  check_problem(a, b, opts);
  const int n = static_cast<int>(a.rows());
  const Eigen::MatrixXd am = a, bm = b;

  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (am(i, i) + am(j, j) == 0.0) {
        std::ostringstream msg;
        msg << "gauss_seidel_solve: A_" << (i + 1) << (i + 1) << " + A_" << (j + 1)
            << (j + 1) << " = 0, diagonal of the Kronecker sum vanishes";
        throw std::runtime_error(msg.str());
      }
    }
  }

  Eigen::MatrixXd c(n, n);
  if (c_init) {
    if (c_init->rows() != n || c_init->cols() != n) {
      throw std::invalid_argument("gauss_seidel_solve: warm start has wrong dimensions");
    }
    c = *c_init;
  } else {
    for (int j = 0; j < n; ++j) {
      for (int i = 0; i < n; ++i) {
        c(i, j) = -bm(i, j) / (am(i, i) + am(j, j));
      }
    }
  }

  const double residual_bound = opts.tol * (1.0 + bm.norm());
  double increment_tol = opts.tol;
  double increment = std::numeric_limits<double>::infinity();
  for (int sweep = 1; sweep <= opts.max_iter; ++sweep) {
    double sum_sq = 0.0;
    // Column-major sweep over the entries of C, in place.
    for (int j = 0; j < n; ++j) {
      for (int i = 0; i < n; ++i) {
        const double diag = am(i, i) + am(j, j);
        const double row_term = am.row(i).dot(c.col(j));
        const double col_term = am.row(j).dot(c.row(i));
        const double updated = (-bm(i, j) - row_term - col_term + diag * c(i, j)) / diag;
        const double delta = updated - c(i, j);
        sum_sq += delta * delta;
        c(i, j) = updated;
      }
    }
    increment = std::sqrt(sum_sq);
    if (!std::isfinite(increment)) {
      std::ostringstream msg;
      msg << "gauss_seidel_solve: iteration diverged at sweep " << sweep;
      throw std::runtime_error(msg.str());
    }
    if (increment < increment_tol) {
      if (lyapunov_residual(am, bm, c) <= residual_bound) {
        return finish_result(am, bm, c, LyapunovMethod::GaussSeidel, sweep, opts.rank_tol);
      }
      // The increment underestimates the error; keep sweeping against a
      // tighter increment threshold until the residual contract holds.
      increment_tol *= 0.1;
    }
  }
  std::ostringstream msg;
  msg << "gauss_seidel_solve: no convergence in " << opts.max_iter
      << " sweeps, last increment " << increment;
  throw std::runtime_error(msg.str());
}

CovarianceResult smith_solve(const Eigen::Ref<const Eigen::MatrixXd>& a,
                             const Eigen::Ref<const Eigen::MatrixXd>& b,
                             const LyapunovOptions& opts) {
  check_problem(a, b, opts);
  if (opts.q <= 0.0) {
    throw std::invalid_argument("smith_solve: shift q must be positive");
  }
  const int n = static_cast<int>(a.rows());
  const Eigen::MatrixXd am = a, bm = b;
  const Eigen::MatrixXd shifted = opts.q * Eigen::MatrixXd::Identity(n, n) - am;
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(shifted);
  const Eigen::MatrixXd g =
      lu.solve(opts.q * Eigen::MatrixXd::Identity(n, n) + am);

  double rho = 0.0;
  const Eigen::VectorXcd g_eigs = eigenvalues_dense(g);
  for (int i = 0; i < g_eigs.size(); ++i) rho = std::max(rho, std::abs(g_eigs[i]));
  if (rho >= 1.0) {
    std::ostringstream msg;
    msg << "smith_solve: spectral radius of the Cayley factor is " << rho
        << " >= 1, iteration diverges (A not Hurwitz for shift q = " << opts.q << ")";
    throw std::runtime_error(msg.str());
  }

  // C(0) = 2q (qI - A)^{-1} B (qI - A^T)^{-1}.
  Eigen::MatrixXd c = 2.0 * opts.q * lu.solve(lu.solve(bm).transpose()).transpose();
  Eigen::MatrixXd power = g;
  const double residual_bound = opts.tol * (1.0 + bm.norm());
  double increment_tol = opts.tol;
  double increment = std::numeric_limits<double>::infinity();
  for (int k = 1; k <= opts.max_squarings; ++k) {
    const Eigen::MatrixXd update = power * c * power.transpose();
    c += update;
    increment = update.norm();
    if (!std::isfinite(increment)) {
      throw std::runtime_error("smith_solve: iteration produced non-finite values");
    }
    if (increment < increment_tol) {
      if (lyapunov_residual(am, bm, c) <= residual_bound) {
        return finish_result(am, bm, c, LyapunovMethod::Smith, k, opts.rank_tol);
      }
      increment_tol *= 0.1;
    }
    power = (power * power).eval();
  }
  std::ostringstream msg;
  msg << "smith_solve: no convergence in " << opts.max_squarings
      << " squarings, last increment " << increment;
  throw std::runtime_error(msg.str());
}

CovarianceResult bartels_stewart_solve(const Eigen::Ref<const Eigen::MatrixXd>& a,
                                       const Eigen::Ref<const Eigen::MatrixXd>& b,
                                       const LyapunovOptions& opts) {
  check_problem(a, b, opts);
  const int n = static_cast<int>(a.rows());
  const Eigen::MatrixXd am = a, bm = b;

  Eigen::RealSchur<Eigen::MatrixXd> schur(am);
  if (schur.info() != Eigen::Success) {
    throw std::runtime_error("bartels_stewart_solve: real Schur iteration failed");
  }
  const Eigen::MatrixXd r = schur.matrixT();
  const Eigen::MatrixXd u = schur.matrixU();
  const Eigen::MatrixXd w = -u.transpose() * bm * u;

  // Diagonal block boundaries of the quasi-triangular factor.
  std::vector<int> starts;
  std::vector<int> sizes;
  for (int k = 0; k < n;) {
    const bool pair_block = (k + 1 < n) && (r(k + 1, k) != 0.0);
    starts.push_back(k);
    sizes.push_back(pair_block ? 2 : 1);
    k += pair_block ? 2 : 1;
  }
  const int n_blocks = static_cast<int>(starts.size());

  // Solve R Y + Y R^T = W block by block, last block row/column first; each
  // block is a Kronecker system of size at most 4.
  Eigen::MatrixXd y = Eigen::MatrixXd::Zero(n, n);
  for (int jb = n_blocks - 1; jb >= 0; --jb) {
    for (int ib = n_blocks - 1; ib >= 0; --ib) {
      const int i0 = starts[ib], p = sizes[ib];
      const int j0 = starts[jb], q = sizes[jb];
      Eigen::MatrixXd rhs = w.block(i0, j0, p, q);
      // Contributions of already-solved blocks below (same column) and to the
      // right (same row).
      const int below = i0 + p;
      if (below < n) {
        rhs -= r.block(i0, below, p, n - below) * y.block(below, j0, n - below, q);
      }
      const int right = j0 + q;
      if (right < n) {
        rhs -= y.block(i0, right, p, n - right) * r.block(j0, right, q, n - right).transpose();
      }
      Eigen::MatrixXd small = Eigen::MatrixXd::Zero(p * q, p * q);
      for (int col = 0; col < q; ++col) {
        small.block(col * p, col * p, p, p) += r.block(i0, i0, p, p);
        for (int l = 0; l < q; ++l) {
          small.block(col * p, l * p, p, p).diagonal().array() += r(j0 + col, j0 + l);
        }
      }
      Eigen::Map<Eigen::VectorXd> rhs_vec(rhs.data(), p * q);
      Eigen::FullPivLU<Eigen::MatrixXd> block_lu(small);
      if (!block_lu.isInvertible()) {
        throw std::runtime_error(
            "bartels_stewart_solve: singular diagonal block pair (eigenvalue sum zero)");
      }
      const Eigen::VectorXd sol = block_lu.solve(rhs_vec);
      y.block(i0, j0, p, q) = Eigen::Map<const Eigen::MatrixXd>(sol.data(), p, q);
    }
  }

  Eigen::MatrixXd c = u * y * u.transpose();
  return finish_result(am, bm, c, LyapunovMethod::BartelsStewart, 0, opts.rank_tol);
}

int controllability_rank(const Eigen::Ref<const Eigen::MatrixXd>& a,
                         const Eigen::Ref<const Eigen::MatrixXd>& f_sigma,
                         double rank_tol) {
  if (a.rows() != a.cols() || f_sigma.rows() != a.rows()) {
    throw std::invalid_argument("controllability_rank: dimension mismatch");
  }
  const int n = static_cast<int>(a.rows());
  const int k = static_cast<int>(f_sigma.cols());
  Eigen::MatrixXd con(n, n * k);
  Eigen::MatrixXd block = f_sigma;
  for (int power = 0; power < n; ++power) {
    con.middleCols(power * k, k) = block;
    block = (a * block).eval();
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(con);
  const Eigen::VectorXd s = svd.singularValues();
  const double threshold = rank_tol * s.maxCoeff();
  int rank = 0;
  for (int i = 0; i < s.size(); ++i) {
    if (s[i] > threshold && s[i] > 0.0) ++rank;
  }
  return rank;
}

std::pair<int, Eigen::VectorXd> covariance_degeneracy(
    const Eigen::Ref<const Eigen::MatrixXd>& c, double rank_tol) {
  if (c.rows() != c.cols()) {
    throw std::invalid_argument("covariance_degeneracy: C must be square");
  }
  const Eigen::MatrixXd sym = 0.5 * (c + c.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym);
  if (eig.info() != Eigen::Success) {
    throw std::runtime_error("covariance_degeneracy: eigendecomposition failed");
  }
  Eigen::VectorXd svals = eig.eigenvalues().cwiseAbs();
  std::sort(svals.data(), svals.data() + svals.size(), std::greater<double>());
  const double top = svals.size() > 0 ? svals[0] : 0.0;
  int rank = 0;
  for (int i = 0; i < svals.size(); ++i) {
    if (svals[i] > rank_tol * top && svals[i] > 0.0) ++rank;
  }
  return {rank, std::move(svals)};
}

}  // namespace metacont
