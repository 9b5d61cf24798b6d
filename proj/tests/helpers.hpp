#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <complex>
#include <cstddef>
#include <random>
#include <vector>

/// Independent numerical oracles used by the test suite only. Everything here
/// is deliberately naive: small, slow reference algorithms whose correctness
/// is obvious by inspection.
namespace oracle {

inline Eigen::MatrixXd random_matrix(int rows, int cols, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  Eigen::MatrixXd m(rows, cols);
  for (int j = 0; j < cols; ++j) {
    for (int i = 0; i < rows; ++i) m(i, j) = normal(rng);
  }
  return m;
}

inline Eigen::VectorXd random_vector(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v[i] = normal(rng);
  return v;
}

inline Eigen::MatrixXd random_orthogonal(int n, std::mt19937_64& rng) {
  const Eigen::MatrixXd m = random_matrix(n, n, rng);
  return Eigen::HouseholderQR<Eigen::MatrixXd>(m).householderQ();
}

/// Symmetric negative definite with eigenvalues drawn from [-5, -0.1].
inline Eigen::MatrixXd random_hurwitz_symmetric(int n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unif(-5.0, -0.1);
  Eigen::VectorXd lambda(n);
  for (int i = 0; i < n; ++i) lambda[i] = unif(rng);
  const Eigen::MatrixXd q = random_orthogonal(n, rng);
  return q * lambda.asDiagonal() * q.transpose();
}

/// PSD of rank min(k, n) built as F F^T.
inline Eigen::MatrixXd random_psd(int n, int k, std::mt19937_64& rng) {
  const Eigen::MatrixXd f = random_matrix(n, k, rng);
  return f * f.transpose();
}

/// Recursive cofactor expansion along the first row; O(n!) and exact in
/// structure, usable up to n = 8 or so.
inline double cofactor_determinant(const Eigen::MatrixXd& a) {
  const int n = static_cast<int>(a.rows());
  if (n == 1) return a(0, 0);
  if (n == 2) return a(0, 0) * a(1, 1) - a(0, 1) * a(1, 0);
  double det = 0.0;
  for (int j = 0; j < n; ++j) {
    Eigen::MatrixXd minor(n - 1, n - 1);
    for (int r = 1; r < n; ++r) {
      int mc = 0;
      for (int c = 0; c < n; ++c) {
        if (c == j) continue;
        minor(r - 1, mc++) = a(r, c);
      }
    }
    const double sign = (j % 2 == 0) ? 1.0 : -1.0;
    det += sign * a(0, j) * cofactor_determinant(minor);
  }
  return det;
}

/// Characteristic polynomial coefficients by the Faddeev-LeVerrier recurrence:
/// returns c with p(x) = x^n + c[0] x^{n-1} + ... + c[n-1].
inline std::vector<double> characteristic_polynomial(const Eigen::MatrixXd& a) {
  const int n = static_cast<int>(a.rows());
  std::vector<double> c(static_cast<std::size_t>(n));
  Eigen::MatrixXd m = a;
  c[0] = -m.trace();
  for (int k = 2; k <= n; ++k) {
    m = a * (m + c[static_cast<std::size_t>(k - 2)] * Eigen::MatrixXd::Identity(n, n));
    c[static_cast<std::size_t>(k - 1)] = -m.trace() / k;
  }
  return c;
}

/// Durand-Kerner simultaneous root iteration for a monic polynomial with the
/// coefficient layout of characteristic_polynomial.
inline std::vector<std::complex<double>> polynomial_roots(const std::vector<double>& c) {
  const int n = static_cast<int>(c.size());
  auto eval = [&](std::complex<double> x) {
    std::complex<double> p = 1.0;
    for (int k = 0; k < n; ++k) p = p * x + c[static_cast<std::size_t>(k)];
    return p;
  };
  std::vector<std::complex<double>> z(static_cast<std::size_t>(n));
  const std::complex<double> seed(0.4, 0.9);
  std::complex<double> power = 1.0;
  for (int i = 0; i < n; ++i) {
    power *= seed;
    z[static_cast<std::size_t>(i)] = power;
  }
  for (int sweep = 0; sweep < 2000; ++sweep) {
    double moved = 0.0;
    for (int i = 0; i < n; ++i) {
      std::complex<double> denom = 1.0;
      for (int j = 0; j < n; ++j) {
        if (j != i) denom *= z[static_cast<std::size_t>(i)] - z[static_cast<std::size_t>(j)];
      }
      const std::complex<double> step = eval(z[static_cast<std::size_t>(i)]) / denom;
      z[static_cast<std::size_t>(i)] -= step;
      moved = std::max(moved, std::abs(step));
    }
    if (moved < 1e-14) break;
  }
  return z;
}

/// Central-difference gradient of a scalar function of a vector.
template <typename F>
Eigen::VectorXd fd_gradient(F&& f, const Eigen::VectorXd& x, double h = 1e-6) {
  Eigen::VectorXd g(x.size());
  for (int i = 0; i < x.size(); ++i) {
    Eigen::VectorXd xp = x, xm = x;
    xp[i] += h;
    xm[i] -= h;
    g[i] = (f(xp) - f(xm)) / (2.0 * h);
  }
  return g;
}

/// Central-difference Jacobian of a vector function of a vector.
template <typename F>
Eigen::MatrixXd fd_jacobian(F&& f, const Eigen::VectorXd& x, double h = 1e-6) {
  const Eigen::VectorXd f0 = f(x);
  Eigen::MatrixXd j(f0.size(), x.size());
  for (int i = 0; i < x.size(); ++i) {
    Eigen::VectorXd xp = x, xm = x;
    xp[i] += h;
    xm[i] -= h;
    j.col(i) = (f(xp) - f(xm)) / (2.0 * h);
  }
  return j;
}

}  // namespace oracle
