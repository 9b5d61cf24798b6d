#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "helpers.hpp"
#include "metacont/lyapunov.hpp"

using namespace metacont;

namespace {

double residual_norm(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                     const Eigen::MatrixXd& c) {
  return (a * c + c * a.transpose() + b).norm();
}

void check_result_contract(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                           const CovarianceResult& r, double tol) {
  CHECK(r.c == r.c.transpose().eval());
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(r.c);
  CHECK(es.eigenvalues().minCoeff() >= -1e-10 * std::max(1.0, r.c.norm()));
  CHECK(residual_norm(a, b, r.c) <= 10.0 * tol * (1.0 + b.norm()));
  CHECK(r.residual == Catch::Approx(residual_norm(a, b, r.c)).margin(1e-12));
}

}  // namespace

TEST_CASE("kronecker system for the scalar case", "[lyapunov]") {
  Eigen::MatrixXd a(1, 1), b(1, 1);
  a << -1.5;
  b << 0.25;
  const auto [ak, rhs] = kron_system(a, b);
  REQUIRE(ak.rows() == 1);
  CHECK(ak(0, 0) == -3.0);
  CHECK(rhs[0] == 0.25);
}

TEST_CASE("kronecker system for a diagonal matrix", "[lyapunov]") {
  Eigen::MatrixXd a(2, 2);
  a << -2.0, 0.0, 0.0, -1.0;
  const auto [ak, rhs] = kron_system(a, Eigen::MatrixXd::Identity(2, 2));
  Eigen::VectorXd expected(4);
  expected << -4.0, -3.0, -3.0, -2.0;
  CHECK((ak - Eigen::MatrixXd(expected.asDiagonal())).cwiseAbs().maxCoeff() == 0.0);
  CHECK(rhs[0] == 1.0);
  CHECK(rhs[1] == 0.0);
  CHECK(rhs[3] == 1.0);
}

TEST_CASE("kronecker system rejects dimensions above its capacity", "[lyapunov]") {
  const Eigen::MatrixXd a = -Eigen::MatrixXd::Identity(61, 61);
  CHECK_THROWS_AS(kron_system(a, Eigen::MatrixXd::Identity(61, 61)), std::invalid_argument);
}

TEST_CASE("degenerate worked example agrees across all solvers", "[lyapunov]") {
  const double sigma = 0.3;
  Eigen::MatrixXd a(2, 2), b(2, 2);
  a << -2.0, 0.0, 0.0, -1.0;
  b << sigma * sigma, 0.0, 0.0, 0.0;
  Eigen::MatrixXd expected(2, 2);
  expected << sigma * sigma / 4.0, 0.0, 0.0, 0.0;

  const CovarianceResult gs = gauss_seidel_solve(a, b);
  const CovarianceResult smith = smith_solve(a, b);
  const CovarianceResult direct = bartels_stewart_solve(a, b);
  for (const CovarianceResult* r : {&gs, &smith, &direct}) {
    CHECK((r->c - expected).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(r->numerical_rank == 1);
  }
  CHECK(direct.iterations == 0);

  Eigen::MatrixXd f(2, 1);
  f << 1.0, 0.0;
  CHECK(controllability_rank(a, sigma * f) == 1);
}

TEST_CASE("full-rank noise yields a full-rank covariance", "[lyapunov]") {
  std::mt19937_64 rng(53);
  const Eigen::MatrixXd a = oracle::random_hurwitz_symmetric(4, rng);
  const Eigen::MatrixXd f = oracle::random_matrix(4, 4, rng);
  const CovarianceResult r = bartels_stewart_solve(a, f * f.transpose());
  CHECK(r.numerical_rank == 4);
  CHECK(controllability_rank(a, f) == 4);
}

TEST_CASE("asymmetric noise matrix is rejected", "[lyapunov]") {
  Eigen::MatrixXd a(2, 2), b(2, 2);
  a << -1.0, 0.0, 0.0, -1.0;
  b << 0.0, 1.0, 0.0, 0.0;
  CHECK_THROWS_AS(gauss_seidel_solve(a, b), std::invalid_argument);
  CHECK_THROWS_AS(smith_solve(a, b), std::invalid_argument);
  CHECK_THROWS_AS(bartels_stewart_solve(a, b), std::invalid_argument);
}

TEST_CASE("non-Hurwitz input fails the solvability precheck", "[lyapunov]") {
  Eigen::MatrixXd a(1, 1), b(1, 1);
  a << 0.5;
  b << 1.0;
  CHECK_THROWS_AS(gauss_seidel_solve(a, b), std::invalid_argument);
  CHECK_THROWS_AS(smith_solve(a, b), std::invalid_argument);
  CHECK_THROWS_AS(bartels_stewart_solve(a, b), std::invalid_argument);
}

TEST_CASE("smith detects divergence when the precheck is disabled", "[lyapunov]") {
  Eigen::MatrixXd a(1, 1), b(1, 1);
  a << 0.5;
  b << 1.0;
  LyapunovOptions opts;
  opts.check_hurwitz = false;
  CHECK_THROWS_AS(smith_solve(a, b, opts), std::runtime_error);
}

TEST_CASE("rotation-dominant problem diverges under sweeps but not direct solves",
          "[lyapunov]") {
  // Hurwitz, but the Kronecker diagonal is tiny against the off-diagonal
  // coupling, so the sweep iteration is not a contraction. The noise matrix
  // must be anisotropic here: for b proportional to the identity the exact
  // solution of this rotation-invariant problem is a multiple of the identity
  // and the diagonal initial guess already hits it, masking the divergence.
  Eigen::MatrixXd a(2, 2);
  a << -0.05, -3.0, 3.0, -0.05;
  Eigen::MatrixXd b(2, 2);
  b << 1.0, 0.0, 0.0, 2.0;
  CHECK_THROWS_AS(gauss_seidel_solve(a, b), std::runtime_error);

  const CovarianceResult smith = smith_solve(a, b);
  const CovarianceResult direct = bartels_stewart_solve(a, b);
  CHECK((smith.c - direct.c).norm() < 1e-7);
  check_result_contract(a, b, smith, 1e-9);
  check_result_contract(a, b, direct, 1e-9);
}

TEST_CASE("structural zero-diagonal pair raises the dedicated error", "[lyapunov]") {
  // Hurwitz companion-type matrix with a zero diagonal entry: 2 A_11 = 0.
  Eigen::MatrixXd a(2, 2);
  a << 0.0, 1.0, -8.0, -1.0;
  const Eigen::MatrixXd b = Eigen::MatrixXd::Identity(2, 2);
  try {
    (void)gauss_seidel_solve(a, b);
    FAIL("expected a structural error");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("diagonal") != std::string::npos);
  }
  // The other two solvers handle the same problem.
  const CovarianceResult smith = smith_solve(a, b);
  const CovarianceResult direct = bartels_stewart_solve(a, b);
  CHECK((smith.c - direct.c).norm() < 1e-7);
}

TEST_CASE("solvers agree pairwise on random symmetric problems", "[lyapunov]") {
  std::mt19937_64 rng(59);
  std::uniform_int_distribution<int> size(2, 8);
  for (int trial = 0; trial < 30; ++trial) {
    const int n = size(rng);
    const Eigen::MatrixXd a = oracle::random_hurwitz_symmetric(n, rng);
    const Eigen::MatrixXd b = oracle::random_psd(n, n, rng);
    const CovarianceResult gs = gauss_seidel_solve(a, b);
    const CovarianceResult smith = smith_solve(a, b);
    const CovarianceResult direct = bartels_stewart_solve(a, b);
    CHECK((gs.c - smith.c).norm() < 1e-7);
    CHECK((gs.c - direct.c).norm() < 1e-7);
    CHECK((smith.c - direct.c).norm() < 1e-7);
    check_result_contract(a, b, gs, 1e-9);
    check_result_contract(a, b, smith, 1e-9);
    check_result_contract(a, b, direct, 1e-9);
    CHECK(gs.method == LyapunovMethod::GaussSeidel);
    CHECK(smith.method == LyapunovMethod::Smith);
    CHECK(direct.method == LyapunovMethod::BartelsStewart);
  }
}

TEST_CASE("reported singular values and rank match the degeneracy diagnostic",
          "[lyapunov]") {
  std::mt19937_64 rng(61);
  const Eigen::MatrixXd a = oracle::random_hurwitz_symmetric(5, rng);
  const Eigen::MatrixXd b = oracle::random_psd(5, 2, rng);
  const CovarianceResult r = bartels_stewart_solve(a, b);
  const auto [rank, sv] = covariance_degeneracy(r.c);
  CHECK(r.numerical_rank == rank);
  CHECK((r.singular_values - sv).cwiseAbs().maxCoeff() < 1e-14);
  for (int i = 0; i + 1 < sv.size(); ++i) CHECK(sv[i] >= sv[i + 1]);
}

TEST_CASE("controllability rank equals covariance rank on invariant subspaces",
          "[lyapunov]") {
  std::mt19937_64 rng(67);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 5;
    std::uniform_int_distribution<int> kdist(1, n);
    const int k = kdist(rng);
    const Eigen::MatrixXd q = oracle::random_orthogonal(n, rng);
    Eigen::VectorXd lambda(n);
    std::uniform_real_distribution<double> unif(-5.0, -0.1);
    for (int i = 0; i < n; ++i) lambda[i] = unif(rng);
    const Eigen::MatrixXd a = q * lambda.asDiagonal() * q.transpose();
    // Noise supported on a k-dimensional A-invariant subspace.
    const Eigen::MatrixXd f = q.leftCols(k);
    const CovarianceResult r = bartels_stewart_solve(a, f * f.transpose());
    CHECK(controllability_rank(a, f) == k);
    CHECK(r.numerical_rank == k);
  }
}

TEST_CASE("warm starts do not increase the sweep count along a matrix path",
          "[lyapunov]") {
  std::mt19937_64 rng(71);
  const Eigen::MatrixXd base = oracle::random_hurwitz_symmetric(5, rng);
  const Eigen::MatrixXd dir = 0.02 * oracle::random_matrix(5, 5, rng);
  const Eigen::MatrixXd b = oracle::random_psd(5, 5, rng);
  LyapunovOptions opts;
  opts.tol = 1e-8;

  std::vector<int> warm_iters, cold_iters;
  std::optional<Eigen::MatrixXd> carry;
  for (int step = 0; step < 40; ++step) {
    const Eigen::MatrixXd sym = dir + dir.transpose();
    const Eigen::MatrixXd a = base + step * 0.5 * sym;
    const CovarianceResult warm = gauss_seidel_solve(a, b, carry, opts);
    const CovarianceResult cold = gauss_seidel_solve(a, b, std::nullopt, opts);
    carry = warm.c;
    warm_iters.push_back(warm.iterations);
    cold_iters.push_back(cold.iterations);
  }
  auto median = [](std::vector<int> v) {
    std::sort(v.begin(), v.end());
    return v[v.size() / 2];
  };
  CHECK(median(warm_iters) <= median(cold_iters));
  long warm_total = 0, cold_total = 0;
  for (std::size_t i = 1; i < warm_iters.size(); ++i) {
    warm_total += warm_iters[i];
    cold_total += cold_iters[i];
  }
  CHECK(warm_total < cold_total);
}

TEST_CASE("gauss-seidel cold start is exact for diagonal problems", "[lyapunov]") {
  Eigen::MatrixXd a(3, 3);
  a.setZero();
  a.diagonal() << -1.0, -2.0, -4.0;
  const Eigen::MatrixXd b = Eigen::MatrixXd::Identity(3, 3);
  const CovarianceResult r = gauss_seidel_solve(a, b);
  CHECK(r.iterations <= 2);
  Eigen::MatrixXd expected(3, 3);
  expected.setZero();
  expected.diagonal() << 0.5, 0.25, 0.125;
  CHECK((r.c - expected).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("zero noise yields the zero covariance from every solver", "[lyapunov]") {
  std::mt19937_64 rng(73);
  const Eigen::MatrixXd a = oracle::random_hurwitz_symmetric(3, rng);
  const Eigen::MatrixXd b = Eigen::MatrixXd::Zero(3, 3);
  CHECK(gauss_seidel_solve(a, b).c.norm() == 0.0);
  CHECK(smith_solve(a, b).c.norm() < 1e-15);
  CHECK(bartels_stewart_solve(a, b).c.norm() < 1e-15);
}

TEST_CASE("smith converges in few squarings", "[lyapunov]") {
  std::mt19937_64 rng(79);
  const Eigen::MatrixXd a = oracle::random_hurwitz_symmetric(6, rng);
  const Eigen::MatrixXd b = oracle::random_psd(6, 6, rng);
  const CovarianceResult r = smith_solve(a, b);
  CHECK(r.iterations <= 60);
  CHECK(r.iterations >= 1);
}
