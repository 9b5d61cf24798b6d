#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "metacont/continuation.hpp"
#include "metacont/ellipsoid.hpp"
#include "metacont/kramers.hpp"
#include "metacont/lyapunov.hpp"
#include "metacont/sdesim.hpp"

namespace metacont {

enum class OutputFormat { Csv, Json };

/// 17 significant digits, round-trip exact for 64-bit doubles.
[[nodiscard]] std::string format_double(double value);

using Cell = std::variant<std::int64_t, double, std::string>;

/// A uniform tabular record set; serialized as CSV or as a JSON array of
/// objects with the same column keys.
struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;
};

void write_table(const Table& table, const std::filesystem::path& path,
                 OutputFormat format);

/// Columns: index, mu, x_1..x_n, max_re_eig, stability, event. The event cell
/// carries the kind for rows bracketing a detected event, else "none".
[[nodiscard]] Table branch_table(const Branch& branch);

/// Per stable point: mu, upper triangle of C row by row, residual, method,
/// iterations, numerical_rank.
[[nodiscard]] Table covariance_table(const Branch& branch,
                                     const std::vector<std::optional<CovarianceResult>>& cov);

/// Columns: mu, delta, v_1..v_n, iterations, function_evals, converged.
[[nodiscard]] Table distance_table(const std::vector<BranchDistancePoint>& points, int dim);

/// 64-point boundary polylines for planar branches: mu, theta_index, x1, x2.
[[nodiscard]] Table ellipse_table(const Branch& branch,
                                  const std::vector<std::optional<CovarianceResult>>& cov,
                                  double h, int every_k, int n_points = 64);

/// Columns: mu, T_p_mean, T_p_stderr, n_paths.
[[nodiscard]] Table ensemble_table(const std::vector<double>& mu,
                                   const std::vector<EnsembleStats>& stats);

/// Columns: mu, barrier, lambda_unstable, det_saddle, det_min, expected_time,
/// rayleigh_iters.
[[nodiscard]] Table kramers_table(const std::vector<KramersEstimate>& estimates);

/// Columns: t, x_1..x_n.
[[nodiscard]] Table path_table(const SdePath& path, int dim);

/// Refined event locations: index, kind, mu, x_1..x_n, test_value.
[[nodiscard]] Table events_table(const Branch& branch, int dim);

/// Reads a branch CSV back for post-processing; only x and mu are restored
/// (Jacobians and eigenvalues are rebuilt by the caller).
[[nodiscard]] std::vector<std::pair<Eigen::VectorXd, double>> read_branch_csv(
    const std::filesystem::path& path);

}  // namespace metacont
