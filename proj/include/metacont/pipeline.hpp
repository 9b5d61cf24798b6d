#pragma once

#include <optional>
#include <string>
#include <vector>

#include "metacont/config.hpp"
#include "metacont/continuation.hpp"
#include "metacont/ellipsoid.hpp"
#include "metacont/kramers.hpp"
#include "metacont/lyapunov.hpp"
#include "metacont/sdesim.hpp"

namespace metacont {

/// Exit status carried back to the CLI: 0 full success, 2 partial (some
/// points failed but output files were still written).
struct RunReport {
  int exit_code = 0;
  std::vector<std::string> warnings;
  std::vector<std::string> emitted_files;
  void note_file(const std::filesystem::path& p) { emitted_files.push_back(p.string()); }
  void warn(std::string message);
};

/// Continues one branch per configured seed; a failed seed yields an empty
/// branch, a warning and a partial exit status.
[[nodiscard]] std::vector<Branch> continue_all(const SdeSystem& system,
                                               const RunConfig& config, RunReport& report);

/// Stationary covariance at every stable branch point; skipped points stay
/// empty. The first solve uses the direct method to initialize, later
/// Gauss-Seidel solves warm-start from the previous point.
[[nodiscard]] std::vector<std::optional<CovarianceResult>> covariances_along_branch(
    const SdeSystem& system, const Branch& branch, const RunConfig& config, RunReport& report);

/// Locates equilibria by Newton iteration from a uniform grid of starts,
/// deduplicated; returns stable ones only.
[[nodiscard]] std::vector<Eigen::VectorXd> stable_equilibria_on_grid(
    const SdeSystem& system, double mu, const Eigen::VectorXd& lo, const Eigen::VectorXd& hi,
    int points_per_dim, double tol);

int run_continue(const RunConfig& config, RunReport& report);
int run_analyze(const RunConfig& config, RunReport& report);
int run_pipeline(const RunConfig& config, RunReport& report);
int run_simulate(const RunConfig& config, RunReport& report);
int run_kramers(const RunConfig& config, RunReport& report);
int run_bench_lyapunov(const RunConfig& config, RunReport& report);
int run_bench_distance(const RunConfig& config, RunReport& report);

}  // namespace metacont
