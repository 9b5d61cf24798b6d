#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "metacont/models.hpp"

namespace metacont {

struct SimulationConfig {
  double dt = 1e-3;
  double t_max = 1000.0;
  /// Passage ball radius.
  double rho = 0.05;
  int n_paths = 100;
  std::uint64_t rng_seed = 0;
  Eigen::VectorXd initial_state;
  double mu = 0.0;
  /// Keep every k-th step when a stored path is requested.
  int store_every = 1;
};

/// A stored sample path (possibly decimated).
struct SdePath {
  std::vector<double> t;
  std::vector<Eigen::VectorXd> x;
  /// Componentwise reflections applied at the domain boundary.
  int reflections = 0;
  bool truncated = false;
  std::string diagnostic;
};

/// Passage counts in the alternation reading: a 1->2 passage is the first
/// entry into the ball around p2 after an entry into the ball around p1, and
/// symmetrically. raw_entries_* count every entry regardless of alternation.
struct PassageCount {
  int t_1to2 = 0;
  int t_2to1 = 0;
  int raw_entries_1 = 0;
  int raw_entries_2 = 0;
};

struct EnsembleStats {
  double mean = 0.0;
  double std_error = 0.0;
  int n_paths = 0;
};

/// SplitMix64 step; used to derive independent per-path generator seeds.
[[nodiscard]] std::uint64_t splitmix64(std::uint64_t x);

/// Deterministic, independent stream for one path of one ensemble.
[[nodiscard]] std::mt19937_64 path_rng(std::uint64_t seed, std::uint64_t path_index);

/// Euler-Maruyama: x_{i+1} = x_i + f dt + sigma Phi sqrt(dt) xi. Phi is the
/// system diffusion, evaluated once when the noise is additive-constant.
/// Non-finite states truncate the path with a diagnostic; systems on the
/// positive orthant are reflected componentwise at zero.
[[nodiscard]] SdePath euler_maruyama(const SdeSystem& system, const NoiseSpec& noise,
                                     const SimulationConfig& config,
                                     std::uint64_t path_index = 0);

/// Streaming passage scanner, so ensembles never store whole paths.
class PassageScanner {
 public:
  PassageScanner(Eigen::VectorXd p1, Eigen::VectorXd p2, double rho);

  void feed(const Eigen::VectorXd& x);
  [[nodiscard]] const PassageCount& counts() const { return counts_; }

 private:
  Eigen::VectorXd p1_, p2_;
  double rho_ = 0.0;
  bool inside1_ = false, inside2_ = false;
  /// 0 none, 1 or 2 for the ball entered last.
  int last_ball_ = 0;
  PassageCount counts_;
};

/// Counts passages of a stored path between the rho-balls around p1 and p2.
/// The balls must be disjoint: ||p1 - p2|| > 2 rho.
[[nodiscard]] PassageCount count_passages(const SdePath& path, const Eigen::VectorXd& p1,
                                          const Eigen::VectorXd& p2, double rho);

/// Ensemble mean and standard error of T_p = T(1->2) + T(2->1) over n_paths
/// independently seeded paths, streamed without storing states.
[[nodiscard]] std::pair<EnsembleStats, std::vector<PassageCount>> mean_passages(
    const SdeSystem& system, const NoiseSpec& noise, const SimulationConfig& config,
    const Eigen::VectorXd& p1, const Eigen::VectorXd& p2);

}  // namespace metacont
