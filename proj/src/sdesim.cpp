#include "metacont/sdesim.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace metacont {

namespace {

void check_config(const SdeSystem& system, const NoiseSpec& noise,
                  const SimulationConfig& config) {
  if (config.dt <= 0.0) throw std::invalid_argument("simulation: dt must be positive");
  if (config.t_max <= 0.0) throw std::invalid_argument("simulation: t_max must be positive");
  if (noise.sigma < 0.0) throw std::invalid_argument("simulation: sigma must be nonnegative");
  if (static_cast<int>(config.initial_state.size()) != system.dim_state) {
    std::ostringstream msg;
    msg << "simulation: initial state has " << config.initial_state.size()
        << " components, expected " << system.dim_state;
    throw std::invalid_argument(msg.str());
  }
}

/// One Euler-Maruyama path, streamed step by step into visit(t, x). The
/// callback also receives the initial state. Returns reflections and, on a
/// numerical failure, a diagnostic.
struct StreamOutcome {
  int reflections = 0;
  bool truncated = false;
  std::string diagnostic;
};

template <typename Visitor>
StreamOutcome stream_path(const SdeSystem& system, const NoiseSpec& noise,
                          const SimulationConfig& config, std::uint64_t path_index,
                          Visitor&& visit) {
  const int n = system.dim_state;
  const int k = system.dim_noise;
  const double dt = config.dt;
  const double sqrt_dt = std::sqrt(dt);
  const long n_steps = std::lround(config.t_max / dt);

  std::mt19937_64 rng = path_rng(config.rng_seed, path_index);
  std::normal_distribution<double> normal(0.0, 1.0);

  StreamOutcome outcome;
  Eigen::VectorXd x = config.initial_state;
  Eigen::VectorXd xi(k);
  Eigen::MatrixXd phi;
  const bool constant_noise = noise.mode == NoiseMode::AdditiveConstant;
  try {
    if (constant_noise) phi = system.diffusion(x, config.mu);
  } catch (const std::exception& e) {
    outcome.truncated = true;
    outcome.diagnostic = e.what();
    return outcome;
  }

  visit(0.0, x);
  for (long i = 1; i <= n_steps; ++i) {
    try {
      const Eigen::VectorXd f = system.drift(x, config.mu);
      if (!constant_noise) phi = system.diffusion(x, config.mu);
      for (int j = 0; j < k; ++j) xi[j] = normal(rng);
      x += f * dt + (noise.sigma * sqrt_dt) * (phi * xi);
    } catch (const std::exception& e) {
      outcome.truncated = true;
      outcome.diagnostic = e.what();
      return outcome;
    }
    if (!x.allFinite()) {
      outcome.truncated = true;
      std::ostringstream msg;
      msg << "non-finite state at t = " << static_cast<double>(i) * dt;
      outcome.diagnostic = msg.str();
      return outcome;
    }
    if (system.nonnegative_domain) {
      bool reflected = false;
      for (int j = 0; j < n; ++j) {
        if (x[j] < 0.0) {
          x[j] = -x[j];
          reflected = true;
        }
      }
      if (reflected) ++outcome.reflections;
    }
    visit(static_cast<double>(i) * dt, x);
  }
  return outcome;
}

}  // namespace

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::mt19937_64 path_rng(std::uint64_t seed, std::uint64_t path_index) {
  return std::mt19937_64(splitmix64(seed ^ splitmix64(path_index + 1)));
}

SdePath euler_maruyama(const SdeSystem& system, const NoiseSpec& noise,
                       const SimulationConfig& config, std::uint64_t path_index) {
  check_config(system, noise, config);
  if (config.store_every < 1) {
    throw std::invalid_argument("euler_maruyama: store_every must be >= 1");
  }
  SdePath path;
  long counter = 0;
  const long keep = config.store_every;
  const StreamOutcome outcome = stream_path(
      system, noise, config, path_index, [&](double t, const Eigen::VectorXd& x) {
        if (counter % keep == 0) {
          path.t.push_back(t);
          path.x.push_back(x);
        }
        ++counter;
      });
  path.reflections = outcome.reflections;
  path.truncated = outcome.truncated;
  path.diagnostic = outcome.diagnostic;
  return path;
}

PassageScanner::PassageScanner(Eigen::VectorXd p1, Eigen::VectorXd p2, double rho)
    : p1_(std::move(p1)), p2_(std::move(p2)), rho_(rho) {
  if (rho_ <= 0.0) throw std::invalid_argument("PassageScanner: rho must be positive");
  if (p1_.size() != p2_.size()) {
    throw std::invalid_argument("PassageScanner: centers have different dimensions");
  }
  if ((p1_ - p2_).norm() <= 2.0 * rho_) {
    std::ostringstream msg;
    msg << "PassageScanner: balls overlap, ||p1 - p2|| = " << (p1_ - p2_).norm()
        << " <= 2 rho = " << 2.0 * rho_;
    throw std::invalid_argument(msg.str());
  }
}

void PassageScanner::feed(const Eigen::VectorXd& x) {
  const bool in1 = (x - p1_).norm() <= rho_;
  const bool in2 = (x - p2_).norm() <= rho_;
  if (in1 && !inside1_) {
    ++counts_.raw_entries_1;
    if (last_ball_ == 2) ++counts_.t_2to1;
    last_ball_ = 1;
  }
  if (in2 && !inside2_) {
    ++counts_.raw_entries_2;
    if (last_ball_ == 1) ++counts_.t_1to2;
    last_ball_ = 2;
  }
  inside1_ = in1;
  inside2_ = in2;
}

PassageCount count_passages(const SdePath& path, const Eigen::VectorXd& p1,
                            const Eigen::VectorXd& p2, double rho) {
  PassageScanner scanner(p1, p2, rho);
  for (const Eigen::VectorXd& x : path.x) scanner.feed(x);
  return scanner.counts();
}

std::pair<EnsembleStats, std::vector<PassageCount>> mean_passages(
    const SdeSystem& system, const NoiseSpec& noise, const SimulationConfig& config,
    const Eigen::VectorXd& p1, const Eigen::VectorXd& p2) {
  check_config(system, noise, config);
  if (config.n_paths < 1) {
    throw std::invalid_argument("mean_passages: n_paths must be >= 1");
  }
  std::vector<PassageCount> counts;
  counts.reserve(static_cast<std::size_t>(config.n_paths));
  std::vector<double> totals;
  totals.reserve(static_cast<std::size_t>(config.n_paths));
  for (int p = 0; p < config.n_paths; ++p) {
    PassageScanner scanner(p1, p2, config.rho);
    stream_path(system, noise, config, static_cast<std::uint64_t>(p),
                [&](double, const Eigen::VectorXd& x) { scanner.feed(x); });
    counts.push_back(scanner.counts());
    totals.push_back(static_cast<double>(scanner.counts().t_1to2 + scanner.counts().t_2to1));
  }

  EnsembleStats stats;
  stats.n_paths = config.n_paths;
  double sum = 0.0;
  for (double v : totals) sum += v;
  stats.mean = sum / static_cast<double>(totals.size());
  if (totals.size() > 1) {
    double ss = 0.0;
    for (double v : totals) ss += (v - stats.mean) * (v - stats.mean);
    const double variance = ss / static_cast<double>(totals.size() - 1);
    stats.std_error = std::sqrt(variance / static_cast<double>(totals.size()));
  }
  return {stats, std::move(counts)};
}

}  // namespace metacont
