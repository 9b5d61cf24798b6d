#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdint>
#include <random>

#include "metacont/models.hpp"
#include "metacont/sdesim.hpp"

using namespace metacont;

namespace {

Eigen::VectorXd vec1(double a) {
  Eigen::VectorXd v(1);
  v << a;
  return v;
}

SdeSystem ornstein_uhlenbeck() {
  SdeSystem s;
  s.dim_state = 1;
  s.dim_noise = 1;
  s.drift = [](const Eigen::VectorXd& x, double) { return Eigen::VectorXd(-x); };
  s.diffusion = [](const Eigen::VectorXd&, double) {
    return Eigen::MatrixXd(Eigen::MatrixXd::Ones(1, 1));
  };
  s.name = "ou";
  return s;
}

}  // namespace

TEST_CASE("splitmix64 matches the reference stream", "[sdesim]") {
  CHECK(splitmix64(0) == 0xE220A8397B1DCDAFULL);
  CHECK(splitmix64(splitmix64(0)) != splitmix64(0));
  // Distinct path indices decorrelate even for adjacent seeds.
  CHECK(path_rng(7, 0)() != path_rng(7, 1)());
  CHECK(path_rng(7, 0)() != path_rng(8, 0)());
}

TEST_CASE("sample paths are bitwise reproducible", "[sdesim]") {
  const SdeSystem system = make_pitchfork();
  NoiseSpec noise;
  noise.sigma = 0.4;
  SimulationConfig config;
  config.dt = 1e-3;
  config.t_max = 2.0;
  config.rng_seed = 42;
  config.initial_state = vec1(0.9);
  config.mu = 1.0;

  const SdePath a = euler_maruyama(system, noise, config, 3);
  const SdePath b = euler_maruyama(system, noise, config, 3);
  REQUIRE(a.x.size() == b.x.size());
  for (std::size_t i = 0; i < a.x.size(); ++i) {
    CHECK(a.x[i][0] == b.x[i][0]);
    CHECK(a.t[i] == b.t[i]);
  }

  const SdePath c = euler_maruyama(system, noise, config, 4);
  bool any_different = false;
  for (std::size_t i = 0; i < a.x.size() && i < c.x.size(); ++i) {
    if (a.x[i][0] != c.x[i][0]) any_different = true;
  }
  CHECK(any_different);
}

TEST_CASE("zero noise keeps an equilibrium exactly fixed", "[sdesim]") {
  const SdeSystem system = make_pitchfork();
  NoiseSpec noise;
  noise.sigma = 0.0;
  SimulationConfig config;
  config.dt = 1e-2;
  config.t_max = 1.0;
  config.initial_state = vec1(1.0);
  config.mu = 1.0;
  const SdePath path = euler_maruyama(system, noise, config);
  for (const auto& x : path.x) CHECK(x[0] == 1.0);
  CHECK_FALSE(path.truncated);
}

TEST_CASE("zero noise reproduces the deterministic Euler iteration", "[sdesim]") {
  const SdeSystem system = make_pitchfork();
  NoiseSpec noise;
  noise.sigma = 0.0;
  SimulationConfig config;
  config.dt = 1e-3;
  config.t_max = 0.5;
  config.initial_state = vec1(0.2);
  config.mu = 1.3;
  const SdePath path = euler_maruyama(system, noise, config);

  double x = 0.2;
  for (int i = 0; i < 500; ++i) x += (config.mu * x - x * x * x) * config.dt;
  REQUIRE(path.x.size() == 501);
  CHECK(path.x.back()[0] == Catch::Approx(x).margin(1e-14));
}

TEST_CASE("linear relaxation reaches the stationary variance", "[sdesim]") {
  const SdeSystem system = ornstein_uhlenbeck();
  NoiseSpec noise;
  noise.sigma = 0.5;
  SimulationConfig config;
  config.dt = 1e-3;
  config.t_max = 5.0;
  config.rng_seed = 2024;
  config.initial_state = vec1(0.0);
  config.store_every = 5000;

  const int n_paths = 8000;
  double sum = 0.0, sum_sq = 0.0;
  for (int p = 0; p < n_paths; ++p) {
    const SdePath path = euler_maruyama(system, noise, config, static_cast<std::uint64_t>(p));
    const double x = path.x.back()[0];
    sum += x;
    sum_sq += x * x;
  }
  const double mean = sum / n_paths;
  const double variance = sum_sq / n_paths - mean * mean;
  const double exact = noise.sigma * noise.sigma / 2.0;
  CHECK(std::abs(mean) < 4.0 * std::sqrt(exact / n_paths));
  CHECK(variance == Catch::Approx(exact).epsilon(0.05));
}

TEST_CASE("passage scanner counts alternating transitions", "[sdesim]") {
  PassageScanner scanner(vec1(0.0), vec1(1.0), 0.1);
  for (double x : {0.0, 0.5, 1.0, 0.5, 0.0, 0.5, 0.05, 0.5, 1.0}) {
    scanner.feed(vec1(x));
  }
  const PassageCount c = scanner.counts();
  CHECK(c.t_1to2 == 2);
  CHECK(c.t_2to1 == 1);
  CHECK(c.raw_entries_1 == 3);
  CHECK(c.raw_entries_2 == 2);
}

TEST_CASE("passage counts ignore repeated samples inside a ball", "[sdesim]") {
  SdePath coarse, fine;
  for (double x : {0.0, 0.5, 1.0, 0.5, 0.0}) {
    coarse.x.push_back(vec1(x));
    fine.x.push_back(vec1(x));
    fine.x.push_back(vec1(x));
  }
  const PassageCount a = count_passages(coarse, vec1(0.0), vec1(1.0), 0.1);
  const PassageCount b = count_passages(fine, vec1(0.0), vec1(1.0), 0.1);
  CHECK(a.t_1to2 == b.t_1to2);
  CHECK(a.t_2to1 == b.t_2to1);
  CHECK(a.raw_entries_1 == b.raw_entries_1);
  CHECK(a.raw_entries_2 == b.raw_entries_2);
}

TEST_CASE("passage balls must be disjoint and well formed", "[sdesim]") {
  CHECK_THROWS_AS(PassageScanner(vec1(0.0), vec1(0.1), 0.05), std::invalid_argument);
  CHECK_THROWS_AS(PassageScanner(vec1(0.0), vec1(1.0), 0.0), std::invalid_argument);
  Eigen::VectorXd p2(2);
  p2 << 1.0, 0.0;
  CHECK_THROWS_AS(PassageScanner(vec1(0.0), p2, 0.05), std::invalid_argument);
}

TEST_CASE("noise-free ensembles report zero switching", "[sdesim]") {
  const SdeSystem system = make_pitchfork();
  NoiseSpec noise;
  noise.sigma = 0.0;
  SimulationConfig config;
  config.dt = 1e-2;
  config.t_max = 5.0;
  config.n_paths = 4;
  config.initial_state = vec1(1.0);
  config.mu = 1.0;
  config.rho = 0.05;
  const auto [stats, counts] = mean_passages(system, noise, config, vec1(1.0), vec1(-1.0));
  CHECK(stats.mean == 0.0);
  CHECK(stats.std_error == 0.0);
  CHECK(stats.n_paths == 4);
  REQUIRE(counts.size() == 4);
  for (const auto& c : counts) {
    CHECK(c.t_1to2 == 0);
    CHECK(c.raw_entries_1 == 1);
  }
}

TEST_CASE("deep wells produce no passages at moderate noise", "[sdesim]") {
  const SdeSystem system = make_pitchfork();
  NoiseSpec noise;
  noise.sigma = 0.5;
  SimulationConfig config;
  config.dt = 1e-3;
  config.t_max = 100.0;
  config.n_paths = 20;
  config.rng_seed = 11;
  config.initial_state = vec1(std::sqrt(2.5));
  config.mu = 2.5;
  config.rho = 0.05;
  const auto [stats, counts] =
      mean_passages(system, noise, config, vec1(std::sqrt(2.5)), vec1(-std::sqrt(2.5)));
  CHECK(stats.mean == 0.0);
}

TEST_CASE("shallow wells switch repeatedly and reproducibly", "[sdesim]") {
  const SdeSystem system = make_pitchfork();
  NoiseSpec noise;
  noise.sigma = 0.5;
  SimulationConfig config;
  config.dt = 1e-3;
  config.t_max = 50.0;
  config.n_paths = 10;
  config.rng_seed = 5;
  config.initial_state = vec1(std::sqrt(0.5));
  config.mu = 0.5;
  config.rho = 0.05;
  const Eigen::VectorXd p1 = vec1(std::sqrt(0.5));
  const Eigen::VectorXd p2 = vec1(-std::sqrt(0.5));
  const auto [stats, counts] = mean_passages(system, noise, config, p1, p2);
  CHECK(stats.mean > 0.0);
  CHECK(stats.std_error > 0.0);
  const auto [again, counts2] = mean_passages(system, noise, config, p1, p2);
  CHECK(stats.mean == again.mean);
  CHECK(stats.std_error == again.std_error);
}

TEST_CASE("state-dependent diffusion is re-evaluated along the path", "[sdesim]") {
  SdeSystem system;
  system.dim_state = 1;
  system.dim_noise = 1;
  system.drift = [](const Eigen::VectorXd&, double) {
    return Eigen::VectorXd(Eigen::VectorXd::Zero(1));
  };
  system.diffusion = [](const Eigen::VectorXd& x, double) {
    Eigen::MatrixXd phi(1, 1);
    phi << x[0];
    return phi;
  };

  NoiseSpec multiplicative;
  multiplicative.sigma = 0.3;
  multiplicative.mode = NoiseMode::StateDependent;
  SimulationConfig config;
  config.dt = 1e-3;
  config.t_max = 0.2;
  config.rng_seed = 77;
  config.initial_state = vec1(1.0);

  const SdePath path = euler_maruyama(system, multiplicative, config, 0);

  std::mt19937_64 rng = path_rng(config.rng_seed, 0);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double sqrt_dt = std::sqrt(config.dt);
  double x = 1.0;
  for (int i = 0; i < 200; ++i) x += multiplicative.sigma * sqrt_dt * x * normal(rng);
  CHECK(path.x.back()[0] == Catch::Approx(x).margin(1e-14));

  NoiseSpec frozen = multiplicative;
  frozen.mode = NoiseMode::AdditiveConstant;
  const SdePath additive = euler_maruyama(system, frozen, config, 0);
  CHECK(additive.x.back()[0] != path.x.back()[0]);
}

TEST_CASE("a blowing-up drift truncates the path with a diagnostic", "[sdesim]") {
  SdeSystem system;
  system.dim_state = 1;
  system.dim_noise = 1;
  system.drift = [](const Eigen::VectorXd& x, double) {
    return Eigen::VectorXd(x.array().cube().matrix());
  };
  system.diffusion = [](const Eigen::VectorXd&, double) {
    return Eigen::MatrixXd(Eigen::MatrixXd::Ones(1, 1));
  };
  NoiseSpec noise;
  noise.sigma = 0.0;
  SimulationConfig config;
  config.dt = 1e-3;
  config.t_max = 1.0;
  config.initial_state = vec1(2.0);
  const SdePath path = euler_maruyama(system, noise, config);
  CHECK(path.truncated);
  CHECK_FALSE(path.diagnostic.empty());
  CHECK(path.x.size() < 1001);
}

TEST_CASE("positive-orthant systems reflect at zero", "[sdesim]") {
  SdeSystem system;
  system.dim_state = 1;
  system.dim_noise = 1;
  system.drift = [](const Eigen::VectorXd&, double) {
    return Eigen::VectorXd(-Eigen::VectorXd::Ones(1));
  };
  system.diffusion = [](const Eigen::VectorXd&, double) {
    return Eigen::MatrixXd(Eigen::MatrixXd::Ones(1, 1));
  };
  system.nonnegative_domain = true;
  NoiseSpec noise;
  noise.sigma = 0.0;
  SimulationConfig config;
  config.dt = 1e-2;
  config.t_max = 0.2;
  config.initial_state = vec1(0.005);
  const SdePath path = euler_maruyama(system, noise, config);
  CHECK(path.reflections == 20);
  for (const auto& x : path.x) CHECK(x[0] >= 0.0);
}

TEST_CASE("stored paths honor the decimation stride", "[sdesim]") {
  const SdeSystem system = make_pitchfork();
  NoiseSpec noise;
  noise.sigma = 0.1;
  SimulationConfig config;
  config.dt = 0.1;
  config.t_max = 1.0;
  config.initial_state = vec1(0.5);
  config.mu = 1.0;
  config.store_every = 3;
  const SdePath path = euler_maruyama(system, noise, config);
  REQUIRE(path.t.size() == 4);
  CHECK(path.t[0] == Catch::Approx(0.0).margin(1e-15));
  CHECK(path.t[1] == Catch::Approx(0.3).margin(1e-12));
  CHECK(path.t[3] == Catch::Approx(0.9).margin(1e-12));
}

TEST_CASE("simulation inputs are validated", "[sdesim]") {
  const SdeSystem system = make_pitchfork();
  NoiseSpec noise;
  noise.sigma = 0.1;
  SimulationConfig good;
  good.initial_state = vec1(1.0);
  good.t_max = 1.0;
  good.mu = 1.0;

  SimulationConfig bad = good;
  bad.dt = 0.0;
  CHECK_THROWS_AS(euler_maruyama(system, noise, bad), std::invalid_argument);
  bad = good;
  bad.t_max = -1.0;
  CHECK_THROWS_AS(euler_maruyama(system, noise, bad), std::invalid_argument);
  bad = good;
  bad.initial_state = Eigen::VectorXd::Zero(2);
  CHECK_THROWS_AS(euler_maruyama(system, noise, bad), std::invalid_argument);
  bad = good;
  bad.store_every = 0;
  CHECK_THROWS_AS(euler_maruyama(system, noise, bad), std::invalid_argument);

  NoiseSpec negative;
  negative.sigma = -0.1;
  CHECK_THROWS_AS(euler_maruyama(system, negative, good), std::invalid_argument);

  SimulationConfig no_paths = good;
  no_paths.n_paths = 0;
  CHECK_THROWS_AS(mean_passages(system, noise, no_paths, vec1(1.0), vec1(-1.0)),
                  std::invalid_argument);
}
