#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "metacont/io.hpp"
#include "metacont/lyapunov.hpp"
#include "metacont/models.hpp"

namespace metacont {

/// Raised for malformed or rejected configuration input; the CLI maps it to
/// exit code 1 before any computation starts.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Either a built-in identifier (optionally with parameter overrides) or a
/// fully inline expression-defined system.
struct ModelConfig {
  std::string name;
  /// Built-in parameter overrides, applied by key.
  std::optional<Neural2Params> neural2;
  std::optional<RmParams> rm;
  /// Inline system; present iff drift is nonempty.
  int dim_state = 0;
  int dim_noise = 0;
  std::vector<std::string> drift;
  std::vector<std::vector<std::string>> diffusion;
  std::optional<std::vector<std::vector<std::string>>> jacobian;
  std::optional<std::string> potential;
  [[nodiscard]] bool inline_system() const { return !drift.empty(); }
};

struct ParameterConfig {
  std::string name = "mu";
  double start = 0.0;
  double step = 1e-3;
  int n_steps = 1000;
  double min = -std::numeric_limits<double>::infinity();
  double max = std::numeric_limits<double>::infinity();
};

struct ContinuationConfig {
  double newton_tol = 1e-10;
  int newton_max_iter = 25;
  bool adaptive = false;
  double min_step = 1e-6;
  double marginal_band = 1e-8;
  bool detect_closed_loop = true;
};

struct SeedConfig {
  std::vector<double> x0;
  int direction = +1;
  std::optional<int> n_steps;
};

struct NoiseConfig {
  double sigma = 0.0;
  /// Optional constant noise covariance structure N = F F^T; replaces the
  /// model diffusion by its symmetric PSD square root.
  std::optional<std::vector<std::vector<double>>> matrix;
};

struct SolverConfig {
  LyapunovMethod method = LyapunovMethod::GaussSeidel;
  double tol = 1e-9;
  int max_iter = 10000;
  double q = 0.1;
};

struct DistanceConfig {
  bool enabled = false;
  /// Indices into seeds: driving branch first, partner branch second.
  int pair_a = 0;
  int pair_b = 1;
  int every_k = 1;
  double tol = 1e-8;
  int max_iter = 200;
};

struct SimulateConfig {
  double dt = 1e-3;
  double t_max = 1000.0;
  double rho = 0.05;
  int n_paths = 100;
  std::uint64_t seed = 0;
  std::vector<double> mu_values;
  std::optional<std::vector<double>> p1;
  std::optional<std::vector<double>> p2;
  /// Multi-start Newton grid used when p1/p2 are not given.
  std::vector<double> grid_min;
  std::vector<double> grid_max;
  int grid_points = 8;
  /// Also emit one decimated path per mu when positive.
  int store_every = 0;
};

struct KramersConfig {
  std::vector<double> sigma;
  std::vector<double> min_seed;
  std::vector<double> saddle_seed;
};

struct OutputConfig {
  std::filesystem::path dir = "out";
  OutputFormat format = OutputFormat::Csv;
};

struct RunConfig {
  ModelConfig model;
  ParameterConfig parameter;
  ContinuationConfig continuation;
  std::vector<SeedConfig> seeds;
  NoiseConfig noise;
  double h = 1.0;
  SolverConfig solver;
  DistanceConfig distance;
  std::optional<SimulateConfig> simulate;
  std::optional<KramersConfig> kramers;
  OutputConfig output;
};

/// Command line overrides layered onto the file config.
struct ConfigOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<double> tol;
  std::optional<double> h;
  std::optional<double> sigma;
  std::optional<std::filesystem::path> out;
};

/// Parses and validates a JSON config; any unknown key anywhere in the
/// document is rejected before computation (strict schema).
[[nodiscard]] RunConfig load_config(const std::filesystem::path& path);
[[nodiscard]] RunConfig parse_config(const std::string& json_text);

void apply_overrides(RunConfig& config, const ConfigOverrides& overrides);

/// Instantiates the configured model (built-in or inline expressions),
/// applying any noise matrix override.
[[nodiscard]] SdeSystem instantiate_model(const RunConfig& config);

/// Noise level plus dependence mode: state dependent only for a built-in
/// model with state-dependent diffusion or inline diffusion entries that
/// mention state variables, and never when a constant noise matrix override
/// is active.
[[nodiscard]] NoiseSpec make_noise_spec(const RunConfig& config);

}  // namespace metacont
