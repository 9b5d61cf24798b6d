#include "metacont/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <iostream>
#include <sstream>

#include "metacont/io.hpp"
#include "metacont/spectral.hpp"

namespace metacont {

void RunReport::warn(std::string message) {
  std::cerr << "warning: " << message << '\n';
  warnings.push_back(std::move(message));
}

namespace {

std::filesystem::path output_file(const RunConfig& config, const std::string& stem) {
  const char* ext = config.output.format == OutputFormat::Csv ? ".csv" : ".json";
  return config.output.dir / (stem + ext);
}

Eigen::VectorXd to_vector(const std::vector<double>& values) {
  Eigen::VectorXd v(static_cast<int>(values.size()));
  for (std::size_t i = 0; i < values.size(); ++i) v[static_cast<int>(i)] = values[i];
  return v;
}

ContinuationOptions continuation_options(const RunConfig& config, const SeedConfig& seed) {
  ContinuationOptions opts;
  opts.step = config.parameter.step;
  opts.n_steps = seed.n_steps.value_or(config.parameter.n_steps);
  opts.newton_tol = config.continuation.newton_tol;
  opts.newton_max_iter = config.continuation.newton_max_iter;
  opts.direction = seed.direction;
  opts.mu_min = config.parameter.min;
  opts.mu_max = config.parameter.max;
  opts.adaptive = config.continuation.adaptive;
  opts.min_step = config.continuation.min_step;
  opts.marginal_band = config.continuation.marginal_band;
  opts.detect_closed_loop = config.continuation.detect_closed_loop;
  return opts;
}

Eigen::MatrixXd noise_matrix_b(const SdeSystem& system, double sigma,
                               const Eigen::VectorXd& x, double mu) {
  const Eigen::MatrixXd f = system.diffusion(x, mu);
  return (sigma * sigma) * (f * f.transpose());
}

void write_and_note(const Table& table, const RunConfig& config, const std::string& stem,
                    RunReport& report) {
  const std::filesystem::path path = output_file(config, stem);
  write_table(table, path, config.output.format);
  report.note_file(path);
  std::cout << "wrote " << path.string() << " (" << table.rows.size() << " rows)\n";
}

void require_seeds(const RunConfig& config) {
  if (config.seeds.empty()) {
    throw ConfigError("config: at least one seed is required for this command");
  }
}

void check_pairing(const RunConfig& config, std::size_t n_branches) {
  if (config.distance.pair_a >= static_cast<int>(n_branches) ||
      config.distance.pair_b >= static_cast<int>(n_branches)) {
    std::ostringstream msg;
    msg << "config: distance.pairing refers to seed "
        << std::max(config.distance.pair_a, config.distance.pair_b) << " but only "
        << n_branches << " branches exist";
    throw ConfigError(msg.str());
  }
}

/// A2 and A3 over completed branches: covariances, planar ellipse polylines
/// and, when enabled, the paired branch distance sweep.
void analyze_branches(const SdeSystem& system, const std::vector<Branch>& branches,
                      const RunConfig& config, RunReport& report) {
  std::vector<std::vector<std::optional<CovarianceResult>>> all_cov;
  for (std::size_t i = 0; i < branches.size(); ++i) {
    all_cov.push_back(covariances_along_branch(system, branches[i], config, report));
    write_and_note(covariance_table(branches[i], all_cov[i]), config,
                   "covariance_" + std::to_string(i), report);
    if (system.dim_state == 2) {
      write_and_note(ellipse_table(branches[i], all_cov[i], config.h,
                                   config.distance.every_k),
                     config, "ellipses_" + std::to_string(i), report);
    }
  }

  if (config.distance.enabled) {
    check_pairing(config, branches.size());
    const auto& branch_a = branches[static_cast<std::size_t>(config.distance.pair_a)];
    const auto& branch_b = branches[static_cast<std::size_t>(config.distance.pair_b)];
    auto shapes = [](const std::vector<std::optional<CovarianceResult>>& cov) {
      std::vector<std::optional<Eigen::MatrixXd>> out;
      out.reserve(cov.size());
      for (const auto& c : cov) {
        out.push_back(c ? std::optional<Eigen::MatrixXd>(c->c) : std::nullopt);
      }
      return out;
    };
    BranchDistanceOptions opts;
    opts.h = config.h;
    opts.tol = config.distance.tol;
    opts.max_iter = config.distance.max_iter;
    opts.every_k = config.distance.every_k;
    const auto points = distance_along_branch(
        branch_a, shapes(all_cov[static_cast<std::size_t>(config.distance.pair_a)]),
        branch_b, shapes(all_cov[static_cast<std::size_t>(config.distance.pair_b)]), opts);
    int unconverged = 0;
    for (const auto& p : points) {
      if (!p.result.converged) ++unconverged;
    }
    if (unconverged > 0) {
      std::ostringstream msg;
      msg << unconverged << " of " << points.size() << " distance points did not converge";
      report.warn(msg.str());
      report.exit_code = 2;
    }
    write_and_note(distance_table(points, system.dim_state), config, "distance", report);
  }
}

}  // namespace

std::vector<Branch> continue_all(const SdeSystem& system, const RunConfig& config,
                                 RunReport& report) {
  std::vector<Branch> branches;
  for (std::size_t i = 0; i < config.seeds.size(); ++i) {
    const SeedConfig& seed = config.seeds[i];
    if (static_cast<int>(seed.x0.size()) != system.dim_state) {
      std::ostringstream msg;
      msg << "config: seeds[" << i << "].x0 has " << seed.x0.size()
          << " components, model expects " << system.dim_state;
      throw ConfigError(msg.str());
    }
    try {
      branches.push_back(continue_branch(system, to_vector(seed.x0),
                                         config.parameter.start,
                                         continuation_options(config, seed)));
    } catch (const std::exception& e) {
      std::ostringstream msg;
      msg << "seed " << i << " failed: " << e.what();
      report.warn(msg.str());
      report.exit_code = 2;
      Branch failed;
      failed.termination = std::string("seed-failure: ") + e.what();
      branches.push_back(std::move(failed));
    }
  }
  return branches;
}

std::vector<std::optional<CovarianceResult>> covariances_along_branch(
    const SdeSystem& system, const Branch& branch, const RunConfig& config,
    RunReport& report) {
  std::vector<std::optional<CovarianceResult>> out(branch.points.size());
  LyapunovOptions opts;
  opts.tol = config.solver.tol;
  opts.max_iter = config.solver.max_iter;
  opts.q = config.solver.q;

  std::optional<Eigen::MatrixXd> warm;
  int failures = 0;
  for (std::size_t i = 0; i < branch.points.size(); ++i) {
    const BranchPoint& p = branch.points[i];
    if (p.stability != Stability::Stable) continue;
    try {
      const Eigen::MatrixXd b = noise_matrix_b(system, config.noise.sigma, p.x, p.mu);
      CovarianceResult result;
      if (config.solver.method == LyapunovMethod::GaussSeidel) {
        if (warm) {
          result = gauss_seidel_solve(p.jacobian, b, warm, opts);
        } else {
          // Initialization: direct solve at the first usable point, iterative
          // warm-started solves afterwards.
          result = bartels_stewart_solve(p.jacobian, b, opts);
        }
        warm = result.c;
      } else if (config.solver.method == LyapunovMethod::Smith) {
        result = smith_solve(p.jacobian, b, opts);
      } else {
        result = bartels_stewart_solve(p.jacobian, b, opts);
      }
      out[i] = std::move(result);
    } catch (const std::exception& e) {
      ++failures;
      if (failures <= 3) {
        std::ostringstream msg;
        msg << "covariance solve failed at mu = " << p.mu << ": " << e.what();
        report.warn(msg.str());
      }
      report.exit_code = 2;
    }
  }
  if (failures > 3) {
    std::ostringstream msg;
    msg << failures << " covariance solves failed on this branch in total";
    report.warn(msg.str());
  }
  return out;
}

std::vector<Eigen::VectorXd> stable_equilibria_on_grid(const SdeSystem& system, double mu,
                                                       const Eigen::VectorXd& lo,
                                                       const Eigen::VectorXd& hi,
                                                       int points_per_dim, double tol) {
  const int n = system.dim_state;
  if (lo.size() != n || hi.size() != n) {
    throw std::invalid_argument("stable_equilibria_on_grid: bounds dimension mismatch");
  }
  if (points_per_dim < 2) {
    throw std::invalid_argument("stable_equilibria_on_grid: need at least 2 points per axis");
  }
  double total = std::pow(static_cast<double>(points_per_dim), n);
  if (total > 2e5) {
    throw std::invalid_argument("stable_equilibria_on_grid: grid too large");
  }

  std::vector<Eigen::VectorXd> roots;
  std::vector<int> index(static_cast<std::size_t>(n), 0);
  while (true) {
    Eigen::VectorXd start(n);
    for (int d = 0; d < n; ++d) {
      const double frac =
          static_cast<double>(index[static_cast<std::size_t>(d)]) /
          static_cast<double>(points_per_dim - 1);
      start[d] = lo[d] + frac * (hi[d] - lo[d]);
    }
    try {
      const Eigen::VectorXd root = newton_equilibrium(system, start, mu, tol, 50);
      const Eigen::VectorXd margin = 0.1 * (hi - lo).cwiseAbs();
      const bool inside = (root.array() >= (lo - margin).array()).all() &&
                          (root.array() <= (hi + margin).array()).all();
      if (inside) {
        bool duplicate = false;
        for (const Eigen::VectorXd& known : roots) {
          if ((known - root).norm() < 1e-6 * (1.0 + known.norm())) {
            duplicate = true;
            break;
          }
        }
        if (!duplicate) roots.push_back(root);
      }
    } catch (const std::exception&) {
      // Divergent start; harmless.
    }

    int d = 0;
    for (; d < n; ++d) {
      if (++index[static_cast<std::size_t>(d)] < points_per_dim) break;
      index[static_cast<std::size_t>(d)] = 0;
    }
    if (d == n) break;
  }

  std::sort(roots.begin(), roots.end(),
            [](const Eigen::VectorXd& a, const Eigen::VectorXd& b) { return a[0] < b[0]; });
  std::vector<Eigen::VectorXd> stable;
  for (const Eigen::VectorXd& root : roots) {
    const Eigen::VectorXcd eigs = eigenvalues_dense(eval_jacobian(system, root, mu));
    if (classify_stability(eigs) == Stability::Stable) stable.push_back(root);
  }
  return stable;
}

int run_continue(const RunConfig& config, RunReport& report) {
  const SdeSystem system = instantiate_model(config);
  require_seeds(config);
  const std::vector<Branch> branches = continue_all(system, config, report);
  for (std::size_t i = 0; i < branches.size(); ++i) {
    write_and_note(branch_table(branches[i]), config, "branch_" + std::to_string(i),
                   report);
    write_and_note(events_table(branches[i], system.dim_state), config,
                   "events_" + std::to_string(i), report);
    std::cout << "branch " << i << ": " << branches[i].points.size() << " points, "
              << branches[i].events.size() << " events, termination: "
              << branches[i].termination << (branches[i].closed ? " (closed)" : "")
              << '\n';
  }
  return report.exit_code;
}

int run_pipeline(const RunConfig& config, RunReport& report) {
  const SdeSystem system = instantiate_model(config);
  require_seeds(config);
  if (config.distance.enabled) check_pairing(config, config.seeds.size());
  const std::vector<Branch> branches = continue_all(system, config, report);
  for (std::size_t i = 0; i < branches.size(); ++i) {
    write_and_note(branch_table(branches[i]), config, "branch_" + std::to_string(i),
                   report);
    write_and_note(events_table(branches[i], system.dim_state), config,
                   "events_" + std::to_string(i), report);
  }
  analyze_branches(system, branches, config, report);
  return report.exit_code;
}

int run_analyze(const RunConfig& config, RunReport& report) {
  const SdeSystem system = instantiate_model(config);
  require_seeds(config);
  if (config.output.format != OutputFormat::Csv) {
    throw ConfigError("config: analyze post-processing reads CSV branch files only");
  }
  if (config.distance.enabled) check_pairing(config, config.seeds.size());

  std::vector<Branch> branches;
  for (std::size_t i = 0; i < config.seeds.size(); ++i) {
    const std::filesystem::path path = output_file(config, "branch_" + std::to_string(i));
    if (!std::filesystem::exists(path)) {
      throw ConfigError("config: missing branch file '" + path.string() +
                        "'; run the continue command first");
    }
    Branch branch;
    for (const auto& [x, mu] : read_branch_csv(path)) {
      BranchPoint p;
      p.x = x;
      p.mu = mu;
      p.jacobian = eval_jacobian(system, x, mu);
      p.eigenvalues = eigenvalues_dense(p.jacobian);
      p.stability = classify_stability(p.eigenvalues, config.continuation.marginal_band);
      p.tangent = Eigen::VectorXd::Zero(x.size() + 1);
      branch.points.push_back(std::move(p));
    }
    branch.termination = "loaded";
    branches.push_back(std::move(branch));
  }
  analyze_branches(system, branches, config, report);
  return report.exit_code;
}

int run_simulate(const RunConfig& config, RunReport& report) {
  const SdeSystem system = instantiate_model(config);
  if (!config.simulate) {
    throw ConfigError("config: the simulate command needs a simulate section");
  }
  const SimulateConfig& sim = *config.simulate;
  const NoiseSpec noise = make_noise_spec(config);

  std::vector<double> mu_done;
  std::vector<EnsembleStats> stats_done;
  for (std::size_t k = 0; k < sim.mu_values.size(); ++k) {
    const double mu = sim.mu_values[k];
    Eigen::VectorXd p1, p2;
    if (sim.p1) {
      p1 = to_vector(*sim.p1);
      p2 = to_vector(*sim.p2);
      if (p1.size() != system.dim_state || p2.size() != system.dim_state) {
        throw ConfigError("config: simulate.p1/p2 dimension does not match the model");
      }
    } else {
      const auto stable = stable_equilibria_on_grid(
          system, mu, to_vector(sim.grid_min), to_vector(sim.grid_max), sim.grid_points,
          config.continuation.newton_tol);
      if (stable.size() != 2) {
        std::ostringstream msg;
        msg << "mu = " << mu << ": found " << stable.size()
            << " stable equilibria, passage counting needs exactly 2; skipped";
        report.warn(msg.str());
        report.exit_code = 2;
        continue;
      }
      p1 = stable[0];
      p2 = stable[1];
    }

    SimulationConfig run;
    run.dt = sim.dt;
    run.t_max = sim.t_max;
    run.rho = sim.rho;
    run.n_paths = sim.n_paths;
    run.rng_seed = sim.seed + static_cast<std::uint64_t>(k);
    run.initial_state = p1;
    run.mu = mu;
    try {
      const auto [stats, counts] = mean_passages(system, noise, run, p1, p2);
      (void)counts;
      mu_done.push_back(mu);
      stats_done.push_back(stats);
      std::cout << "mu = " << mu << ": T_p = " << stats.mean << " +- " << stats.std_error
                << " over " << stats.n_paths << " paths\n";
      if (sim.store_every > 0) {
        SimulationConfig stored = run;
        stored.store_every = sim.store_every;
        const SdePath path = euler_maruyama(system, noise, stored, 0);
        write_and_note(path_table(path, system.dim_state), config,
                       "path_" + std::to_string(k), report);
      }
    } catch (const std::exception& e) {
      std::ostringstream msg;
      msg << "simulation at mu = " << mu << " failed: " << e.what();
      report.warn(msg.str());
      report.exit_code = 2;
    }
  }

  write_and_note(ensemble_table(mu_done, stats_done), config, "ensemble", report);
  return report.exit_code;
}

int run_kramers(const RunConfig& config, RunReport& report) {
  const SdeSystem system = instantiate_model(config);
  if (!config.kramers) {
    throw ConfigError("config: the kramers command needs a kramers section");
  }
  if (!system.potential) {
    throw ConfigError(
        "config: first-passage estimates need a gradient system with a potential");
  }
  const KramersConfig& kc = *config.kramers;
  if (static_cast<int>(kc.min_seed.size()) != system.dim_state ||
      static_cast<int>(kc.saddle_seed.size()) != system.dim_state) {
    throw ConfigError("config: kramers seed dimension does not match the model");
  }

  SeedConfig seed;
  seed.direction = +1;
  ContinuationOptions copts = continuation_options(config, seed);
  Branch minima, saddles;
  try {
    minima = continue_branch(system, to_vector(kc.min_seed), config.parameter.start, copts);
    saddles = continue_branch(system, to_vector(kc.saddle_seed), config.parameter.start,
                              copts);
  } catch (const std::exception& e) {
    report.warn(std::string("kramers continuation failed: ") + e.what());
    report.exit_code = 2;
    return report.exit_code;
  }

  for (std::size_t i = 0; i < kc.sigma.size(); ++i) {
    const double sigma = kc.sigma[i];
    const auto estimates = kramers_along_branch(system, minima, saddles, sigma);
    if (estimates.empty()) {
      std::ostringstream msg;
      msg << "no usable minimum/saddle pairs for sigma = " << sigma;
      report.warn(msg.str());
      report.exit_code = 2;
    }
    std::cout << "sigma = " << sigma << ": " << estimates.size() << " estimates\n";
    write_and_note(kramers_table(estimates), config, "kramers_" + std::to_string(i),
                   report);
  }
  return report.exit_code;
}

int run_bench_lyapunov(const RunConfig& config, RunReport& report) {
  const SdeSystem system = instantiate_model(config);
  require_seeds(config);
  if (config.noise.sigma <= 0.0) {
    throw ConfigError("config: bench-lyapunov needs noise.sigma > 0");
  }
  const std::vector<Branch> branches = continue_all(system, config, report);

  // Stable points grouped per branch so warm-start chains stay contiguous.
  struct ProblemChain {
    std::vector<Eigen::MatrixXd> a;
    std::vector<Eigen::MatrixXd> b;
  };
  std::vector<ProblemChain> chains;
  std::size_t n_points = 0;
  for (const Branch& branch : branches) {
    ProblemChain chain;
    for (const BranchPoint& p : branch.points) {
      if (p.stability != Stability::Stable) continue;
      chain.a.push_back(p.jacobian);
      chain.b.push_back(noise_matrix_b(system, config.noise.sigma, p.x, p.mu));
    }
    n_points += chain.a.size();
    if (!chain.a.empty()) chains.push_back(std::move(chain));
  }
  if (n_points == 0) {
    throw ConfigError("config: bench-lyapunov found no stable branch points");
  }

  Table table;
  table.columns = {"tol",      "method",           "points", "failures",
                   "total_iterations", "wall_ms"};
  const std::vector<std::string> modes = {"gauss-seidel-warm", "gauss-seidel-cold",
                                          "smith", "bartels-stewart"};
  for (int decade = 2; decade <= 12; ++decade) {
    const double tol = std::pow(10.0, -decade);
    for (const std::string& mode : modes) {
      LyapunovOptions opts;
      opts.tol = tol;
      opts.max_iter = config.solver.max_iter;
      opts.q = config.solver.q;
      long total_iterations = 0;
      long failures = 0;
      const auto start = std::chrono::steady_clock::now();
      for (const ProblemChain& chain : chains) {
        std::optional<Eigen::MatrixXd> warm;
        for (std::size_t i = 0; i < chain.a.size(); ++i) {
          try {
            CovarianceResult result;
            if (mode == "gauss-seidel-warm") {
              result = gauss_seidel_solve(chain.a[i], chain.b[i], warm, opts);
              warm = result.c;
            } else if (mode == "gauss-seidel-cold") {
              result = gauss_seidel_solve(chain.a[i], chain.b[i], std::nullopt, opts);
            } else if (mode == "smith") {
              result = smith_solve(chain.a[i], chain.b[i], opts);
            } else {
              result = bartels_stewart_solve(chain.a[i], chain.b[i], opts);
            }
            total_iterations += result.iterations;
          } catch (const std::exception&) {
            ++failures;
          }
        }
      }
      const auto stop = std::chrono::steady_clock::now();
      const double wall_ms =
          std::chrono::duration<double, std::milli>(stop - start).count();
      table.rows.push_back({Cell(tol), Cell(mode),
                            Cell(static_cast<std::int64_t>(n_points)),
                            Cell(static_cast<std::int64_t>(failures)),
                            Cell(static_cast<std::int64_t>(total_iterations)),
                            Cell(wall_ms)});
      if (failures > 0) report.exit_code = 2;
    }
  }
  write_and_note(table, config, "bench_lyapunov", report);
  return report.exit_code;
}

int run_bench_distance(const RunConfig& config, RunReport& report) {
  const SdeSystem system = instantiate_model(config);
  require_seeds(config);
  check_pairing(config, config.seeds.size());
  const std::vector<Branch> branches = continue_all(system, config, report);
  const auto& branch_a = branches[static_cast<std::size_t>(config.distance.pair_a)];
  const auto& branch_b = branches[static_cast<std::size_t>(config.distance.pair_b)];

  auto shapes = [&](const Branch& branch) {
    RunReport scratch;
    auto cov = covariances_along_branch(system, branch, config, scratch);
    if (scratch.exit_code != 0) report.exit_code = 2;
    std::vector<std::optional<Eigen::MatrixXd>> out;
    out.reserve(cov.size());
    for (const auto& c : cov) {
      out.push_back(c ? std::optional<Eigen::MatrixXd>(c->c) : std::nullopt);
    }
    return out;
  };
  const auto cov_a = shapes(branch_a);
  const auto cov_b = shapes(branch_b);

  Table table;
  table.columns = {"mode",           "points",  "converged", "total_iterations",
                   "total_function_evals", "wall_ms"};
  for (const bool warm : {true, false}) {
    BranchDistanceOptions opts;
    opts.h = config.h;
    opts.tol = config.distance.tol;
    opts.max_iter = config.distance.max_iter;
    opts.every_k = config.distance.every_k;
    opts.warm_start = warm;
    const auto start = std::chrono::steady_clock::now();
    const auto points = distance_along_branch(branch_a, cov_a, branch_b, cov_b, opts);
    const auto stop = std::chrono::steady_clock::now();
    long iterations = 0, evals = 0, converged = 0;
    for (const auto& p : points) {
      iterations += p.result.iterations;
      evals += p.result.function_evals;
      if (p.result.converged) ++converged;
    }
    table.rows.push_back(
        {Cell(std::string(warm ? "warm" : "cold")),
         Cell(static_cast<std::int64_t>(points.size())),
         Cell(static_cast<std::int64_t>(converged)),
         Cell(static_cast<std::int64_t>(iterations)),
         Cell(static_cast<std::int64_t>(evals)),
         Cell(std::chrono::duration<double, std::milli>(stop - start).count())});
  }
  write_and_note(table, config, "bench_distance", report);
  return report.exit_code;
}

}  // namespace metacont
