#include <CLI11.hpp>

#include <functional>
#include <iostream>
#include <string>

#include "metacont/config.hpp"
#include "metacont/pipeline.hpp"

namespace {

struct Cli {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<double> tol;
  std::optional<double> h;
  std::optional<double> sigma;
  std::optional<std::string> out;
  std::function<int(const metacont::RunConfig&, metacont::RunReport&)> runner;
};

void add_command(CLI::App& app, Cli& cli, const std::string& name,
                 const std::string& description,
                 int (*fn)(const metacont::RunConfig&, metacont::RunReport&)) {
  CLI::App* cmd = app.add_subcommand(name, description);
  // Help on subcommands is --help only: the short -h form would collide with
  // the --h radius override below.
  cmd->set_help_flag("--help", "print usage for this command");
  cmd->add_option("config", cli.config_path, "JSON run configuration file")->required();
  cmd->add_option("--seed", cli.seed, "override the simulation seed");
  cmd->add_option("--tol", cli.tol, "override the solver and distance tolerances");
  cmd->add_option("--h", cli.h, "override the confidence radius");
  cmd->add_option("--sigma", cli.sigma, "override the noise level");
  cmd->add_option("--out", cli.out, "override the output directory");
  cmd->callback([&cli, fn] { cli.runner = fn; });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Equilibrium continuation for parameterized SDE models, with stationary "
      "covariance ellipsoids, branch distance sweeps, passage-time ensembles and "
      "first-passage estimates."};
  app.require_subcommand(1);

  Cli cli;
  add_command(app, cli, "continue",
              "trace equilibrium branches and detected events", metacont::run_continue);
  add_command(app, cli, "analyze",
              "covariances, ellipses and distances over previously written branches",
              metacont::run_analyze);
  add_command(app, cli, "pipeline",
              "continuation followed by covariance and distance analysis",
              metacont::run_pipeline);
  add_command(app, cli, "simulate",
              "sample paths and passage-time statistics between two wells",
              metacont::run_simulate);
  add_command(app, cli, "kramers",
              "expected passage times from minimum and saddle branches",
              metacont::run_kramers);
  add_command(app, cli, "bench-lyapunov",
              "timing table for the covariance solvers over a tolerance sweep",
              metacont::run_bench_lyapunov);
  add_command(app, cli, "bench-distance",
              "timing table for warm versus cold distance sweeps",
              metacont::run_bench_distance);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    metacont::RunConfig config = metacont::load_config(cli.config_path);
    metacont::ConfigOverrides overrides;
    overrides.seed = cli.seed;
    overrides.tol = cli.tol;
    overrides.h = cli.h;
    overrides.sigma = cli.sigma;
    if (cli.out) overrides.out = std::filesystem::path(*cli.out);
    metacont::apply_overrides(config, overrides);
    metacont::RunReport report;
    return cli.runner(config, report);
  } catch (const metacont::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
