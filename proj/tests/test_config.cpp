#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "metacont/config.hpp"
#include "metacont/expression.hpp"

using namespace metacont;

namespace {

Eigen::VectorXd vec1(double a) {
  Eigen::VectorXd v(1);
  v << a;
  return v;
}

}  // namespace

TEST_CASE("a full document parses into the expected values", "[config]") {
  const RunConfig config = parse_config(R"({
    "model": {"name": "neural2", "params": {"beta": 1.2, "theta": 0.25}},
    "parameter": {"name": "I_c", "start": 0.7, "step": 0.002, "n_steps": 1500,
                  "min": 0.0, "max": 2.0},
    "continuation": {"newton_tol": 1e-11, "newton_max_iter": 30, "adaptive": true,
                     "min_step": 1e-5, "marginal_band": 1e-7,
                     "detect_closed_loop": false},
    "seeds": [{"x0": [0.00088, 0.7756], "direction": -1, "n_steps": 500},
              {"x0": [0.8169, 0.00044]}],
    "noise": {"sigma": 0.3, "matrix": [[1.0, 0.4], [0.4, 1.0]]},
    "confidence": {"h": 2.5},
    "solver": {"method": "smith", "tol": 1e-10, "max_iter": 500, "q": 0.2},
    "distance": {"enabled": true, "pairing": [0, 1], "every_k": 5, "tol": 1e-9,
                 "max_iter": 100},
    "simulate": {"dt": 0.002, "t_max": 200.0, "rho": 0.04, "n_paths": 50,
                 "seed": 99, "mu_values": [0.9, 1.1], "p1": [0.0, 0.78],
                 "p2": [0.82, 0.0], "store_every": 10},
    "kramers": {"sigma": [0.3, 0.4], "min_seed": [1.0, 0.0], "saddle_seed": [0.0, 0.0]},
    "output": {"dir": "results", "format": "json"}
  })");

  CHECK(config.model.name == "neural2");
  REQUIRE(config.model.neural2.has_value());
  CHECK(config.model.neural2->beta == 1.2);
  CHECK(config.model.neural2->theta == 0.25);
  CHECK(config.model.neural2->g == 0.5);
  CHECK(config.parameter.name == "I_c");
  CHECK(config.parameter.start == 0.7);
  CHECK(config.parameter.step == 0.002);
  CHECK(config.parameter.n_steps == 1500);
  CHECK(config.parameter.min == 0.0);
  CHECK(config.parameter.max == 2.0);
  CHECK(config.continuation.newton_tol == 1e-11);
  CHECK(config.continuation.adaptive);
  CHECK_FALSE(config.continuation.detect_closed_loop);
  REQUIRE(config.seeds.size() == 2);
  CHECK(config.seeds[0].direction == -1);
  REQUIRE(config.seeds[0].n_steps.has_value());
  CHECK(*config.seeds[0].n_steps == 500);
  CHECK(config.seeds[1].direction == 1);
  CHECK_FALSE(config.seeds[1].n_steps.has_value());
  CHECK(config.noise.sigma == 0.3);
  REQUIRE(config.noise.matrix.has_value());
  CHECK((*config.noise.matrix)[0][1] == 0.4);
  CHECK(config.h == 2.5);
  CHECK(config.solver.method == LyapunovMethod::Smith);
  CHECK(config.solver.tol == 1e-10);
  CHECK(config.distance.enabled);
  CHECK(config.distance.pair_a == 0);
  CHECK(config.distance.pair_b == 1);
  CHECK(config.distance.every_k == 5);
  REQUIRE(config.simulate.has_value());
  CHECK(config.simulate->seed == 99);
  CHECK(config.simulate->mu_values.size() == 2);
  REQUIRE(config.simulate->p1.has_value());
  CHECK(config.simulate->store_every == 10);
  REQUIRE(config.kramers.has_value());
  CHECK(config.kramers->sigma.size() == 2);
  CHECK(config.output.dir == std::filesystem::path("results"));
  CHECK(config.output.format == OutputFormat::Json);
}

TEST_CASE("a minimal document gets the documented defaults", "[config]") {
  const RunConfig config = parse_config(R"({"model": "pitchfork"})");
  CHECK(config.model.name == "pitchfork");
  CHECK_FALSE(config.model.inline_system());
  CHECK(config.parameter.step == 1e-3);
  CHECK(config.parameter.n_steps == 1000);
  CHECK(config.continuation.newton_tol == 1e-10);
  CHECK(config.seeds.empty());
  CHECK(config.noise.sigma == 0.0);
  CHECK(config.h == 1.0);
  CHECK(config.solver.method == LyapunovMethod::GaussSeidel);
  CHECK(config.solver.tol == 1e-9);
  CHECK_FALSE(config.distance.enabled);
  CHECK_FALSE(config.simulate.has_value());
  CHECK_FALSE(config.kramers.has_value());
  CHECK(config.output.dir == std::filesystem::path("out"));
  CHECK(config.output.format == OutputFormat::Csv);
}

TEST_CASE("unknown keys are rejected everywhere", "[config]") {
  CHECK_THROWS_MATCHES(parse_config(R"({"model": "pitchfork", "extra": 1})"), ConfigError,
                       Catch::Matchers::MessageMatches(
                           Catch::Matchers::ContainsSubstring("unknown key 'extra'")));
  CHECK_THROWS_AS(
      parse_config(R"({"model": "pitchfork", "parameter": {"stepp": 0.1}})"), ConfigError);
  CHECK_THROWS_AS(
      parse_config(R"({"model": {"name": "neural2", "params": {"gain": 2}}})"), ConfigError);
  CHECK_THROWS_AS(
      parse_config(R"({"model": {"name": "pitchfork", "params": {"beta": 1}}})"),
      ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"model": "pitchfork",
    "simulate": {"mu_values": [1], "p1": [1], "p2": [-1], "walkers": 3}})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"model": "pitchfork",
    "output": {"folder": "x"}})"), ConfigError);
}

TEST_CASE("malformed documents fail before any computation", "[config]") {
  CHECK_THROWS_MATCHES(parse_config("not json"), ConfigError,
                       Catch::Matchers::MessageMatches(
                           Catch::Matchers::ContainsSubstring("malformed JSON")));
  CHECK_THROWS_AS(parse_config("[]"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"parameter": {}})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"model": {"name": "lorenz96",
    "params": {"f": 8}}})"), ConfigError);
}

TEST_CASE("numeric ranges are validated", "[config]") {
  CHECK_THROWS_AS(parse_config(R"({"model": "pitchfork",
    "parameter": {"step": 0.0}})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"model": "pitchfork",
    "parameter": {"n_steps": 0}})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"model": "pitchfork",
    "parameter": {"min": 2.0, "max": 1.0}})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"model": "pitchfork",
    "continuation": {"newton_tol": -1e-10}})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"model": "pitchfork",
    "seeds": [{"x0": [1.0], "direction": 2}]})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"model": "pitchfork",
    "seeds": [{"x0": []}]})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"model": "pitchfork",
    "seeds": [{"direction": 1}]})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"model": "pitchfork",
    "noise": {"sigma": -0.1}})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"model": "pitchfork",
    "noise": {"matrix": [[1, 0]]}})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"model": "pitchfork",
    "confidence": {"h": 0}})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"model": "pitchfork",
    "solver": {"method": "lu"}})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"model": "pitchfork",
    "solver": {"tol": 0}})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"model": "pitchfork",
    "distance": {"pairing": [1, 1]}})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"model": "pitchfork",
    "distance": {"pairing": [0, 1, 2]}})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"model": "pitchfork",
    "distance": {"every_k": 0}})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"model": "pitchfork",
    "output": {"format": "yaml"}})"), ConfigError);
}

TEST_CASE("simulation blocks need consistent targets", "[config]") {
  CHECK_THROWS_AS(parse_config(R"({"model": "pitchfork", "simulate": {}})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"model": "pitchfork",
    "simulate": {"mu_values": [1.0], "p1": [1.0]}})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"model": "pitchfork",
    "simulate": {"mu_values": [1.0]}})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"model": "pitchfork",
    "simulate": {"mu_values": [1.0], "grid_min": [-2], "grid_max": [2],
                 "grid_points": 1}})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"model": "pitchfork",
    "simulate": {"mu_values": [1.0], "p1": [1.0], "p2": [-1.0], "rho": 0}})"), ConfigError);
  CHECK_NOTHROW(parse_config(R"({"model": "pitchfork",
    "simulate": {"mu_values": [1.0], "grid_min": [-2], "grid_max": [2]}})"));
}

TEST_CASE("first-passage blocks need seeds and positive noise", "[config]") {
  CHECK_THROWS_AS(parse_config(R"({"model": "pitchfork", "kramers": {}})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"model": "pitchfork",
    "kramers": {"sigma": [], "min_seed": [1], "saddle_seed": [0]}})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"model": "pitchfork",
    "kramers": {"sigma": [0.0], "min_seed": [1], "saddle_seed": [0]}})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"model": "pitchfork",
    "kramers": {"sigma": [0.5], "min_seed": [1]}})"), ConfigError);
}

TEST_CASE("inline models parse and evaluate like the built-in", "[config]") {
  const RunConfig config = parse_config(R"({
    "model": {"name": "cubic", "dim_state": 1, "dim_noise": 1,
              "drift": ["mu*x1 - x1^3"], "diffusion": [["1"]],
              "jacobian": [["mu - 3*x1^2"]],
              "potential": "-mu/2*x1^2 + x1^4/4"}
  })");
  REQUIRE(config.model.inline_system());
  const SdeSystem inline_system = instantiate_model(config);
  const SdeSystem builtin = make_builtin("pitchfork");
  for (double x : {-1.2, 0.3, 0.9}) {
    CHECK(inline_system.drift(vec1(x), 1.4)[0] ==
          Catch::Approx(builtin.drift(vec1(x), 1.4)[0]).margin(1e-14));
    CHECK(inline_system.jacobian(vec1(x), 1.4)(0, 0) ==
          Catch::Approx(builtin.jacobian(vec1(x), 1.4)(0, 0)).margin(1e-14));
    CHECK(inline_system.potential(vec1(x), 1.4) ==
          Catch::Approx(builtin.potential(vec1(x), 1.4)).margin(1e-14));
  }

  CHECK_THROWS_AS(parse_config(R"({"model": {"dim_state": 1, "dim_noise": 1,
    "drift": ["x1"]}})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"model": {"drift": ["x1"],
    "diffusion": [["1"]]}})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"model": {"dim_state": 0, "dim_noise": 1,
    "drift": ["x1"], "diffusion": [["1"]]}})"), ConfigError);
}

TEST_CASE("a constant noise matrix replaces the model diffusion", "[config]") {
  const RunConfig config = parse_config(R"({
    "model": "neural2",
    "noise": {"sigma": 0.3, "matrix": [[1.0, 0.4], [0.4, 1.0]]}
  })");
  const SdeSystem system = instantiate_model(config);
  Eigen::VectorXd x(2);
  x << 0.5, 0.5;
  const Eigen::MatrixXd phi = system.diffusion(x, 0.7);
  Eigen::MatrixXd n(2, 2);
  n << 1.0, 0.4, 0.4, 1.0;
  CHECK(((phi * phi.transpose()) - n).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(make_noise_spec(config).mode == NoiseMode::AdditiveConstant);
  CHECK(make_noise_spec(config).sigma == 0.3);

  CHECK_THROWS_AS(instantiate_model(parse_config(R"({
    "model": "neural2", "noise": {"matrix": [[1.0]]}
  })")), ConfigError);
  CHECK_THROWS_AS(instantiate_model(parse_config(R"({
    "model": "pitchfork", "noise": {"matrix": [[-1.0]]}
  })")), ConfigError);
}

TEST_CASE("noise mode tracks state dependence of the diffusion", "[config]") {
  CHECK(make_noise_spec(parse_config(R"({"model": "rosenzweig-macarthur"})")).mode ==
        NoiseMode::StateDependent);
  CHECK(make_noise_spec(parse_config(R"({"model": "pitchfork"})")).mode ==
        NoiseMode::AdditiveConstant);
  CHECK(make_noise_spec(parse_config(R"({
    "model": {"name": "mult", "dim_state": 1, "dim_noise": 1,
              "drift": ["-x1"], "diffusion": [["x1"]]}
  })")).mode == NoiseMode::StateDependent);
  CHECK(make_noise_spec(parse_config(R"({
    "model": {"name": "add", "dim_state": 1, "dim_noise": 1,
              "drift": ["-x1"], "diffusion": [["2"]]}
  })")).mode == NoiseMode::AdditiveConstant);
  // A constant override forces additive noise even for built-ins that are
  // otherwise state dependent.
  CHECK(make_noise_spec(parse_config(R"({
    "model": "rosenzweig-macarthur", "noise": {"matrix": [[1.0, 0.0], [0.0, 1.0]]}
  })")).mode == NoiseMode::AdditiveConstant);
}

TEST_CASE("command line overrides are layered onto the file", "[config]") {
  RunConfig config = parse_config(R"({
    "model": "pitchfork",
    "simulate": {"mu_values": [1.0], "p1": [1.0], "p2": [-1.0]},
    "kramers": {"sigma": [0.2, 0.3], "min_seed": [1.0], "saddle_seed": [0.0]}
  })");

  ConfigOverrides overrides;
  overrides.seed = 1234;
  overrides.tol = 1e-11;
  overrides.h = 3.0;
  overrides.sigma = 0.45;
  overrides.out = std::filesystem::path("elsewhere");
  apply_overrides(config, overrides);
  CHECK(config.simulate->seed == 1234);
  CHECK(config.solver.tol == 1e-11);
  CHECK(config.distance.tol == 1e-11);
  CHECK(config.h == 3.0);
  CHECK(config.noise.sigma == 0.45);
  REQUIRE(config.kramers->sigma.size() == 1);
  CHECK(config.kramers->sigma[0] == 0.45);
  CHECK(config.output.dir == std::filesystem::path("elsewhere"));

  ConfigOverrides bad_h;
  bad_h.h = -1.0;
  CHECK_THROWS_AS(apply_overrides(config, bad_h), ConfigError);
  ConfigOverrides bad_tol;
  bad_tol.tol = 0.0;
  CHECK_THROWS_AS(apply_overrides(config, bad_tol), ConfigError);
  // Zero noise is fine in general but meaningless for first-passage output.
  ConfigOverrides zero_sigma;
  zero_sigma.sigma = 0.0;
  CHECK_THROWS_AS(apply_overrides(config, zero_sigma), ConfigError);
  RunConfig no_kramers = parse_config(R"({"model": "pitchfork"})");
  CHECK_NOTHROW(apply_overrides(no_kramers, zero_sigma));
  CHECK(no_kramers.noise.sigma == 0.0);
}

TEST_CASE("configs load from disk and report missing files", "[config]") {
  const std::filesystem::path dir =
      std::filesystem::temp_directory_path() / "metacont_config_test";
  std::filesystem::create_directories(dir);
  const std::filesystem::path path = dir / "run.json";
  {
    std::ofstream out(path);
    out << R"({"model": "pitchfork", "confidence": {"h": 6.0}})";
  }
  const RunConfig config = load_config(path);
  CHECK(config.h == 6.0);
  CHECK_THROWS_MATCHES(load_config(dir / "absent.json"), ConfigError,
                       Catch::Matchers::MessageMatches(
                           Catch::Matchers::ContainsSubstring("cannot open")));
  std::filesystem::remove_all(dir);
}
