#include "metacont/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "metacont/expression.hpp"
#include "metacont/spectral.hpp"

namespace metacont {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& context, const std::string& what) {
  throw ConfigError("config: " + context + ": " + what);
}

void check_keys(const json& obj, const std::string& context,
                const std::set<std::string>& allowed) {
  for (const auto& item : obj.items()) {
    if (!allowed.count(item.key())) {
      fail(context, "unknown key '" + item.key() + "'");
    }
  }
}

const json* find(const json& obj, const std::string& key) {
  auto it = obj.find(key);
  return it == obj.end() ? nullptr : &*it;
}

double as_double(const json& j, const std::string& context) {
  if (!j.is_number()) fail(context, "expected a number");
  return j.get<double>();
}

int as_int(const json& j, const std::string& context) {
  if (!j.is_number_integer()) fail(context, "expected an integer");
  return j.get<int>();
}

bool as_bool(const json& j, const std::string& context) {
  if (!j.is_boolean()) fail(context, "expected true or false");
  return j.get<bool>();
}

std::string as_string(const json& j, const std::string& context) {
  if (!j.is_string()) fail(context, "expected a string");
  return j.get<std::string>();
}

std::vector<double> as_number_list(const json& j, const std::string& context) {
  if (!j.is_array()) fail(context, "expected an array of numbers");
  std::vector<double> out;
  for (const auto& item : j) out.push_back(as_double(item, context));
  return out;
}

std::vector<std::vector<double>> as_number_grid(const json& j, const std::string& context) {
  if (!j.is_array()) fail(context, "expected an array of rows");
  std::vector<std::vector<double>> out;
  for (const auto& row : j) out.push_back(as_number_list(row, context));
  return out;
}

std::vector<std::string> as_string_list(const json& j, const std::string& context) {
  if (!j.is_array()) fail(context, "expected an array of strings");
  std::vector<std::string> out;
  for (const auto& item : j) out.push_back(as_string(item, context));
  return out;
}

std::vector<std::vector<std::string>> as_string_grid(const json& j,
                                                     const std::string& context) {
  if (!j.is_array()) fail(context, "expected an array of rows");
  std::vector<std::vector<std::string>> out;
  for (const auto& row : j) out.push_back(as_string_list(row, context));
  return out;
}

ModelConfig parse_model(const json& j) {
  ModelConfig model;
  if (j.is_string()) {
    model.name = j.get<std::string>();
    return model;
  }
  if (!j.is_object()) fail("model", "expected an identifier or an object");

  if (find(j, "drift")) {
    check_keys(j, "model",
               {"name", "dim_state", "dim_noise", "drift", "diffusion", "jacobian",
                "potential"});
    model.name = find(j, "name") ? as_string(*find(j, "name"), "model.name") : "custom";
    if (!find(j, "dim_state") || !find(j, "dim_noise")) {
      fail("model", "inline systems need dim_state and dim_noise");
    }
    model.dim_state = as_int(*find(j, "dim_state"), "model.dim_state");
    model.dim_noise = as_int(*find(j, "dim_noise"), "model.dim_noise");
    if (model.dim_state < 1 || model.dim_noise < 1) {
      fail("model", "dimensions must be positive");
    }
    model.drift = as_string_list(*find(j, "drift"), "model.drift");
    if (!find(j, "diffusion")) fail("model", "inline systems need a diffusion grid");
    model.diffusion = as_string_grid(*find(j, "diffusion"), "model.diffusion");
    if (const json* jac = find(j, "jacobian")) {
      model.jacobian = as_string_grid(*jac, "model.jacobian");
    }
    if (const json* pot = find(j, "potential")) {
      model.potential = as_string(*pot, "model.potential");
    }
    return model;
  }

  check_keys(j, "model", {"name", "params"});
  if (!find(j, "name")) fail("model", "missing name");
  model.name = as_string(*find(j, "name"), "model.name");
  if (const json* params = find(j, "params")) {
    if (!params->is_object()) fail("model.params", "expected an object");
    if (model.name == "neural2") {
      check_keys(*params, "model.params", {"beta", "g", "r", "theta", "y1", "y2"});
      Neural2Params p;
      if (const json* v = find(*params, "beta")) p.beta = as_double(*v, "model.params.beta");
      if (const json* v = find(*params, "g")) p.g = as_double(*v, "model.params.g");
      if (const json* v = find(*params, "r")) p.r = as_double(*v, "model.params.r");
      if (const json* v = find(*params, "theta")) p.theta = as_double(*v, "model.params.theta");
      if (const json* v = find(*params, "y1")) p.y1 = as_double(*v, "model.params.y1");
      if (const json* v = find(*params, "y2")) p.y2 = as_double(*v, "model.params.y2");
      model.neural2 = p;
    } else if (model.name == "rosenzweig-macarthur") {
      check_keys(*params, "model.params", {"beta", "m"});
      RmParams p;
      if (const json* v = find(*params, "beta")) p.beta = as_double(*v, "model.params.beta");
      if (const json* v = find(*params, "m")) p.m = as_double(*v, "model.params.m");
      model.rm = p;
    } else if (model.name == "pitchfork") {
      check_keys(*params, "model.params", {});
    } else {
      fail("model", "unknown built-in '" + model.name + "'");
    }
  }
  return model;
}

ParameterConfig parse_parameter(const json& j) {
  if (!j.is_object()) fail("parameter", "expected an object");
  check_keys(j, "parameter", {"name", "start", "step", "n_steps", "min", "max"});
  ParameterConfig p;
  if (const json* v = find(j, "name")) p.name = as_string(*v, "parameter.name");
  if (const json* v = find(j, "start")) p.start = as_double(*v, "parameter.start");
  if (const json* v = find(j, "step")) p.step = as_double(*v, "parameter.step");
  if (const json* v = find(j, "n_steps")) p.n_steps = as_int(*v, "parameter.n_steps");
  if (const json* v = find(j, "min")) p.min = as_double(*v, "parameter.min");
  if (const json* v = find(j, "max")) p.max = as_double(*v, "parameter.max");
  if (p.step <= 0.0) fail("parameter", "step must be positive");
  if (p.n_steps < 1) fail("parameter", "n_steps must be >= 1");
  if (p.min > p.max) fail("parameter", "min exceeds max");
  return p;
}

ContinuationConfig parse_continuation(const json& j) {
  if (!j.is_object()) fail("continuation", "expected an object");
  check_keys(j, "continuation",
             {"newton_tol", "newton_max_iter", "adaptive", "min_step", "marginal_band",
              "detect_closed_loop"});
  ContinuationConfig c;
  if (const json* v = find(j, "newton_tol")) c.newton_tol = as_double(*v, "continuation.newton_tol");
  if (const json* v = find(j, "newton_max_iter")) {
    c.newton_max_iter = as_int(*v, "continuation.newton_max_iter");
  }
  if (const json* v = find(j, "adaptive")) c.adaptive = as_bool(*v, "continuation.adaptive");
  if (const json* v = find(j, "min_step")) c.min_step = as_double(*v, "continuation.min_step");
  if (const json* v = find(j, "marginal_band")) {
    c.marginal_band = as_double(*v, "continuation.marginal_band");
  }
  if (const json* v = find(j, "detect_closed_loop")) {
    c.detect_closed_loop = as_bool(*v, "continuation.detect_closed_loop");
  }
  if (c.newton_tol <= 0.0) fail("continuation", "newton_tol must be positive");
  if (c.newton_max_iter < 1) fail("continuation", "newton_max_iter must be >= 1");
  return c;
}

std::vector<SeedConfig> parse_seeds(const json& j) {
  if (!j.is_array()) fail("seeds", "expected an array");
  std::vector<SeedConfig> seeds;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string context = "seeds[" + std::to_string(i) + "]";
    const json& entry = j[i];
    if (!entry.is_object()) fail(context, "expected an object");
    check_keys(entry, context, {"x0", "direction", "n_steps"});
    SeedConfig seed;
    if (!find(entry, "x0")) fail(context, "missing x0");
    seed.x0 = as_number_list(*find(entry, "x0"), context + ".x0");
    if (seed.x0.empty()) fail(context, "x0 must be nonempty");
    if (const json* v = find(entry, "direction")) {
      seed.direction = as_int(*v, context + ".direction");
      if (seed.direction != 1 && seed.direction != -1) {
        fail(context, "direction must be +1 or -1");
      }
    }
    if (const json* v = find(entry, "n_steps")) {
      seed.n_steps = as_int(*v, context + ".n_steps");
      if (*seed.n_steps < 1) fail(context, "n_steps must be >= 1");
    }
    seeds.push_back(std::move(seed));
  }
  return seeds;
}

NoiseConfig parse_noise(const json& j) {
  if (!j.is_object()) fail("noise", "expected an object");
  check_keys(j, "noise", {"sigma", "matrix"});
  NoiseConfig n;
  if (const json* v = find(j, "sigma")) n.sigma = as_double(*v, "noise.sigma");
  if (n.sigma < 0.0) fail("noise", "sigma must be nonnegative");
  if (const json* v = find(j, "matrix")) {
    n.matrix = as_number_grid(*v, "noise.matrix");
    const std::size_t rows = n.matrix->size();
    if (rows == 0) fail("noise.matrix", "matrix must be nonempty");
    for (const auto& row : *n.matrix) {
      if (row.size() != rows) fail("noise.matrix", "matrix must be square");
    }
  }
  return n;
}

SolverConfig parse_solver(const json& j) {
  if (!j.is_object()) fail("solver", "expected an object");
  check_keys(j, "solver", {"method", "tol", "max_iter", "q"});
  SolverConfig s;
  if (const json* v = find(j, "method")) {
    const std::string method = as_string(*v, "solver.method");
    if (method == "gauss-seidel") {
      s.method = LyapunovMethod::GaussSeidel;
    } else if (method == "smith") {
      s.method = LyapunovMethod::Smith;
    } else if (method == "bartels-stewart") {
      s.method = LyapunovMethod::BartelsStewart;
    } else {
      fail("solver.method",
           "unknown method '" + method + "' (gauss-seidel, smith or bartels-stewart)");
    }
  }
  if (const json* v = find(j, "tol")) s.tol = as_double(*v, "solver.tol");
  if (const json* v = find(j, "max_iter")) s.max_iter = as_int(*v, "solver.max_iter");
  if (const json* v = find(j, "q")) s.q = as_double(*v, "solver.q");
  if (s.tol <= 0.0) fail("solver", "tol must be positive");
  if (s.max_iter < 1) fail("solver", "max_iter must be >= 1");
  if (s.q <= 0.0) fail("solver", "q must be positive");
  return s;
}

DistanceConfig parse_distance(const json& j) {
  if (!j.is_object()) fail("distance", "expected an object");
  check_keys(j, "distance", {"enabled", "pairing", "every_k", "tol", "max_iter"});
  DistanceConfig d;
  if (const json* v = find(j, "enabled")) d.enabled = as_bool(*v, "distance.enabled");
  if (const json* v = find(j, "pairing")) {
    const std::vector<double> pair = as_number_list(*v, "distance.pairing");
    if (pair.size() != 2) fail("distance.pairing", "expected two seed indices");
    d.pair_a = static_cast<int>(pair[0]);
    d.pair_b = static_cast<int>(pair[1]);
    if (d.pair_a < 0 || d.pair_b < 0) fail("distance.pairing", "indices must be >= 0");
    if (d.pair_a == d.pair_b) fail("distance.pairing", "indices must differ");
  }
  if (const json* v = find(j, "every_k")) d.every_k = as_int(*v, "distance.every_k");
  if (const json* v = find(j, "tol")) d.tol = as_double(*v, "distance.tol");
  if (const json* v = find(j, "max_iter")) d.max_iter = as_int(*v, "distance.max_iter");
  if (d.every_k < 1) fail("distance", "every_k must be >= 1");
  if (d.tol <= 0.0) fail("distance", "tol must be positive");
  if (d.max_iter < 1) fail("distance", "max_iter must be >= 1");
  return d;
}

SimulateConfig parse_simulate(const json& j) {
  if (!j.is_object()) fail("simulate", "expected an object");
  check_keys(j, "simulate",
             {"dt", "t_max", "rho", "n_paths", "seed", "mu_values", "p1", "p2",
              "grid_min", "grid_max", "grid_points", "store_every"});
  SimulateConfig s;
  if (const json* v = find(j, "dt")) s.dt = as_double(*v, "simulate.dt");
  if (const json* v = find(j, "t_max")) s.t_max = as_double(*v, "simulate.t_max");
  if (const json* v = find(j, "rho")) s.rho = as_double(*v, "simulate.rho");
  if (const json* v = find(j, "n_paths")) s.n_paths = as_int(*v, "simulate.n_paths");
  if (const json* v = find(j, "seed")) {
    if (!v->is_number_integer()) fail("simulate.seed", "expected an integer");
    s.seed = v->get<std::uint64_t>();
  }
  if (const json* v = find(j, "mu_values")) {
    s.mu_values = as_number_list(*v, "simulate.mu_values");
  }
  if (s.mu_values.empty()) fail("simulate", "mu_values must be nonempty");
  if (const json* v = find(j, "p1")) s.p1 = as_number_list(*v, "simulate.p1");
  if (const json* v = find(j, "p2")) s.p2 = as_number_list(*v, "simulate.p2");
  if (const json* v = find(j, "grid_min")) s.grid_min = as_number_list(*v, "simulate.grid_min");
  if (const json* v = find(j, "grid_max")) s.grid_max = as_number_list(*v, "simulate.grid_max");
  if (const json* v = find(j, "grid_points")) s.grid_points = as_int(*v, "simulate.grid_points");
  if (const json* v = find(j, "store_every")) s.store_every = as_int(*v, "simulate.store_every");
  if (s.dt <= 0.0) fail("simulate", "dt must be positive");
  if (s.t_max <= 0.0) fail("simulate", "t_max must be positive");
  if (s.rho <= 0.0) fail("simulate", "rho must be positive");
  if (s.n_paths < 1) fail("simulate", "n_paths must be >= 1");
  if (static_cast<bool>(s.p1) != static_cast<bool>(s.p2)) {
    fail("simulate", "p1 and p2 must be given together");
  }
  if (!s.p1 && (s.grid_min.empty() || s.grid_max.empty())) {
    fail("simulate", "need either p1/p2 or grid_min/grid_max for equilibrium search");
  }
  if (s.grid_points < 2) fail("simulate", "grid_points must be >= 2");
  if (s.store_every < 0) fail("simulate", "store_every must be >= 0");
  return s;
}

KramersConfig parse_kramers(const json& j) {
  if (!j.is_object()) fail("kramers", "expected an object");
  check_keys(j, "kramers", {"sigma", "min_seed", "saddle_seed"});
  KramersConfig k;
  if (!find(j, "sigma")) fail("kramers", "missing sigma list");
  k.sigma = as_number_list(*find(j, "sigma"), "kramers.sigma");
  if (k.sigma.empty()) fail("kramers", "sigma list must be nonempty");
  for (double s : k.sigma) {
    if (s <= 0.0) fail("kramers", "sigma values must be positive");
  }
  if (!find(j, "min_seed") || !find(j, "saddle_seed")) {
    fail("kramers", "need min_seed and saddle_seed");
  }
  k.min_seed = as_number_list(*find(j, "min_seed"), "kramers.min_seed");
  k.saddle_seed = as_number_list(*find(j, "saddle_seed"), "kramers.saddle_seed");
  if (k.min_seed.empty() || k.saddle_seed.empty()) {
    fail("kramers", "seeds must be nonempty");
  }
  return k;
}

OutputConfig parse_output(const json& j) {
  if (!j.is_object()) fail("output", "expected an object");
  check_keys(j, "output", {"dir", "format"});
  OutputConfig o;
  if (const json* v = find(j, "dir")) o.dir = as_string(*v, "output.dir");
  if (const json* v = find(j, "format")) {
    const std::string format = as_string(*v, "output.format");
    if (format == "csv") {
      o.format = OutputFormat::Csv;
    } else if (format == "json") {
      o.format = OutputFormat::Json;
    } else {
      fail("output.format", "unknown format '" + format + "' (csv or json)");
    }
  }
  return o;
}

}  // namespace

RunConfig parse_config(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: malformed JSON: ") + e.what());
  }
  if (!root.is_object()) throw ConfigError("config: top level must be an object");
  check_keys(root, "top level",
             {"model", "parameter", "continuation", "seeds", "noise", "confidence",
              "solver", "distance", "simulate", "kramers", "output"});

  RunConfig config;
  if (const json* v = find(root, "model")) {
    config.model = parse_model(*v);
  } else {
    throw ConfigError("config: missing model");
  }
  if (const json* v = find(root, "parameter")) config.parameter = parse_parameter(*v);
  if (const json* v = find(root, "continuation")) config.continuation = parse_continuation(*v);
  if (const json* v = find(root, "seeds")) config.seeds = parse_seeds(*v);
  if (const json* v = find(root, "noise")) config.noise = parse_noise(*v);
  if (const json* v = find(root, "confidence")) {
    if (!v->is_object()) fail("confidence", "expected an object");
    check_keys(*v, "confidence", {"h"});
    if (const json* h = find(*v, "h")) config.h = as_double(*h, "confidence.h");
  }
  if (config.h <= 0.0) throw ConfigError("config: confidence.h must be positive");
  if (const json* v = find(root, "solver")) config.solver = parse_solver(*v);
  if (const json* v = find(root, "distance")) config.distance = parse_distance(*v);
  if (const json* v = find(root, "simulate")) config.simulate = parse_simulate(*v);
  if (const json* v = find(root, "kramers")) config.kramers = parse_kramers(*v);
  if (const json* v = find(root, "output")) config.output = parse_output(*v);
  return config;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("config: cannot open '" + path.string() + "'");
  }
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str());
}

void apply_overrides(RunConfig& config, const ConfigOverrides& overrides) {
  if (overrides.seed && config.simulate) config.simulate->seed = *overrides.seed;
  if (overrides.tol) {
    if (*overrides.tol <= 0.0) throw ConfigError("config: --tol must be positive");
    config.solver.tol = *overrides.tol;
    config.distance.tol = *overrides.tol;
  }
  if (overrides.h) {
    if (*overrides.h <= 0.0) throw ConfigError("config: --h must be positive");
    config.h = *overrides.h;
  }
  if (overrides.sigma) {
    if (*overrides.sigma < 0.0) throw ConfigError("config: --sigma must be nonnegative");
    config.noise.sigma = *overrides.sigma;
    if (config.kramers) {
      if (*overrides.sigma <= 0.0) {
        throw ConfigError("config: --sigma must be positive for kramers estimates");
      }
      config.kramers->sigma = {*overrides.sigma};
    }
  }
  if (overrides.out) config.output.dir = *overrides.out;
}

SdeSystem instantiate_model(const RunConfig& config) {
  const ModelConfig& m = config.model;
  SdeSystem system;
  if (m.inline_system()) {
    system = make_expression_system(m.name, m.dim_state, m.dim_noise, m.drift,
                                    m.diffusion, m.jacobian, m.potential);
  } else if (m.name == "neural2") {
    system = make_neural2(m.neural2.value_or(Neural2Params{}));
  } else if (m.name == "rosenzweig-macarthur") {
    system = make_rosenzweig_macarthur(m.rm.value_or(RmParams{}));
  } else {
    system = make_builtin(m.name);
  }

  if (config.noise.matrix) {
    const std::size_t rows = config.noise.matrix->size();
    if (static_cast<int>(rows) != system.dim_state) {
      throw ConfigError("config: noise.matrix size does not match the model dimension");
    }
    Eigen::MatrixXd structure(rows, rows);
    for (std::size_t i = 0; i < rows; ++i) {
      for (std::size_t j = 0; j < rows; ++j) {
        structure(static_cast<int>(i), static_cast<int>(j)) = (*config.noise.matrix)[i][j];
      }
    }
    Eigen::MatrixXd factor;
    try {
      factor = psd_sqrt_factor(structure);
    } catch (const std::exception& e) {
      throw ConfigError(std::string("config: noise.matrix is not PSD: ") + e.what());
    }
    system.diffusion = [factor](const Eigen::VectorXd&, double) { return factor; };
    system.dim_noise = static_cast<int>(rows);
  }
  return system;
}

NoiseSpec make_noise_spec(const RunConfig& config) {
  NoiseSpec spec;
  spec.sigma = config.noise.sigma;
  spec.mode = NoiseMode::AdditiveConstant;
  if (!config.noise.matrix) {
    if (config.model.name == "rosenzweig-macarthur" && !config.model.inline_system()) {
      spec.mode = NoiseMode::StateDependent;
    } else if (config.model.inline_system()) {
      for (const auto& row : config.model.diffusion) {
        for (const auto& entry : row) {
          if (Expression::parse(entry, config.model.dim_state).depends_on_state()) {
            spec.mode = NoiseMode::StateDependent;
          }
        }
      }
    }
  }
  return spec;
}

}  // namespace metacont
