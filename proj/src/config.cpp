#include "gradlab/config.hpp"

#include <fstream>

namespace gradlab {

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw ConfigError("config error at '" + path + "': " + what);
}

const Json& require(const Json& j, const std::string& key, const std::string& path) {
  if (!j.is_object()) fail(path, "expected an object");
  auto it = j.find(key);
  if (it == j.end()) fail(path + "." + key, "missing required field");
  return *it;
}

double as_double(const Json& j, const std::string& path) {
  if (!j.is_number()) fail(path, "expected a number");
  return j.get<double>();
}

std::int64_t as_int(const Json& j, const std::string& path) {
  if (!j.is_number_integer()) fail(path, "expected an integer");
  return j.get<std::int64_t>();
}

std::string as_string(const Json& j, const std::string& path) {
  if (!j.is_string()) fail(path, "expected a string");
  return j.get<std::string>();
}

double get_double(const Json& j, const std::string& key, double fallback,
                  const std::string& path) {
  if (!j.contains(key)) return fallback;
  return as_double(j.at(key), path + "." + key);
}

}  // namespace

OptimizerSpec default_optimizer_spec(Method method) {
  OptimizerSpec s;
  s.method = method;
  switch (method) {
    case Method::kNag:
      s.alpha = 3e-4;
      s.mu = 0.9;
      break;
    case Method::kRmsProp:
      s.alpha = 1e-4;
      s.beta2 = 0.9;
      s.xi = 1e-10;
      break;
    case Method::kAdam:
      s.alpha = 1e-3;
      s.alpha_rule = "bias_corrected";
      s.beta1 = 0.9;
      s.beta2 = 0.999;
      s.xi = 1e-8;
      break;
  }
  return s;
}

OptimizerConfig OptimizerSpec::to_config() const {
  OptimizerConfig cfg;
  cfg.method = method;
  cfg.mu = mu;
  cfg.beta1 = beta1;
  cfg.beta2 = beta2;
  cfg.xi = xi;
  if (alpha_rule == "constant") {
    cfg.alpha_rule = ConstantStep{alpha};
  } else if (alpha_rule == "inv_sqrt_t") {
    cfg.alpha_rule = InvSqrtStep{alpha};
  } else if (alpha_rule == "bias_corrected") {
    cfg.alpha_rule = BiasCorrectedStep{alpha};
  } else {
    throw ConfigError("config error at 'optimizer.alpha_rule': unknown rule '" + alpha_rule +
                      "' (expected constant|inv_sqrt_t|bias_corrected)");
  }
  cfg.validate();
  return cfg;
}

Json OptimizerSpec::to_json() const {
  return Json{{"method", method_name(method)}, {"alpha_rule", alpha_rule}, {"alpha", alpha},
              {"mu", mu},                      {"beta1", beta1},           {"beta2", beta2},
              {"xi", xi}};
}

namespace {

OptimizerSpec parse_optimizer_spec(const Json& j, const std::string& path) {
  const std::string name = as_string(require(j, "method", path), path + ".method");
  Method method;
  try {
    method = method_from_name(name);
  } catch (const std::invalid_argument& e) {
    fail(path + ".method", e.what());
  }
  OptimizerSpec s = default_optimizer_spec(method);
  if (j.contains("alpha")) s.alpha = as_double(j.at("alpha"), path + ".alpha");
  if (j.contains("alpha_rule"))
    s.alpha_rule = as_string(j.at("alpha_rule"), path + ".alpha_rule");
  s.mu = get_double(j, "mu", s.mu, path);
  s.beta1 = get_double(j, "beta1", s.beta1, path);
  s.beta2 = get_double(j, "beta2", s.beta2, path);
  s.xi = get_double(j, "xi", s.xi, path);
  try {
    s.to_config();
  } catch (const std::invalid_argument& e) {
    fail(path, e.what());
  }
  return s;
}

BudgetSpec parse_budget_spec(const Json& j, const std::string& path) {
  BudgetSpec b;
  b.theorem = as_string(require(j, "theorem", path), path + ".theorem");
  b.epsilon = as_double(require(j, "epsilon", path), path + ".epsilon");
  b.beta2 = get_double(j, "beta2", b.beta2, path);
  b.xi = get_double(j, "xi", b.xi, path);
  b.alpha0 = get_double(j, "alpha0", b.alpha0, path);
  b.mc_slack = get_double(j, "mc_slack", b.mc_slack, path);
  b.adam_beta2 = get_double(j, "adam_beta2", b.adam_beta2, path);
  if (b.theorem != "rmsprop_det" && b.theorem != "rmsprop_stoch" &&
      b.theorem != "rmsprop_noshift" && b.theorem != "adam_det") {
    fail(path + ".theorem", "unknown theorem '" + b.theorem + "'");
  }
  if (!(b.epsilon > 0.0)) fail(path + ".epsilon", "must be > 0");
  return b;
}

}  // namespace

ExperimentConfig parse_experiment_config(const Json& j) {
  if (!j.is_object()) throw ConfigError("config error at '<root>': expected an object");
  ExperimentConfig cfg;
  cfg.raw = j;

  const Json& obj = require(j, "objective", "<root>");
  cfg.objective.name = as_string(require(obj, "name", "objective"), "objective.name");
  cfg.objective.params = obj.contains("params") ? obj.at("params") : Json::object();

  const bool has_opt = j.contains("optimizer");
  const bool has_budget = j.contains("budget");
  if (has_opt == has_budget)
    throw ConfigError("config error at '<root>': exactly one of 'optimizer' or 'budget' required");
  if (has_opt) cfg.optimizer = parse_optimizer_spec(j.at("optimizer"), "optimizer");
  if (has_budget) cfg.budget = parse_budget_spec(j.at("budget"), "budget");

  if (j.contains("batch")) {
    const Json& b = j.at("batch");
    const std::string mode = as_string(require(b, "mode", "batch"), "batch.mode");
    if (mode == "full") {
      cfg.batch_mode = BatchMode::kFull;
    } else if (mode == "minibatch") {
      cfg.batch_mode = BatchMode::kMiniBatch;
      cfg.batch_size = static_cast<int>(as_int(require(b, "size", "batch"), "batch.size"));
      if (cfg.batch_size < 1) fail("batch.size", "must be >= 1");
    } else {
      fail("batch.mode", "expected full|minibatch");
    }
  }

  if (j.contains("max_steps")) cfg.max_steps = as_int(j.at("max_steps"), "max_steps");
  if (cfg.max_steps < 1) fail("max_steps", "must be >= 1");
  if (j.contains("epsilon")) cfg.epsilon = as_double(j.at("epsilon"), "epsilon");
  if (j.contains("seeds")) {
    if (!j.at("seeds").is_array() || j.at("seeds").empty())
      fail("seeds", "expected a non-empty array");
    cfg.seeds.clear();
    for (const auto& s : j.at("seeds"))
      cfg.seeds.push_back(static_cast<std::uint64_t>(as_int(s, "seeds[]")));
  }
  if (j.contains("lambda_min_stride"))
    cfg.lambda_min_stride = as_int(j.at("lambda_min_stride"), "lambda_min_stride");
  if (cfg.lambda_min_stride < 0) fail("lambda_min_stride", "must be >= 0");
  if (j.contains("record_stride")) cfg.record_stride = as_int(j.at("record_stride"), "record_stride");
  if (cfg.record_stride < 1) fail("record_stride", "must be >= 1");
  if (j.contains("out_dir")) cfg.out_dir = as_string(j.at("out_dir"), "out_dir");
  if (j.contains("run_name")) cfg.run_name = as_string(j.at("run_name"), "run_name");
  return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config error: cannot open '" + path + "'");
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ConfigError("config error in '" + path + "': " + e.what());
  }
  return parse_experiment_config(j);
}

GridSpec parse_grid_spec(const Json& j) {
  GridSpec g;
  if (!j.is_object()) throw ConfigError("config error at 'grid': expected an object");
  const Json& axes = require(j, "axes", "grid");
  if (!axes.is_object() || axes.empty()) fail("grid.axes", "expected a non-empty object");
  for (auto it = axes.begin(); it != axes.end(); ++it) {
    if (!it.value().is_array() || it.value().empty())
      fail("grid.axes." + it.key(), "expected a non-empty array");
    std::vector<double> vals;
    for (const auto& v : it.value()) vals.push_back(as_double(v, "grid.axes." + it.key() + "[]"));
    g.axes[it.key()] = vals;
  }
  if (j.contains("interior_rule")) {
    if (!j.at("interior_rule").is_boolean()) fail("grid.interior_rule", "expected a boolean");
    g.interior_rule = j.at("interior_rule").get<bool>();
  }
  if (j.contains("max_extensions"))
    g.max_extensions = static_cast<int>(as_int(j.at("max_extensions"), "grid.max_extensions"));
  if (g.max_extensions < 0) fail("grid.max_extensions", "must be >= 0");
  if (!g.axes.count("alpha")) fail("grid.axes", "a step-size axis 'alpha' is required");
  if (g.interior_rule && g.axes.at("alpha").size() < 3)
    fail("grid.axes.alpha", "interior rule needs at least 3 step sizes");
  return g;
}

}  // namespace gradlab
