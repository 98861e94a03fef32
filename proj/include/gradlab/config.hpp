#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "gradlab/optimizer.hpp"

namespace gradlab {

using Json = nlohmann::json;

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RunFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ObjectiveSpec {
  std::string name;
  Json params = Json::object();
};

struct OptimizerSpec {
  Method method = Method::kNag;
  std::string alpha_rule = "constant";  // constant | inv_sqrt_t | bias_corrected
  double alpha = 0.0;
  double mu = 0.0;
  double beta1 = 0.0;
  double beta2 = 0.0;
  double xi = 0.0;

  OptimizerConfig to_config() const;
  Json to_json() const;
};

struct BudgetSpec {
  std::string theorem;  // rmsprop_det | rmsprop_stoch | rmsprop_noshift | adam_det
  double epsilon = 0.1;
  double beta2 = 0.9;
  double xi = 1.0;
  double alpha0 = 0.0;     // no-shift rule only; 0 selects 1/L
  double mc_slack = 2.0;   // Monte-Carlo slack factor on eps^2 (stochastic)
  double adam_beta2 = 0.999;
};

enum class BatchMode { kFull, kMiniBatch };

struct ExperimentConfig {
  ObjectiveSpec objective;
  std::optional<OptimizerSpec> optimizer;
  std::optional<BudgetSpec> budget;  // exactly one of optimizer / budget
  BatchMode batch_mode = BatchMode::kFull;
  int batch_size = 100;
  std::int64_t max_steps = 100000;
  double epsilon = 0.0;
  std::vector<std::uint64_t> seeds = {1};
  std::int64_t lambda_min_stride = 0;
  std::int64_t record_stride = 1;
  std::string out_dir = "out";
  std::string run_name = "run";
  Json raw;  // the config exactly as supplied, for provenance
};

// Throws ConfigError with the offending field named in the message.
ExperimentConfig parse_experiment_config(const Json& j);
ExperimentConfig load_experiment_config(const std::string& path);

struct GridSpec {
  // Axis name -> values. "alpha" is the step-size axis and drives the
  // edge-extension rule; it must hold >= 3 points when the rule is on.
  std::map<std::string, std::vector<double>> axes;
  bool interior_rule = true;
  int max_extensions = 3;
};

GridSpec parse_grid_spec(const Json& j);

// Fills in the method's usual defaults (decay rates, shift, momentum) for
// fields the config left unset.
OptimizerSpec default_optimizer_spec(Method method);

}  // namespace gradlab
