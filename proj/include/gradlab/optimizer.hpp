#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "gradlab/objective.hpp"

namespace gradlab {

enum class Method { kNag, kRmsProp, kAdam };

const char* method_name(Method m);
Method method_from_name(const std::string& name);

// Step-size rules. AdamTheoremStep is the gradient-dependent schedule
// alpha_t = |g_t|^2 / (L (1 - beta1^t)^2) * 4 eps / (3 (eps + 2 sigma)^2).
struct ConstantStep {
  double alpha = 0.0;
};
struct InvSqrtStep {
  double alpha0 = 0.0;  // alpha0 / sqrt(t)
};
struct BiasCorrectedStep {
  double alpha = 0.0;  // alpha * sqrt(1 - beta2^t) / (1 - beta1^t)
};
struct AdamTheoremStep {
  double epsilon = 0.0;
  double sigma = 0.0;
  double lipschitz = 0.0;
};
using StepRule = std::variant<ConstantStep, InvSqrtStep, BiasCorrectedStep, AdamTheoremStep>;

struct OptimizerConfig {
  Method method = Method::kNag;
  StepRule alpha_rule = ConstantStep{0.0};
  double mu = 0.0;     // NAG momentum, [0, 1)
  double beta1 = 0.0;  // first-moment decay, [0, 1)
  double beta2 = 0.0;  // second-moment decay, [0, 1)
  double xi = 0.0;     // shift; >= 0, strictly positive for ADAM

  void validate() const;  // throws std::invalid_argument
};

double step_size(const StepRule& rule, const OptimizerConfig& cfg, std::int64_t t, const Vector& g);

// x is the iterate x_t; m, v the accumulators carried into step t (zero
// initially); t counts from 1 and is the index of the next update.
// NAG stores its velocity in v.
struct OptimizerState {
  Vector x;
  Vector m;
  Vector v;
  std::int64_t t = 1;
};

OptimizerState make_state(const Vector& x0);

// w_i = g_i / sqrt(v_i) on the support of v, 0 where v_i = 0.
// Rejects negative entries of v.
Vector penrose_sqrt_inv_apply(const Vector& v, const Vector& g);

// Single-update kernels. `g` is the (possibly stochastic) gradient at state.x
// and `alpha` the step size for step state.t; the counter is incremented.
void nag_update(OptimizerState& state, double mu, double alpha, const Vector& g);
void rmsprop_update(OptimizerState& state, double beta2, double xi, double alpha, const Vector& g);
void adam_update(OptimizerState& state, double beta1, double beta2, double xi, double alpha,
                 const Vector& g);

using GradOracle = std::function<Vector(const Vector&)>;

// One step of the configured method: queries the oracle once at state.x.
OptimizerState nag_step(OptimizerState state, const OptimizerConfig& cfg, const GradOracle& oracle);
OptimizerState rmsprop_step(OptimizerState state, const OptimizerConfig& cfg,
                            const GradOracle& oracle);
OptimizerState adam_step(OptimizerState state, const OptimizerConfig& cfg,
                         const GradOracle& oracle);
OptimizerState step(OptimizerState state, const OptimizerConfig& cfg, const GradOracle& oracle);

struct TraceRecord {
  std::int64_t t = 0;
  double f = 0.0;
  double grad_norm = 0.0;  // full-objective gradient norm
  double alpha = 0.0;
  std::optional<double> lambda_min;
  std::optional<double> f_test;
  double grad_norm_min = 0.0;  // min over recorded iterates so far
};

enum class RunStatus { kHitTolerance, kExhaustedBudget, kDiverged };

const char* run_status_name(RunStatus s);

struct StopRule {
  std::int64_t max_steps = 0;
  double epsilon = 0.0;  // stop once the full gradient norm is <= epsilon
};

struct RunHooks {
  // Gradient fed to the update; defaults to the full objective gradient.
  GradOracle oracle;
  std::function<double(const Vector&)> test_loss;  // fills the f_test column
  std::function<double(const Vector&)> min_eig;    // fills the lambda_min column
  std::int64_t lambda_min_stride = 0;              // 0 = never
  // Full f / gradient are evaluated (and the stop test applied) every
  // record_stride-th step; iterate 1 is always recorded.
  std::int64_t record_stride = 1;
  bool collect_iterates = false;  // keep every visited iterate (sign audits)
};

struct RunResult {
  OptimizerState final_state;
  std::vector<TraceRecord> trace;
  RunStatus status = RunStatus::kExhaustedBudget;
  std::int64_t hit_t = -1;  // first recorded iterate with grad_norm <= epsilon
  double min_grad_norm = 0.0;
  std::int64_t min_grad_t = -1;
  std::int64_t precond_violations = 0;  // RMSProp accumulator bound breaches
  std::vector<Vector> iterates;
  std::string diagnostic;
};

// Iterates the configured method until t > stop.max_steps or the full
// gradient norm drops to stop.epsilon. Non-finite values abort the run with
// status kDiverged and the trace collected so far.
RunResult run(OptimizerState init, const OptimizerConfig& cfg, const ObjectiveHandle& obj,
              const StopRule& stop, RunHooks hooks = {});

}  // namespace gradlab
