#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "gradlab/autoencoder.hpp"
#include "gradlab/budget.hpp"
#include "gradlab/config.hpp"
#include "gradlab/objective.hpp"
#include "gradlab/optimizer.hpp"

namespace gradlab {

// Everything a run needs, assembled from config + seed. The stochastic
// oracle (when set) owns mutable sampling state, so a Problem belongs to
// exactly one run; the underlying objective/data are shared and immutable.
struct Problem {
  ObjectiveHandle objective;
  std::shared_ptr<FiniteSumObjective> finite_sum;
  GradOracle stochastic_oracle;
  std::function<double(const Vector&)> test_loss;
  Vector x0;
  bool is_autoencoder = false;
  AutoencoderShape shape;
};

Problem build_problem(const ExperimentConfig& cfg, std::uint64_t seed);

// One experiment run. The result trace is deterministic in (cfg, seed).
RunResult run_experiment(const ExperimentConfig& cfg, std::uint64_t seed,
                         const std::optional<TheoremBudget>& budget = std::nullopt);

// Runs and persists trace CSV + metadata sidecar under cfg.out_dir.
struct SingleRunOutput {
  RunResult result;
  std::string trace_path;
  std::string meta_path;
};
SingleRunOutput run_and_write(const ExperimentConfig& cfg, std::uint64_t seed,
                              const std::string& name,
                              const std::optional<TheoremBudget>& budget = std::nullopt);

// ---- Grid search -------------------------------------------------------

struct GridCell {
  std::map<std::string, double> point;
  double final_loss = 0.0;
  RunStatus status = RunStatus::kExhaustedBudget;
};

struct GridResult {
  std::map<std::string, double> best;
  double best_loss = 0.0;
  std::vector<GridCell> cells;
  int extensions_used = 0;
  bool interior = false;  // best step size ended away from the grid edges
};

// Selection rule on (alpha, loss) pairs: minimum loss, ties toward the
// smaller step size; reports whether the winner sits on a grid edge.
struct GridSelection {
  double best_alpha = 0.0;
  bool at_low_edge = false;
  bool at_high_edge = false;
};
GridSelection select_step_size(const std::vector<std::pair<double, double>>& alpha_loss);

// Runs every cell; while the best step size sits on a grid edge, extends the
// step-size axis one point in that direction (by the grid's ratio), up to
// grid.max_extensions. Throws RunFailure if every cell diverged.
GridResult grid_search(const GridSpec& grid, const ExperimentConfig& base);

// ---- Certification -----------------------------------------------------

struct CertSeedResult {
  std::uint64_t seed = 0;
  RunStatus status = RunStatus::kExhaustedBudget;
  std::int64_t hit_t = -1;
  double min_grad_norm = 0.0;
};

struct CertReport {
  TheoremBudget budget;
  bool advisory = false;  // estimated metadata: report only, no certificate
  bool hit = false;
  std::int64_t t_star = -1;
  std::int64_t cap = -1;       // iteration cap the claim was checked against
  double achieved = 0.0;       // min grad norm, or min seed-mean squared norm
  double target = 0.0;         // epsilon, or mc_slack * epsilon^2
  std::int64_t decrease_violations = -1;  // deterministic RMSProp only
  std::int64_t precond_violations = 0;
  std::int64_t sign_violations = -1;  // stochastic only; certificate void if > 0
  double mc_slack = 1.0;
  std::vector<CertSeedResult> per_seed;
  std::vector<double> min_curve;  // min-so-far |grad| (det) or seed-mean |grad|^2 per t
  std::vector<TraceRecord> trace;  // deterministic certificates: the run trace

  bool certified() const { return hit && !advisory && sign_violations <= 0; }
  Json to_json() const;
  std::string summary_line() const;
};

CertReport certify_budget(const ExperimentConfig& cfg);

// ---- Sensitivity sweep over the shift parameter ------------------------

struct XiSweepRow {
  double xi = 0.0;
  double alpha = 0.0;  // step size used (possibly re-tuned)
  double final_train = 0.0;
  std::optional<double> final_test;
  double final_grad = 0.0;
  double min_grad = 0.0;
  RunStatus status = RunStatus::kExhaustedBudget;
  std::string trace_path;
};

struct XiSweepResult {
  std::vector<XiSweepRow> rows;
  std::vector<std::string> figure_paths;
};

// One run per xi value. With retune set, the step size is re-tuned per xi by
// a grid search; otherwise every run uses the configured hyperparameters.
XiSweepResult xi_sweep(const ExperimentConfig& base, const std::vector<double>& xis, bool retune,
                       const std::optional<GridSpec>& grid);

// ---- Multi-optimizer comparison ----------------------------------------

struct CompareVariant {
  std::string label;
  OptimizerSpec optimizer;
};

// ADAM (beta1 0.9 / 0.99), NAG (mu 0.9 / 0.99) and RMSProp at their default
// step sizes, overridable per method.
std::vector<CompareVariant> default_compare_variants();

struct CompareRun {
  std::string label;
  RunStatus status = RunStatus::kExhaustedBudget;
  double final_train = 0.0;
  std::optional<double> final_test;
  double final_grad = 0.0;
  double min_grad = 0.0;
  std::string trace_path;
};

struct CompareResult {
  std::vector<CompareRun> runs;
  std::vector<std::string> figure_paths;  // train loss, test loss, grad norm
  std::string summary_path;
  Json summary;  // reported observations; nothing here is asserted
};

CompareResult compare(const ExperimentConfig& base, const std::vector<CompareVariant>& variants);

// ---- Spectrum tracking ---------------------------------------------------

struct SpectrumResult {
  SingleRunOutput run;
  std::vector<std::string> figure_paths;  // lambda_min (linear), grad norm (log)
};

SpectrumResult spectrum_experiment(const ExperimentConfig& cfg);

}  // namespace gradlab
