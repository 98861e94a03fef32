#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>

#include "gradlab/objective.hpp"
#include "gradlab/optimizer.hpp"

namespace gradlab {

enum class TheoremId { kRmsDet, kRmsStoch, kRmsNoShift, kAdamDet };

const char* theorem_name(TheoremId id);
TheoremId theorem_from_name(const std::string& name);

// A convergence certificate: the step rule and iteration cap under which the
// corresponding guarantee holds, plus every derived constant so the
// certificate can be audited offline.
struct TheoremBudget {
  TheoremId id = TheoremId::kRmsDet;
  double epsilon = 0.0;
  StepRule alpha_rule = ConstantStep{0.0};
  std::optional<std::int64_t> max_steps;  // unset: no explicit cap (no-shift rule)
  bool already_critical = false;          // start point already at the minimum value
  std::map<std::string, double> derived;

  // Optimizer configuration matching the budget's prescription.
  OptimizerConfig make_config() const;
};

// Iteration caps are real-valued bounds; round up, with a hair of slack so
// that analytically integral values are not bumped by floating-point noise.
std::int64_t ceil_with_slack(double x);

// Deterministic RMSProp, constant step:
//   alpha = (1 - beta2) xi / (L sqrt(sigma^2 + xi))
//   T     = ceil( (1/eps^2) * 2 L (sigma^2 + xi) (f_x1 - f_min) / ((1 - beta2) xi) )
// guarantees |grad f(x_t)| <= eps for some t <= T. Also derives the per-step
// decrease coefficient delta_sq = 1 / (2 sqrt(sigma^2 + xi)).
TheoremBudget rmsprop_det_budget(const ObjectiveMeta& meta, double f_x1, double beta2, double xi,
                                 double eps);

// Stochastic RMSProp over a sign-consistent finite sum:
//   T     = ceil( (1/eps^4) * 2 L sigma^2 (sigma^2 + xi) (f_x1 - f_min) / ((1 - beta2) xi) )
//   alpha = (1/sqrt(T)) * sqrt( 2 xi (1 - beta2) (f_x1 - f_min) / (sigma^2 L) )
// guarantees min_{t<=T} E|grad f(x_t)|^2 <= eps^2.
TheoremBudget rmsprop_stoch_budget(const ObjectiveMeta& meta, double f_x1, double beta2, double xi,
                                   double eps);

// Shift-free RMSProp uses alpha_t = alpha0 / sqrt(t); the iteration bound has
// no explicit constant, so the budget carries no cap and runs report the
// empirically observed hitting time.
double rmsprop_noshift_alpha(std::int64_t t, double alpha0);
TheoremBudget rmsprop_noshift_budget(double alpha0, double beta2, double eps);

// Deterministic ADAM instantiation:
//   beta1 = eps / (eps + 2 sigma),  xi = 2 sigma,
//   alpha_t = |g_t|^2 / (L (1 - beta1^t)^2) * 4 eps / (3 (eps + 2 sigma)^2),
//   T = ceil( 9 L sigma^2 (f_x2 - f_min) / eps^6 )   (x2: the second iterate)
// guarantees |grad f(x_t)| <= eps for some t <= T.
TheoremBudget adam_theorem_params(const ObjectiveMeta& meta, double f_x2, double eps,
                                  double beta2 = 0.999);

// Conventional ADAM schedule: alpha * sqrt(1 - beta2^t) / (1 - beta1^t).
double adam_bias_corrected_alpha(double alpha, double beta1, double beta2, std::int64_t t);

// Diagnostic: the step size minimizing the local quadratic upper model along
// the ADAM direction (V^{1/2} + xi I)^{-1} m.
double adam_quadratic_min_alpha(const Vector& g, const Vector& m, const Vector& v, double xi,
                                double lipschitz);

}  // namespace gradlab
