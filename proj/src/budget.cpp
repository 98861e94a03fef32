#include "gradlab/budget.hpp"

#include <cmath>
#include <stdexcept>

namespace gradlab {

const char* theorem_name(TheoremId id) {
  switch (id) {
    case TheoremId::kRmsDet: return "rmsprop_det";
    case TheoremId::kRmsStoch: return "rmsprop_stoch";
    case TheoremId::kRmsNoShift: return "rmsprop_noshift";
    case TheoremId::kAdamDet: return "adam_det";
  }
  return "?";
}

TheoremId theorem_from_name(const std::string& name) {
  if (name == "rmsprop_det") return TheoremId::kRmsDet;
  if (name == "rmsprop_stoch") return TheoremId::kRmsStoch;
  if (name == "rmsprop_noshift") return TheoremId::kRmsNoShift;
  if (name == "adam_det") return TheoremId::kAdamDet;
  throw std::invalid_argument("unknown theorem id '" + name + "'");
}

std::int64_t ceil_with_slack(double x) {
  if (!std::isfinite(x)) throw std::invalid_argument("iteration bound is not finite");
  const double nudged = x - 1e-9 * (1.0 + std::abs(x));
  const double c = std::ceil(nudged);
  return c < 1.0 ? 1 : static_cast<std::int64_t>(c);
}

OptimizerConfig TheoremBudget::make_config() const {
  OptimizerConfig cfg;
  cfg.alpha_rule = alpha_rule;
  switch (id) {
    case TheoremId::kRmsDet:
    case TheoremId::kRmsStoch:
    case TheoremId::kRmsNoShift:
      cfg.method = Method::kRmsProp;
      cfg.beta2 = derived.at("beta2");
      cfg.xi = derived.at("xi");
      break;
    case TheoremId::kAdamDet:
      cfg.method = Method::kAdam;
      cfg.beta1 = derived.at("beta1");
      cfg.beta2 = derived.at("beta2");
      cfg.xi = derived.at("xi");
      break;
  }
  cfg.validate();
  return cfg;
}

namespace {

void check_common(const ObjectiveMeta& meta, double beta2, double xi, double eps,
                  bool xi_positive) {
  meta.validate();
  if (!(eps > 0.0)) throw std::invalid_argument("budget: eps must be > 0");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) throw std::invalid_argument("budget: beta2 must be in [0,1)");
  if (xi_positive && !(xi > 0.0)) throw std::invalid_argument("budget: xi must be > 0");
}

double gap_or_throw(double f_start, double f_min) {
  if (f_start < f_min)
    throw std::invalid_argument("budget: start value below the recorded minimum");
  return f_start - f_min;
}

}  // namespace

TheoremBudget rmsprop_det_budget(const ObjectiveMeta& meta, double f_x1, double beta2, double xi,
                                 double eps) {
  check_common(meta, beta2, xi, eps, /*xi_positive=*/true);
  const double gap = gap_or_throw(f_x1, meta.f_min);
  const double L = meta.lipschitz;
  const double sigma = meta.grad_bound;
  const double s2x = sigma * sigma + xi;

  TheoremBudget b;
  b.id = TheoremId::kRmsDet;
  b.epsilon = eps;
  const double alpha = (1.0 - beta2) * xi / (L * std::sqrt(s2x));
  b.alpha_rule = ConstantStep{alpha};
  const double t_real = (1.0 / (eps * eps)) * 2.0 * L * s2x * gap / ((1.0 - beta2) * xi);
  b.already_critical = gap == 0.0;
  b.max_steps = b.already_critical ? 1 : ceil_with_slack(t_real);

  b.derived["alpha"] = alpha;
  b.derived["T_real"] = t_real;
  b.derived["delta_sq"] = 1.0 / (2.0 * std::sqrt(s2x));
  b.derived["precond_min"] = 1.0 / std::sqrt(s2x);
  b.derived["precond_max"] = 1.0 / std::sqrt((1.0 - beta2) * xi);
  b.derived["beta2"] = beta2;
  b.derived["xi"] = xi;
  b.derived["epsilon"] = eps;
  b.derived["lipschitz"] = L;
  b.derived["sigma"] = sigma;
  b.derived["f_start"] = f_x1;
  b.derived["f_min"] = meta.f_min;
  return b;
}

TheoremBudget rmsprop_stoch_budget(const ObjectiveMeta& meta, double f_x1, double beta2, double xi,
                                   double eps) {
  check_common(meta, beta2, xi, eps, /*xi_positive=*/true);
  const double gap = gap_or_throw(f_x1, meta.f_min);
  const double L = meta.lipschitz;
  const double sigma = meta.grad_bound;  // bounds every component gradient
  const double s2x = sigma * sigma + xi;

  TheoremBudget b;
  b.id = TheoremId::kRmsStoch;
  b.epsilon = eps;
  const double t_real =
      (1.0 / std::pow(eps, 4)) * 2.0 * L * sigma * sigma * s2x * gap / ((1.0 - beta2) * xi);
  b.already_critical = gap == 0.0;
  const std::int64_t T = b.already_critical ? 1 : ceil_with_slack(t_real);
  b.max_steps = T;
  const double alpha = (1.0 / std::sqrt(static_cast<double>(T))) *
                       std::sqrt(2.0 * xi * (1.0 - beta2) * gap / (sigma * sigma * L));
  // A zero gap would zero the step size; keep the budget well-formed.
  b.alpha_rule = ConstantStep{b.already_critical ? 1e-12 : alpha};

  b.derived["alpha"] = std::get<ConstantStep>(b.alpha_rule).alpha;
  b.derived["T_real"] = t_real;
  b.derived["precond_min"] = 1.0 / std::sqrt(s2x);
  b.derived["precond_max"] = 1.0 / std::sqrt((1.0 - beta2) * xi);
  b.derived["beta2"] = beta2;
  b.derived["xi"] = xi;
  b.derived["epsilon"] = eps;
  b.derived["lipschitz"] = L;
  b.derived["sigma"] = sigma;
  b.derived["f_start"] = f_x1;
  b.derived["f_min"] = meta.f_min;
  return b;
}

double rmsprop_noshift_alpha(std::int64_t t, double alpha0) {
  if (t < 1) throw std::invalid_argument("noshift alpha: t must be >= 1");
  return alpha0 / std::sqrt(static_cast<double>(t));
}

TheoremBudget rmsprop_noshift_budget(double alpha0, double beta2, double eps) {
  if (!(alpha0 > 0.0)) throw std::invalid_argument("noshift budget: alpha0 must be > 0");
  if (!(beta2 >= 0.0 && beta2 < 1.0))
    throw std::invalid_argument("noshift budget: beta2 must be in [0,1)");
  if (!(eps > 0.0)) throw std::invalid_argument("noshift budget: eps must be > 0");
  TheoremBudget b;
  b.id = TheoremId::kRmsNoShift;
  b.epsilon = eps;
  b.alpha_rule = InvSqrtStep{alpha0};
  b.max_steps.reset();  // no explicit constant; report the observed hitting time
  b.derived["alpha0"] = alpha0;
  b.derived["beta2"] = beta2;
  b.derived["xi"] = 0.0;
  b.derived["epsilon"] = eps;
  return b;
}

TheoremBudget adam_theorem_params(const ObjectiveMeta& meta, double f_x2, double eps,
                                  double beta2) {
  check_common(meta, beta2, /*xi=*/1.0, eps, /*xi_positive=*/false);
  const double gap = gap_or_throw(f_x2, meta.f_min);
  const double L = meta.lipschitz;
  const double sigma = meta.grad_bound;

  const double beta1 = eps / (eps + 2.0 * sigma);
  const double xi = 2.0 * sigma;

  // The instantiation must satisfy the general preconditions it specializes.
  if (!(beta1 < eps / (eps + sigma)))
    throw std::logic_error("adam budget: beta1 precondition failed");
  const double xi_floor = sigma * sigma * beta1 / (-beta1 * sigma + eps * (1.0 - beta1));
  if (!(xi > xi_floor)) throw std::logic_error("adam budget: xi precondition failed");

  TheoremBudget b;
  b.id = TheoremId::kAdamDet;
  b.epsilon = eps;
  b.alpha_rule = AdamTheoremStep{eps, sigma, L};
  const double t_real = 9.0 * L * sigma * sigma * gap / std::pow(eps, 6);
  b.already_critical = gap == 0.0;
  b.max_steps = b.already_critical ? 1 : ceil_with_slack(t_real);

  b.derived["T_real"] = t_real;
  b.derived["beta1"] = beta1;
  b.derived["beta2"] = beta2;
  b.derived["xi"] = xi;
  b.derived["xi_floor"] = xi_floor;
  b.derived["theta1"] = 1.0;
  b.derived["theta2"] = sigma;
  b.derived["epsilon"] = eps;
  b.derived["lipschitz"] = L;
  b.derived["sigma"] = sigma;
  b.derived["f_start"] = f_x2;
  b.derived["f_min"] = meta.f_min;
  return b;
}

double adam_bias_corrected_alpha(double alpha, double beta1, double beta2, std::int64_t t) {
  if (t < 1) throw std::invalid_argument("bias corrected alpha: t must be >= 1");
  const double td = static_cast<double>(t);
  return alpha * std::sqrt(1.0 - std::pow(beta2, td)) / (1.0 - std::pow(beta1, td));
}

double adam_quadratic_min_alpha(const Vector& g, const Vector& m, const Vector& v, double xi,
                                double lipschitz) {
  if (!(xi > 0.0)) throw std::invalid_argument("quadratic-min alpha: xi must be > 0");
  if (!(lipschitz > 0.0)) throw std::invalid_argument("quadratic-min alpha: L must be > 0");
  const Vector dir = (m.array() / (v.array().sqrt() + xi)).matrix();
  const double denom = dir.squaredNorm();
  if (denom == 0.0) return 0.0;
  return g.dot(dir) / (lipschitz * denom);
}

}  // namespace gradlab
