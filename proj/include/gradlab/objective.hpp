#pragma once

#include <Eigen/Core>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "gradlab/rng.hpp"

namespace gradlab {

using Vector = Eigen::VectorXd;

// Analytic constants attached to an objective. The scheduling rules consume
// these, so they must be genuine upper bounds (or carry the estimated flag).
struct ObjectiveMeta {
  double lipschitz = 1.0;   // gradient Lipschitz constant
  double grad_bound = 1.0;  // upper bound on the gradient norm (all components, for finite sums)
  double f_min = 0.0;       // minimum value, or a lower bound when the infimum is not attained
  std::optional<double> lower_bound;
  std::optional<double> upper_bound;
  bool grad_bound_estimated = false;  // grad_bound came from probing rather than a closed form

  void validate() const;  // throws std::invalid_argument
};

// A differentiable function with gradient (and optional Hessian-vector) oracles.
// Handles are immutable after construction and safe to share across runs.
struct ObjectiveHandle {
  int dim = 0;
  std::function<double(const Vector&)> value;
  std::function<Vector(const Vector&)> gradient;
  std::function<Vector(const Vector&, const Vector&)> hessian_vec;  // may be empty
  ObjectiveMeta meta;
  std::string name;

  bool has_hvp() const { return static_cast<bool>(hessian_vec); }
};

double eval(const ObjectiveHandle& obj, const Vector& x);
Vector grad(const ObjectiveHandle& obj, const Vector& x);

// H(x)*v. Uses the analytic product when available, otherwise central
// differences of the gradient with step kFdHvpStep / max(1, |v|).
Vector hvp(const ObjectiveHandle& obj, const Vector& x, const Vector& v);

inline constexpr double kFdGradStep = 1e-5;  // scaled by (1 + |x|_inf)
inline constexpr double kFdHvpStep = 1e-4;

// f = (1/k) * sum of components, all sharing the same dimension.
struct FiniteSumObjective {
  std::vector<ObjectiveHandle> components;
  ObjectiveHandle mean;
};

// Builds the mean handle from the components. mean_meta describes the mean
// objective except grad_bound, which must bound every component gradient.
FiniteSumObjective make_finite_sum(std::vector<ObjectiveHandle> components,
                                   ObjectiveMeta mean_meta, std::string name);

// Gradient of one component picked uniformly at random.
Vector sample_stochastic_gradient(const FiniteSumObjective& fsum, const Vector& x, Rng& rng);

// sign(v) = +1 for v >= 0, -1 otherwise.
inline int sign_of(double v) { return v >= 0.0 ? 1 : -1; }

struct SignViolation {
  std::size_t point_index = 0;
  int coordinate = 0;
  int component_p = 0;
  int component_q = 0;
};

struct SignAuditResult {
  bool consistent = true;
  std::optional<SignViolation> witness;
};

// True iff at every supplied point all component gradients agree
// coordinatewise in sign. Reports the first violation found.
SignAuditResult check_sign_condition(const FiniteSumObjective& fsum,
                                     const std::vector<Vector>& points);

}  // namespace gradlab
