#include "gradlab/objective.hpp"

#include <cmath>
#include <memory>
#include <stdexcept>
#include <utility>

namespace gradlab {

namespace {

void require_dim(const ObjectiveHandle& obj, const Vector& x, const char* what) {
  if (x.size() != obj.dim) {
    throw std::invalid_argument(std::string(what) + ": objective '" + obj.name + "' expects dim " +
                                std::to_string(obj.dim) + ", got " + std::to_string(x.size()));
  }
}

}  // namespace

void ObjectiveMeta::validate() const {
  if (!(lipschitz > 0.0)) throw std::invalid_argument("meta: lipschitz must be > 0");
  if (!(grad_bound > 0.0)) throw std::invalid_argument("meta: grad_bound must be > 0");
  if (lower_bound && *lower_bound > f_min)
    throw std::invalid_argument("meta: lower_bound exceeds f_min");
  if (upper_bound && *upper_bound < f_min)
    throw std::invalid_argument("meta: upper_bound below f_min");
}

double eval(const ObjectiveHandle& obj, const Vector& x) {
  require_dim(obj, x, "eval");
  return obj.value(x);
}

Vector grad(const ObjectiveHandle& obj, const Vector& x) {
  require_dim(obj, x, "grad");
  return obj.gradient(x);
}

Vector hvp(const ObjectiveHandle& obj, const Vector& x, const Vector& v) {
  require_dim(obj, x, "hvp");
  if (v.size() != x.size()) throw std::invalid_argument("hvp: direction has wrong dimension");
  if (obj.hessian_vec) return obj.hessian_vec(x, v);
  const double vnorm = v.norm();
  if (vnorm == 0.0) return Vector::Zero(x.size());
  const double h = kFdHvpStep / std::max(1.0, vnorm);
  return (obj.gradient(x + h * v) - obj.gradient(x - h * v)) / (2.0 * h);
}

FiniteSumObjective make_finite_sum(std::vector<ObjectiveHandle> components,
                                   ObjectiveMeta mean_meta, std::string name) {
  if (components.empty()) throw std::invalid_argument("finite sum: no components");
  const int dim = components.front().dim;
  for (const auto& c : components) {
    if (c.dim != dim) throw std::invalid_argument("finite sum: components disagree on dim");
  }
  mean_meta.validate();

  FiniteSumObjective fsum;
  fsum.components = std::move(components);

  // The mean handle closes over a copy of the component list so that it
  // stays valid independently of the FiniteSumObjective that spawned it.
  auto parts = std::make_shared<std::vector<ObjectiveHandle>>(fsum.components);
  const double inv_k = 1.0 / static_cast<double>(parts->size());

  ObjectiveHandle mean;
  mean.dim = dim;
  mean.name = name;
  mean.meta = mean_meta;
  mean.value = [parts, inv_k](const Vector& x) {
    double s = 0.0;
    for (const auto& c : *parts) s += c.value(x);
    return s * inv_k;
  };
  mean.gradient = [parts, inv_k, dim](const Vector& x) {
    Vector g = Vector::Zero(dim);
    for (const auto& c : *parts) g += c.gradient(x);
    return Vector(g * inv_k);
  };
  bool all_hvp = true;
  for (const auto& c : *parts) all_hvp = all_hvp && c.has_hvp();
  if (all_hvp) {
    mean.hessian_vec = [parts, inv_k, dim](const Vector& x, const Vector& v) {
      Vector hv = Vector::Zero(dim);
      for (const auto& c : *parts) hv += c.hessian_vec(x, v);
      return Vector(hv * inv_k);
    };
  }
  fsum.mean = std::move(mean);
  return fsum;
}

Vector sample_stochastic_gradient(const FiniteSumObjective& fsum, const Vector& x, Rng& rng) {
  if (fsum.components.empty()) throw std::invalid_argument("sample: no components");
  const auto idx = rng.below(fsum.components.size());
  return grad(fsum.components[idx], x);
}

SignAuditResult check_sign_condition(const FiniteSumObjective& fsum,
                                     const std::vector<Vector>& points) {
  if (points.empty()) throw std::invalid_argument("sign audit: no points supplied");
  SignAuditResult result;
  const int k = static_cast<int>(fsum.components.size());
  for (std::size_t pi = 0; pi < points.size(); ++pi) {
    std::vector<Vector> grads;
    grads.reserve(k);
    for (const auto& c : fsum.components) grads.push_back(grad(c, points[pi]));
    for (int i = 0; i < fsum.mean.dim; ++i) {
      const int ref = sign_of(grads[0][i]);
      for (int q = 1; q < k; ++q) {
        if (sign_of(grads[q][i]) != ref) {
          result.consistent = false;
          result.witness = SignViolation{pi, i, 0, q};
          return result;
        }
      }
    }
  }
  return result;
}

}  // namespace gradlab
