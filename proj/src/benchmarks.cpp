#include "gradlab/benchmarks.hpp"

#include <cmath>
#include <memory>
#include <numbers>
#include <stdexcept>

namespace gradlab {

double softplus(double u) {
  if (u > 0.0) return u + std::log1p(std::exp(-u));
  return std::log1p(std::exp(u));
}

double logistic(double u) {
  if (u >= 0.0) return 1.0 / (1.0 + std::exp(-u));
  const double e = std::exp(u);
  return e / (1.0 + e);
}

ObjectiveHandle make_quadratic(const Vector& diag, double box_radius) {
  if (diag.size() == 0) throw std::invalid_argument("quadratic: empty diagonal");
  if ((diag.array() < 0.0).any()) throw std::invalid_argument("quadratic: diagonal must be >= 0");
  if (!(box_radius > 0.0)) throw std::invalid_argument("quadratic: box_radius must be > 0");

  auto d = std::make_shared<Vector>(diag);
  ObjectiveHandle obj;
  obj.dim = static_cast<int>(diag.size());
  obj.name = "quadratic";
  obj.value = [d](const Vector& x) { return 0.5 * x.dot(d->cwiseProduct(x)); };
  obj.gradient = [d](const Vector& x) { return Vector(d->cwiseProduct(x)); };
  obj.hessian_vec = [d](const Vector&, const Vector& v) { return Vector(d->cwiseProduct(v)); };
  obj.meta.lipschitz = diag.maxCoeff() > 0.0 ? diag.maxCoeff() : 1.0;
  obj.meta.grad_bound = box_radius * diag.norm();  // sup over the box, attained at a corner
  obj.meta.f_min = 0.0;
  obj.meta.lower_bound = 0.0;
  obj.meta.validate();
  return obj;
}

ObjectiveHandle make_half_sq_norm(int dim, double box_radius) {
  auto obj = make_quadratic(Vector::Ones(dim), box_radius);
  obj.name = "half_sq_norm";
  return obj;
}

ObjectiveHandle make_softplus_sum(const Eigen::MatrixXd& directions, bool symmetric) {
  if (directions.rows() == 0 || directions.cols() == 0)
    throw std::invalid_argument("softplus_sum: empty direction matrix");

  auto dirs = std::make_shared<Eigen::MatrixXd>(directions);
  const int m = static_cast<int>(directions.rows());
  const int dim = static_cast<int>(directions.cols());

  ObjectiveHandle obj;
  obj.dim = dim;
  obj.name = symmetric ? "softplus_sum_symmetric" : "softplus_sum";
  obj.value = [dirs](const Vector& x) {
    double s = 0.0;
    const Vector u = (*dirs) * x;
    for (Eigen::Index i = 0; i < u.size(); ++i) s += softplus(u[i]);
    return s;
  };
  obj.gradient = [dirs, dim](const Vector& x) {
    const Vector u = (*dirs) * x;
    Vector g = Vector::Zero(dim);
    for (Eigen::Index i = 0; i < u.size(); ++i) g += logistic(u[i]) * dirs->row(i).transpose();
    return g;
  };
  obj.hessian_vec = [dirs, dim](const Vector& x, const Vector& v) {
    const Vector u = (*dirs) * x;
    const Vector av = (*dirs) * v;
    Vector hv = Vector::Zero(dim);
    for (Eigen::Index i = 0; i < u.size(); ++i) {
      const double s = logistic(u[i]);
      hv += (s * (1.0 - s) * av[i]) * dirs->row(i).transpose();
    }
    return hv;
  };

  double sum_norm = 0.0, sum_sq = 0.0;
  for (int i = 0; i < m; ++i) {
    const double n = directions.row(i).norm();
    sum_norm += n;
    sum_sq += n * n;
  }
  obj.meta.grad_bound = sum_norm;
  obj.meta.lipschitz = 0.25 * sum_sq;
  obj.meta.f_min = symmetric ? m * std::numbers::ln2 : 0.0;
  obj.meta.lower_bound = obj.meta.f_min;
  obj.meta.upper_bound.reset();
  obj.meta.validate();
  return obj;
}

ObjectiveHandle make_symmetric_softplus_sum(int dim, int pairs, double scale, std::uint64_t seed,
                                            bool axis_aligned) {
  if (dim < 1 || pairs < 1 || !(scale > 0.0))
    throw std::invalid_argument("softplus_sum: bad dimensions or scale");
  if (axis_aligned && pairs > dim)
    throw std::invalid_argument("softplus_sum: more axis pairs than dimensions");
  Rng rng(seed);
  Eigen::MatrixXd dirs(2 * pairs, dim);
  for (int p = 0; p < pairs; ++p) {
    Vector a;
    if (axis_aligned) {
      a = Vector::Zero(dim);
      a[p] = scale;
    } else {
      a.resize(dim);
      for (int i = 0; i < dim; ++i) a[i] = rng.normal();
      a *= scale / a.norm();
    }
    dirs.row(2 * p) = a.transpose();
    dirs.row(2 * p + 1) = -a.transpose();
  }
  ObjectiveHandle obj = make_softplus_sum(dirs, /*symmetric=*/true);
  // A +/- pair contributes |a| tanh(u/2) along a, so the pairwise sum is a
  // tight gradient bound: half of the generic all-rows sum.
  obj.meta.grad_bound *= 0.5;
  obj.meta.validate();
  return obj;
}

FiniteSumObjective make_scaled_softplus_sum(int dim, int pairs, double scale, int k, double c_lo,
                                            double c_hi, std::uint64_t seed, bool axis_aligned) {
  if (k < 1) throw std::invalid_argument("scaled_softplus_sum: k must be >= 1");
  if (!(0.0 < c_lo && c_lo <= c_hi))
    throw std::invalid_argument("scaled_softplus_sum: need 0 < c_lo <= c_hi");

  const ObjectiveHandle base =
      make_symmetric_softplus_sum(dim, pairs, scale, seed, axis_aligned);
  Rng rng(seed ^ 0x5ca1ab1eull);

  std::vector<ObjectiveHandle> parts;
  parts.reserve(k);
  double c_mean = 0.0, c_max = 0.0;
  for (int p = 0; p < k; ++p) {
    const double c = rng.uniform(c_lo, c_hi);
    c_mean += c / k;
    c_max = std::max(c_max, c);
    ObjectiveHandle comp;
    comp.dim = base.dim;
    comp.name = "scaled_softplus[" + std::to_string(p) + "]";
    comp.value = [base, c](const Vector& x) { return c * base.value(x); };
    comp.gradient = [base, c](const Vector& x) { return Vector(c * base.gradient(x)); };
    comp.hessian_vec = [base, c](const Vector& x, const Vector& v) {
      return Vector(c * base.hessian_vec(x, v));
    };
    comp.meta.lipschitz = c * base.meta.lipschitz;
    comp.meta.grad_bound = c * base.meta.grad_bound;
    comp.meta.f_min = c * base.meta.f_min;
    comp.meta.lower_bound = comp.meta.f_min;
    parts.push_back(std::move(comp));
  }

  ObjectiveMeta mean_meta;
  mean_meta.lipschitz = c_mean * base.meta.lipschitz;
  mean_meta.grad_bound = c_max * base.meta.grad_bound;  // bounds every component gradient
  mean_meta.f_min = c_mean * base.meta.f_min;
  mean_meta.lower_bound = mean_meta.f_min;
  return make_finite_sum(std::move(parts), mean_meta, "scaled_softplus_sum");
}

FiniteSumObjective make_shifted_quadratic_sum(int dim, int k, double spread, double box_radius,
                                              std::uint64_t seed) {
  if (dim < 1 || k < 1) throw std::invalid_argument("shifted_quadratic_sum: bad dimensions");
  if (!(spread >= 0.0 && box_radius > 0.0))
    throw std::invalid_argument("shifted_quadratic_sum: bad spread or box_radius");
  Rng rng(seed);
  std::vector<Vector> shifts;
  Vector centroid = Vector::Zero(dim);
  for (int p = 0; p < k; ++p) {
    Vector s(dim);
    for (int i = 0; i < dim; ++i) s[i] = rng.uniform(-spread, spread);
    centroid += s / k;
    shifts.push_back(std::move(s));
  }

  // Largest distance from any shift to a box corner.
  const double reach = std::sqrt(static_cast<double>(dim)) * (box_radius + spread);
  std::vector<ObjectiveHandle> parts;
  parts.reserve(k);
  for (int p = 0; p < k; ++p) {
    const Vector s = shifts[p];
    ObjectiveHandle comp;
    comp.dim = dim;
    comp.name = "shifted_quadratic[" + std::to_string(p) + "]";
    comp.value = [s](const Vector& x) { return 0.5 * (x - s).squaredNorm(); };
    comp.gradient = [s](const Vector& x) { return Vector(x - s); };
    comp.hessian_vec = [](const Vector&, const Vector& v) { return v; };
    comp.meta.lipschitz = 1.0;
    comp.meta.grad_bound = reach;
    comp.meta.f_min = 0.0;
    parts.push_back(std::move(comp));
  }

  // Mean is 1/2 |x - centroid|^2 plus the spread constant.
  double floor = 0.0;
  for (const auto& s : shifts) floor += 0.5 * (s - centroid).squaredNorm() / k;
  ObjectiveMeta mean_meta;
  mean_meta.lipschitz = 1.0;
  mean_meta.grad_bound = reach;
  mean_meta.f_min = floor;
  mean_meta.lower_bound = floor;
  return make_finite_sum(std::move(parts), mean_meta, "shifted_quadratic_sum");
}

}  // namespace gradlab
