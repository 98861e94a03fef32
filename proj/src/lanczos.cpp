#include "gradlab/lanczos.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

namespace gradlab {

namespace {

// Largest eigenvalue (and its eigenvector) of the symmetric tridiagonal
// matrix given by diagonals alpha[0..k-1] and off-diagonals beta[0..k-2].
std::pair<double, Eigen::VectorXd> tridiag_max_eig(const std::vector<double>& alpha,
                                                   const std::vector<double>& beta, int k) {
  Eigen::MatrixXd t = Eigen::MatrixXd::Zero(k, k);
  for (int i = 0; i < k; ++i) t(i, i) = alpha[i];
  for (int i = 0; i + 1 < k; ++i) {
    t(i, i + 1) = beta[i];
    t(i + 1, i) = beta[i];
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(t);
  return {es.eigenvalues()(k - 1), es.eigenvectors().col(k - 1)};
}

}  // namespace

LanczosResult lanczos_min_eig(const LinearOp& op, int dim, const LanczosOptions& opts, Rng& rng) {
  if (dim < 1) throw std::invalid_argument("lanczos: dim must be >= 1");
  const int max_iters = opts.max_iters > 0 ? std::min(opts.max_iters, dim)
                                           : std::min(dim, 200);
  if (dim > 1 && max_iters < 2) throw std::invalid_argument("lanczos: max_iters must be >= 2");

  // Work on -H so the target eigenvalue is the largest Ritz value.
  auto neg_op = [&op](const Vector& x) { return Vector(-op(x)); };

  Vector q(dim);
  for (int i = 0; i < dim; ++i) q[i] = rng.normal();
  q.normalize();

  std::vector<Vector> basis;  // kept for full reorthogonalization
  std::vector<double> alpha, beta;
  basis.push_back(q);

  LanczosResult result;
  double theta_prev = 0.0;
  Vector w;

  for (int k = 0; k < max_iters; ++k) {
    w = neg_op(basis[k]);
    if (!w.allFinite()) throw std::runtime_error("lanczos: operator returned non-finite values");
    const double a = basis[k].dot(w);
    alpha.push_back(a);
    w -= a * basis[k];
    if (k > 0) w -= beta[k - 1] * basis[k - 1];
    // Full reorthogonalization, two passes.
    for (int pass = 0; pass < 2; ++pass) {
      for (const auto& qi : basis) w -= qi.dot(w) * qi;
    }

    auto [theta, y] = tridiag_max_eig(alpha, beta, k + 1);
    result.iters_used = k + 1;
    result.ritz_history.push_back(-theta);

    const double b = w.norm();
    const bool last = k + 1 == max_iters;
    const bool broke = b <= 1e-14 * std::max(1.0, std::abs(a));
    const bool settled = k > 0 && std::abs(theta - theta_prev) < opts.tol;
    theta_prev = theta;

    if (last || broke || settled) {
      result.breakdown = broke;
      result.converged = settled;
      result.lambda_min = -theta;
      Vector u = Vector::Zero(dim);
      for (int i = 0; i <= k; ++i) u += y[i] * basis[i];
      u.normalize();
      result.ritz_residual = (neg_op(u) - theta * u).norm();
      return result;
    }

    beta.push_back(b);
    basis.push_back(w / b);
  }
  throw std::logic_error("lanczos: unreachable");
}

LanczosResult lanczos_min_eig(const LinearOp& op, int dim, Rng& rng) {
  return lanczos_min_eig(op, dim, LanczosOptions{}, rng);
}

std::function<double(const Vector&)> make_min_eig_tracker(const ObjectiveHandle& obj,
                                                          std::uint64_t seed, LanczosOptions opts) {
  // Objectives without an analytic product go through the finite-difference
  // fallback in hvp().
  return [obj, seed, opts](const Vector& x) {
    Rng rng(seed);
    auto op = [&obj, &x](const Vector& v) { return hvp(obj, x, v); };
    return lanczos_min_eig(op, obj.dim, opts, rng).lambda_min;
  };
}

}  // namespace gradlab
