#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "gradlab/objective.hpp"

namespace gradlab {

using LinearOp = std::function<Vector(const Vector&)>;

struct LanczosOptions {
  int max_iters = 0;    // <= 0: min(dim, 200)
  double tol = 1e-8;    // absolute change of the Ritz value between iterations
};

struct LanczosResult {
  double lambda_min = 0.0;
  double ritz_residual = 0.0;  // |H u - lambda u| for the returned Ritz pair
  int iters_used = 0;
  bool breakdown = false;  // invariant subspace found (vanishing beta)
  bool converged = false;  // stopped on the tolerance rather than max_iters
  std::vector<double> ritz_history;  // smallest Ritz value per iteration
};

// Smallest eigenvalue of a symmetric operator via Lanczos with full
// reorthogonalization from a seeded random start. To target the most
// negative eigenvalue the iteration runs on -H and the result is negated.
// The returned value is a Ritz estimate, hence >= the true minimum.
// NaN from the operator raises; breakdown returns the current best.
LanczosResult lanczos_min_eig(const LinearOp& op, int dim, const LanczosOptions& opts, Rng& rng);
LanczosResult lanczos_min_eig(const LinearOp& op, int dim, Rng& rng);

// Trace hook evaluating lambda_min of the objective Hessian at an iterate.
// Every call starts from the same seeded vector, so traces are reproducible.
std::function<double(const Vector&)> make_min_eig_tracker(const ObjectiveHandle& obj,
                                                          std::uint64_t seed,
                                                          LanczosOptions opts = {});

}  // namespace gradlab
