#pragma once

#include <Eigen/Core>
#include <cstdint>

#include "gradlab/objective.hpp"

namespace gradlab {

// f(x) = 1/2 x^T diag(d) x with d >= 0. Gradient norms are only bounded on a
// box, so grad_bound is valid for |x|_inf <= box_radius and is recorded as
// such in run metadata.
ObjectiveHandle make_quadratic(const Vector& diag, double box_radius);

// Convenience: f(x) = 1/2 |x|^2.
ObjectiveHandle make_half_sq_norm(int dim, double box_radius);

// f(x) = sum_i softplus(a_i . x), rows of `directions` being the a_i.
// Globally: |grad f| <= sum |a_i| and the gradient is (sum |a_i|^2 / 4)-Lipschitz.
// f_min is the infimum 0 unless the instance is marked symmetric (vectors in
// +/- pairs), in which case the minimum m*log(2) is attained on a subspace.
ObjectiveHandle make_softplus_sum(const Eigen::MatrixXd& directions, bool symmetric);

// Random symmetric instance: `pairs` directions of norm `scale` drawn from
// the seeded generator, each paired with its negation. With axis_aligned the
// directions are the first `pairs` coordinate axes instead (seed unused).
ObjectiveHandle make_symmetric_softplus_sum(int dim, int pairs, double scale, std::uint64_t seed,
                                            bool axis_aligned = false);

// Finite sum with components f_p = c_p * g for positive scalings c_p drawn
// uniformly from [c_lo, c_hi]; component gradients agree in sign everywhere
// by construction. g is the symmetric softplus instance above.
FiniteSumObjective make_scaled_softplus_sum(int dim, int pairs, double scale, int k, double c_lo,
                                            double c_hi, std::uint64_t seed,
                                            bool axis_aligned = false);

// Finite sum of shifted quadratics f_p = 1/2 |x - s_p|^2 with seeded shifts
// in [-spread, spread]^d. Components disagree on gradient signs between
// their shifts. Gradient bounds are box-local, like make_quadratic.
FiniteSumObjective make_shifted_quadratic_sum(int dim, int k, double spread, double box_radius,
                                              std::uint64_t seed);

// Numerically stable log(1 + exp(u)) and its derivative 1 / (1 + exp(-u)).
double softplus(double u);
double logistic(double u);

}  // namespace gradlab
