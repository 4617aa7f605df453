#pragma once

#include "lrpr/types.hpp"

namespace lrpr {

/// SE(estimate, truth) = ||(I - E E') T||, the sine of the largest principal
/// angle between the spans. Both arguments need orthonormal columns (checked
/// to 1e-8); their widths may differ. Computed as the top singular value of
/// T - E (E' T), without forming n x n projectors.
template <class Scalar>
double subspace_error(const Mat<Scalar>& estimate, const Mat<Scalar>& truth);

/// min over phi of ||a - e^{i phi} b||. For real vectors phi is 0 or pi.
template <class Scalar>
double phase_dist(const Vec<Scalar>& a, const Vec<Scalar>& b);

/// sum_k dist(x_k, xhat_k)^2 / sum_k ||x_k||^2.
template <class Scalar>
double norm_err(const Mat<Scalar>& truth, const Mat<Scalar>& estimate);

/// Per-column phase-invariant distances.
template <class Scalar>
RealVec column_dists(const Mat<Scalar>& truth, const Mat<Scalar>& estimate);

struct ErrorReport {
  double se = 0.0;
  double norm_err = 0.0;
  RealVec per_column_dist;
  bool rank_correct = true;
};

/// All metrics at once. `u_hat` may be empty, in which case SE uses the top
/// r left singular vectors of `x_hat`.
template <class Scalar>
ErrorReport evaluate(const Mat<Scalar>& x, const Mat<Scalar>& u, const Mat<Scalar>& x_hat,
                     const Mat<Scalar>& u_hat, Index r_hat);

}  // namespace lrpr
