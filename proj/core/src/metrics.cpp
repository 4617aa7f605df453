#include "lrpr/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "lrpr/errors.hpp"
#include "lrpr/spectral.hpp"

namespace lrpr {

namespace {

template <class Scalar>
void require_orthonormal(const Mat<Scalar>& u, const char* what) {
  const Mat<Scalar> gram = u.adjoint() * u;
  const double dev = (gram - Mat<Scalar>::Identity(u.cols(), u.cols())).cwiseAbs().maxCoeff();
  if (!(dev <= 1e-8)) {
    throw ContractViolation(std::string("subspace_error: ") + what +
                            " does not have orthonormal columns (max |U'U - I| = " +
                            std::to_string(dev) + ")");
  }
}

}  // namespace

template <class Scalar>
double subspace_error(const Mat<Scalar>& estimate, const Mat<Scalar>& truth) {
  if (estimate.rows() != truth.rows()) throw DimensionError("subspace_error: row counts differ");
  if (truth.cols() == 0) return 0.0;
  require_orthonormal(truth, "truth");
  if (estimate.cols() == 0) return 1.0;
  require_orthonormal(estimate, "estimate");
  const Mat<Scalar> residual = truth - estimate * (estimate.adjoint() * truth);
  Eigen::JacobiSVD<Mat<Scalar>> svd(residual);
  return std::min(1.0, svd.singularValues()(0));
}

template <class Scalar>
double phase_dist(const Vec<Scalar>& a, const Vec<Scalar>& b) {
  if (a.size() != b.size()) {
    throw DimensionError("phase_dist: lengths " + std::to_string(a.size()) + " and " +
                         std::to_string(b.size()) + " differ");
  }
  const Scalar inner = b.dot(a);  // b' a
  Scalar phase(1);
  if (std::abs(inner) > 0.0) phase = inner / std::abs(inner);
  return (a - phase * b).norm();
}

template <class Scalar>
RealVec column_dists(const Mat<Scalar>& truth, const Mat<Scalar>& estimate) {
  if (truth.rows() != estimate.rows() || truth.cols() != estimate.cols()) {
    throw DimensionError("column_dists: shapes differ");
  }
  RealVec d(truth.cols());
  for (Index k = 0; k < truth.cols(); ++k) {
    d(k) = phase_dist<Scalar>(truth.col(k), estimate.col(k));
  }
  return d;
}

template <class Scalar>
double norm_err(const Mat<Scalar>& truth, const Mat<Scalar>& estimate) {
  const double denom = truth.squaredNorm();
  if (!(denom > 0.0)) throw DimensionError("norm_err: undefined for a zero reference matrix");
  return column_dists(truth, estimate).squaredNorm() / denom;
}

template <class Scalar>
ErrorReport evaluate(const Mat<Scalar>& x, const Mat<Scalar>& u, const Mat<Scalar>& x_hat,
                     const Mat<Scalar>& u_hat, Index r_hat) {
  ErrorReport rep;
  rep.per_column_dist = column_dists(x, x_hat);
  const double denom = x.squaredNorm();
  if (!(denom > 0.0)) throw DimensionError("evaluate: undefined for a zero reference matrix");
  rep.norm_err = rep.per_column_dist.squaredNorm() / denom;
  if (u_hat.cols() > 0) {
    rep.se = subspace_error(u_hat, u);
  } else if (x_hat.allFinite() && x_hat.norm() > 0.0) {
    const Index r = std::min<Index>(u.cols(), std::min(x_hat.rows(), x_hat.cols()));
    rep.se = subspace_error(truncated_svd(x_hat, r).left, u);
  } else {
    rep.se = 1.0;
  }
  rep.rank_correct = r_hat == u.cols();
  return rep;
}

#define LRPR_INSTANTIATE_METRICS(S)                                                        \
  template double subspace_error<S>(const Mat<S>&, const Mat<S>&);                         \
  template double phase_dist<S>(const Vec<S>&, const Vec<S>&);                             \
  template RealVec column_dists<S>(const Mat<S>&, const Mat<S>&);                          \
  template double norm_err<S>(const Mat<S>&, const Mat<S>&);                               \
  template ErrorReport evaluate<S>(const Mat<S>&, const Mat<S>&, const Mat<S>&, const Mat<S>&, \
                                   Index);

LRPR_INSTANTIATE_METRICS(double)
LRPR_INSTANTIATE_METRICS(cplx)

}  // namespace lrpr
