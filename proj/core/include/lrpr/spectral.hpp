#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include "lrpr/types.hpp"

namespace lrpr {

/// Implicit Hermitian positive semidefinite operator. When `dense` is set it
/// holds the same operator as an explicit matrix and eigensolvers may use it.
template <class Scalar>
struct SymmetricOperator {
  Index dim = 0;
  std::function<Mat<Scalar>(const Mat<Scalar>&)> apply;
  std::shared_ptr<const Mat<Scalar>> dense;

  static SymmetricOperator from_dense(Mat<Scalar> matrix);
};

/// Top eigenpairs, values descending.
template <class Scalar>
struct EigPair {
  Mat<Scalar> vectors;
  RealVec values;
  /// Estimate of the (r+1)-th eigenvalue, when requested.
  std::optional<double> trailing;
  /// Set when the operator is (numerically) zero; vectors are then an
  /// arbitrary orthonormal set.
  bool degenerate = false;
};

/// Block power (subspace) iteration with QR re-orthonormalization every
/// step and a final Rayleigh-Ritz rotation. The starting block is Gaussian
/// drawn from `seed`.
template <class Scalar>
EigPair<Scalar> top_eigvecs(const SymmetricOperator<Scalar>& op, Index r, int iters,
                            std::uint64_t seed, bool want_trailing = false);

/// Direct dense Hermitian eigendecomposition; returns the top r pairs and,
/// through `all_values`, the whole spectrum in descending order.
template <class Scalar>
EigPair<Scalar> top_eigvecs_dense(const Mat<Scalar>& matrix, Index r,
                                  RealVec* all_values = nullptr);

/// Best rank-r approximation in Frobenius norm (truncated SVD).
template <class Scalar>
Mat<Scalar> rank_r_project(const Mat<Scalar>& matrix, Index r);

/// Truncated SVD factors: matrix ~ left * right with left orthonormal n x r.
template <class Scalar>
struct LowRankFactors {
  Mat<Scalar> left;
  Mat<Scalar> right;
  RealVec singular_values;
};

template <class Scalar>
LowRankFactors<Scalar> truncated_svd(const Mat<Scalar>& matrix, Index r);

/// Rectangular linear map given by its action and the action of its adjoint.
template <class Scalar>
struct LinearOperator {
  Index rows = 0;
  Index cols = 0;
  std::function<Vec<Scalar>(const Vec<Scalar>&)> forward;
  std::function<Vec<Scalar>(const Vec<Scalar>&)> adjoint;
};

template <class Scalar>
struct CglsResult {
  Vec<Scalar> x;
  int iterations = 0;
  /// ||A x_t - rhs|| for t = 0 .. iterations.
  std::vector<double> residual_norms;
  bool converged = false;
};

/// Conjugate gradients on the normal equations (CGLS). Stops after `iters`
/// iterations or once the normal-equation residual ||A'(rhs - A x)|| drops
/// to tol times its starting value. Throws NumericalError on NaN/Inf.
template <class Scalar>
CglsResult<Scalar> cgls(const LinearOperator<Scalar>& op, const Vec<Scalar>& rhs, int iters,
                        double tol, const Vec<Scalar>* x0 = nullptr);

/// Thin Q factor of a full-column-rank matrix.
template <class Scalar>
Mat<Scalar> orthonormalize(const Mat<Scalar>& matrix);

}  // namespace lrpr
