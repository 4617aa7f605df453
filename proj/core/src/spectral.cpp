#include "lrpr/spectral.hpp"

#include <algorithm>
#include <cmath>

#include "lrpr/errors.hpp"
#include "lrpr/rng.hpp"

namespace lrpr {

template <class Scalar>
SymmetricOperator<Scalar> SymmetricOperator<Scalar>::from_dense(Mat<Scalar> matrix) {
  if (matrix.rows() != matrix.cols()) throw DimensionError("from_dense: matrix is not square");
  auto shared = std::make_shared<const Mat<Scalar>>(std::move(matrix));
  SymmetricOperator op;
  op.dim = shared->rows();
  op.apply = [shared](const Mat<Scalar>& v) -> Mat<Scalar> { return *shared * v; };
  op.dense = std::move(shared);
  return op;
}

template <class Scalar>
Mat<Scalar> orthonormalize(const Mat<Scalar>& matrix) {
  Eigen::HouseholderQR<Mat<Scalar>> qr(matrix);
  return qr.householderQ() * Mat<Scalar>::Identity(matrix.rows(), matrix.cols());
}

namespace {

template <class Scalar>
bool all_finite(const Mat<Scalar>& m) {
  return m.allFinite();
}

/// Rotates the orthonormal block `basis` onto Ritz vectors of `image` = op(basis).
template <class Scalar>
void rayleigh_ritz(Mat<Scalar>& basis, const Mat<Scalar>& image, RealVec& values) {
  Mat<Scalar> h = basis.adjoint() * image;
  h = (0.5 * (h + h.adjoint())).eval();
  Eigen::SelfAdjointEigenSolver<Mat<Scalar>> eig(h);
  values = eig.eigenvalues().reverse();
  const Mat<Scalar> rot = eig.eigenvectors().rowwise().reverse();
  basis = (basis * rot).eval();
}

}  // namespace

template <class Scalar>
EigPair<Scalar> top_eigvecs(const SymmetricOperator<Scalar>& op, Index r, int iters,
                            std::uint64_t seed, bool want_trailing) {
  if (r < 1 || r > op.dim) {
    throw DimensionError("top_eigvecs: need 1 <= r <= dim, got r=" + std::to_string(r) +
                         " dim=" + std::to_string(op.dim));
  }
  if (iters < 0) throw ConfigurationError("top_eigvecs: negative iteration count");
  const Index block = std::min(op.dim, r + (want_trailing ? 1 : 0));

  Mat<Scalar> start(op.dim, block);
  CounterStream stream(derive_key({seed, stream_tag::kBlockPower}));
  fill_gaussian(stream, start.data(), start.size());
  Mat<Scalar> basis = orthonormalize(start);

  EigPair<Scalar> out;
  for (int t = 0; t < iters; ++t) {
    Mat<Scalar> image = op.apply(basis);
    if (!all_finite(image)) throw NumericalError("top_eigvecs: operator produced NaN/Inf");
    if (image.norm() == 0.0) break;
    basis = orthonormalize(image);
  }
  const Mat<Scalar> image = op.apply(basis);
  if (!all_finite(image)) throw NumericalError("top_eigvecs: operator produced NaN/Inf");
  RealVec ritz;
  rayleigh_ritz(basis, image, ritz);

  out.vectors = basis.leftCols(r);
  out.values = ritz.head(r);
  if (want_trailing && block > r) out.trailing = ritz(r);
  if (!(ritz(0) > 0.0)) {
    out.degenerate = true;
    out.values.setZero();
  }
  return out;
}

template <class Scalar>
EigPair<Scalar> top_eigvecs_dense(const Mat<Scalar>& matrix, Index r, RealVec* all_values) {
  if (matrix.rows() != matrix.cols()) throw DimensionError("top_eigvecs_dense: not square");
  if (r < 1 || r > matrix.rows()) throw DimensionError("top_eigvecs_dense: need 1 <= r <= dim");
  if (!matrix.allFinite()) throw NumericalError("top_eigvecs_dense: matrix has NaN/Inf");
  Eigen::SelfAdjointEigenSolver<Mat<Scalar>> eig(matrix);
  if (eig.info() != Eigen::Success) throw NumericalError("top_eigvecs_dense: eigensolver failed");
  const Index n = matrix.rows();
  EigPair<Scalar> out;
  const RealVec values = eig.eigenvalues().reverse();
  out.values = values.head(r);
  out.vectors = eig.eigenvectors().rightCols(r).rowwise().reverse();
  if (r < n) out.trailing = values(r);
  if (!(values(0) > 0.0)) out.degenerate = true;
  if (all_values) *all_values = values;
  return out;
}

template <class Scalar>
LowRankFactors<Scalar> truncated_svd(const Mat<Scalar>& matrix, Index r) {
  if (r < 1 || r > std::min(matrix.rows(), matrix.cols())) {
    throw DimensionError("truncated_svd: need 1 <= r <= min(rows, cols)");
  }
  if (!matrix.allFinite()) throw NumericalError("truncated_svd: matrix has NaN/Inf");
  Eigen::BDCSVD<Mat<Scalar>> svd(matrix, Eigen::ComputeThinU | Eigen::ComputeThinV);
  LowRankFactors<Scalar> out;
  out.singular_values = svd.singularValues().head(r);
  out.left = svd.matrixU().leftCols(r);
  out.right = out.singular_values.template cast<Scalar>().asDiagonal() *
              svd.matrixV().leftCols(r).adjoint();
  return out;
}

template <class Scalar>
Mat<Scalar> rank_r_project(const Mat<Scalar>& matrix, Index r) {
  const LowRankFactors<Scalar> f = truncated_svd(matrix, r);
  return f.left * f.right;
}

template <class Scalar>
CglsResult<Scalar> cgls(const LinearOperator<Scalar>& op, const Vec<Scalar>& rhs, int iters,
                        double tol, const Vec<Scalar>* x0) {
  if (rhs.size() != op.rows) throw DimensionError("cgls: rhs length does not match operator rows");
  if (x0 && x0->size() != op.cols) throw DimensionError("cgls: x0 length does not match operator");
  if (iters < 0) throw ConfigurationError("cgls: negative iteration count");

  CglsResult<Scalar> out;
  out.x = x0 ? *x0 : Vec<Scalar>::Zero(op.cols);
  Vec<Scalar> residual = x0 ? Vec<Scalar>(rhs - op.forward(out.x)) : rhs;
  Vec<Scalar> s = op.adjoint(residual);
  Vec<Scalar> p = s;
  double gamma = s.squaredNorm();
  const double gamma0 = gamma;
  out.residual_norms.push_back(residual.norm());
  if (!std::isfinite(gamma)) throw NumericalError("cgls: non-finite starting residual");
  if (gamma == 0.0) {
    out.converged = true;
    return out;
  }

  for (int t = 0; t < iters; ++t) {
    const Vec<Scalar> ap = op.forward(p);
    const double delta = ap.squaredNorm();
    if (!std::isfinite(delta)) throw NumericalError("cgls: non-finite search direction");
    if (delta == 0.0) break;
    const double alpha = gamma / delta;
    out.x += alpha * p;
    residual -= alpha * ap;
    s = op.adjoint(residual);
    const double gamma_next = s.squaredNorm();
    if (!std::isfinite(gamma_next) || !out.x.allFinite()) {
      throw NumericalError("cgls: breakdown (NaN/Inf) at iteration " + std::to_string(t + 1));
    }
    p = s + (gamma_next / gamma) * p;
    gamma = gamma_next;
    out.iterations = t + 1;
    out.residual_norms.push_back(residual.norm());
    if (std::sqrt(gamma) <= tol * std::sqrt(gamma0)) {
      out.converged = true;
      break;
    }
  }
  return out;
}

#define LRPR_INSTANTIATE_SPECTRAL(S)                                                         \
  template struct SymmetricOperator<S>;                                                      \
  template Mat<S> orthonormalize<S>(const Mat<S>&);                                          \
  template EigPair<S> top_eigvecs<S>(const SymmetricOperator<S>&, Index, int, std::uint64_t, \
                                     bool);                                                  \
  template EigPair<S> top_eigvecs_dense<S>(const Mat<S>&, Index, RealVec*);                  \
  template LowRankFactors<S> truncated_svd<S>(const Mat<S>&, Index);                         \
  template Mat<S> rank_r_project<S>(const Mat<S>&, Index);                                   \
  template CglsResult<S> cgls<S>(const LinearOperator<S>&, const Vec<S>&, int, double,       \
                                 const Vec<S>*);

LRPR_INSTANTIATE_SPECTRAL(double)
LRPR_INSTANTIATE_SPECTRAL(cplx)

}  // namespace lrpr
