#include <cmath>

#include "lrpr/algorithms.hpp"
#include "lrpr/errors.hpp"

namespace lrpr {

template <class Scalar>
Vec<Scalar> phase_of(const Vec<Scalar>& z) {
  Vec<Scalar> out(z.size());
  for (Index i = 0; i < z.size(); ++i) {
    const double mag = std::abs(z(i));
    out(i) = mag > 0.0 ? Scalar(z(i) / mag) : Scalar(1);
  }
  return out;
}

template <class Scalar>
Mat<Scalar> phase_step(const Ensemble<Scalar>& ens, const Mat<Scalar>& U, const Mat<Scalar>& B) {
  if (U.rows() != ens.dim() || B.cols() != ens.columns() || U.cols() != B.rows()) {
    throw DimensionError("phase_step: U and B do not match the ensemble");
  }
  Mat<Scalar> phases(ens.rows(), ens.columns());
  for (Index k = 0; k < ens.columns(); ++k) {
    const Vec<Scalar> x = U * B.col(k);
    phases.col(k) = phase_of<Scalar>(ens.forward(k, x));
  }
  return phases;
}

template <class Scalar>
Vec<Scalar> ls_update_b(const Ensemble<Scalar>& ens, Index k, const Eigen::Ref<const Vec<Scalar>>& phases_k,
                        const Eigen::Ref<const RealVec>& y_k, const Mat<Scalar>& U) {
  if (phases_k.size() != ens.rows() || y_k.size() != ens.rows() || U.rows() != ens.dim()) {
    throw DimensionError("ls_update_b: operand shapes do not match the ensemble");
  }
  const Index r = U.cols();
  const Vec<Scalar> rhs = phases_k.cwiseProduct(y_k.cwiseMax(0.0).cwiseSqrt().template cast<Scalar>());
  if (rhs.isZero(0.0)) return Vec<Scalar>::Zero(r);
  const Mat<Scalar> design = ens.forward(k, U);
  Eigen::ColPivHouseholderQR<Mat<Scalar>> qr(design);
  if (qr.rank() < r) {
    throw RankDeficiencyError("ls_update_b: A_k' U has rank " + std::to_string(qr.rank()) +
                              " < " + std::to_string(r) + " (column " + std::to_string(k) + ")");
  }
  return qr.solve(rhs);
}

// ---------------------------------------------------------------------------
// AltMinSolver

template <class Scalar>
AltMinSolver<Scalar>::AltMinSolver(const Ensemble<Scalar>& ens, const RealMat& y, LsOptions ls)
    : ens_(ens), ls_(ls) {
  if (y.rows() != ens.rows() || y.cols() != ens.columns()) {
    throw DimensionError("AltMinSolver: measurements do not match the ensemble");
  }
  if (ls_.cgls_iters < 1) throw ConfigurationError("AltMinSolver: cgls_iters must be >= 1");
  sqrt_y_ = y.cwiseMax(0.0).cwiseSqrt();
}

template <class Scalar>
bool AltMinSolver<Scalar>::use_dense(Index r) const {
  if (ens_.dim() * r > ls_.dense_unknowns) return false;
  if (ens_.dense_rows(0) == nullptr) return false;
  Index distinct = 1;
  for (Index k = 1; k < ens_.columns(); ++k) {
    if (ens_.dense_rows(k) != ens_.dense_rows(k - 1)) ++distinct;
  }
  const double bytes = static_cast<double>(distinct) * static_cast<double>(ens_.dim()) *
                       static_cast<double>(ens_.dim()) * sizeof(Scalar);
  return bytes <= ls_.gram_cache_bytes;
}

template <class Scalar>
void AltMinSolver<Scalar>::build_grams() {
  if (!grams_.empty()) return;
  const Index n = ens_.dim();
  grams_.resize(ens_.columns());
  for (Index k = 0; k < ens_.columns(); ++k) {
    if (k > 0 && ens_.dense_rows(k) == ens_.dense_rows(k - 1)) {
      grams_[k] = grams_[k - 1];
      continue;
    }
    const Mat<Scalar>& rows = *ens_.dense_rows(k);
    Mat<Scalar> g = Mat<Scalar>::Zero(n, n);
    g.template selfadjointView<Eigen::Lower>().rankUpdate(rows.adjoint());
    grams_[k] = std::make_shared<const Mat<Scalar>>(g.template selfadjointView<Eigen::Lower>());
  }
}

template <class Scalar>
Mat<Scalar> AltMinSolver<Scalar>::update_U(const Mat<Scalar>& phases, const Mat<Scalar>& B,
                                           const Mat<Scalar>* warm) {
  const Index n = ens_.dim();
  const Index m = ens_.rows();
  const Index q = ens_.columns();
  const Index r = B.rows();
  if (phases.rows() != m || phases.cols() != q || B.cols() != q || r < 1) {
    throw DimensionError("ls_update_U: phases or B do not match the ensemble");
  }
  if (warm && (warm->rows() != n || warm->cols() != r)) {
    throw DimensionError("ls_update_U: warm start has the wrong shape");
  }
  const std::string singular =
      "ls_update_U: singular normal matrix; the U update needs mq >= nr (mq = " +
      std::to_string(m * q) + ", nr = " + std::to_string(n * r) + ") and a full-rank B";
  if (B.isZero(0.0)) throw RankDeficiencyError(singular);

  const Mat<Scalar> rhs = phases.cwiseProduct(sqrt_y_.template cast<Scalar>());

  if (use_dense(r)) {
    build_grams();
    const Index d = n * r;
    Mat<Scalar> normal = Mat<Scalar>::Zero(d, d);
    Vec<Scalar> target = Vec<Scalar>::Zero(d);
    // Columns sharing one Gram matrix contribute through a single Kronecker block.
    Mat<Scalar> coef = Mat<Scalar>::Zero(r, r);
    auto flush = [&](const Mat<Scalar>& g) {
      for (Index j = 0; j < r; ++j) {
        for (Index i = j; i < r; ++i) {
          if (coef(i, j) != Scalar(0)) normal.block(i * n, j * n, n, n).noalias() += coef(i, j) * g;
        }
      }
      coef.setZero();
    };
    for (Index k = 0; k < q; ++k) {
      const Vec<Scalar> b = B.col(k);
      coef.noalias() += b.conjugate() * b.transpose();
      const Vec<Scalar> back = ens_.adjoint(k, rhs.col(k));
      for (Index i = 0; i < r; ++i) target.segment(i * n, n) += Eigen::numext::conj(b(i)) * back;
      if (k + 1 == q || grams_[k + 1] != grams_[k]) flush(*grams_[k]);
    }
    Eigen::LLT<Mat<Scalar>, Eigen::Lower> llt(normal);
    if (llt.info() != Eigen::Success || !(llt.rcond() > 1e-13)) throw RankDeficiencyError(singular);
    const Vec<Scalar> sol = llt.solve(target);
    if (!sol.allFinite()) throw NumericalError("ls_update_U: solution has NaN/Inf");
    return Eigen::Map<const Mat<Scalar>>(sol.data(), n, r);
  }

  LinearOperator<Scalar> op;
  op.rows = m * q;
  op.cols = n * r;
  const Ensemble<Scalar>& ens = ens_;
  op.forward = [&ens, &B, n, m, r](const Vec<Scalar>& u) -> Vec<Scalar> {
    const Eigen::Map<const Mat<Scalar>> U(u.data(), n, r);
    const Mat<Scalar> X = U * B;
    Vec<Scalar> out(m * B.cols());
    for (Index k = 0; k < B.cols(); ++k) out.segment(k * m, m) = ens.forward(k, X.col(k));
    return out;
  };
  op.adjoint = [&ens, &B, n, m, r](const Vec<Scalar>& z) -> Vec<Scalar> {
    Mat<Scalar> back(n, B.cols());
    for (Index k = 0; k < B.cols(); ++k) back.col(k) = ens.adjoint(k, z.segment(k * m, m));
    const Mat<Scalar> g = back * B.adjoint();
    return Eigen::Map<const Vec<Scalar>>(g.data(), n * r);
  };
  const Vec<Scalar> stacked = Eigen::Map<const Vec<Scalar>>(rhs.data(), m * q);
  Vec<Scalar> start = warm ? Vec<Scalar>(Eigen::Map<const Vec<Scalar>>(warm->data(), n * r))
                           : Vec<Scalar>(Vec<Scalar>::Zero(n * r));
  const CglsResult<Scalar> res = cgls(op, stacked, ls_.cgls_iters, 0.0, &start);
  return Eigen::Map<const Mat<Scalar>>(res.x.data(), n, r);
}

template <class Scalar>
void AltMinSolver<Scalar>::round(Mat<Scalar>& U, Mat<Scalar>& B) {
  const Mat<Scalar> phases = phase_step(ens_, U, B);
  U = orthonormalize<Scalar>(update_U(phases, B, &U));
  for (Index k = 0; k < ens_.columns(); ++k) {
    B.col(k) = ls_update_b<Scalar>(ens_, k, phases.col(k), sqrt_y_.col(k).cwiseAbs2(), U);
  }
}

template <class Scalar>
Mat<Scalar> ls_update_U(const Ensemble<Scalar>& ens, const Mat<Scalar>& phases, const RealMat& y,
                        const Mat<Scalar>& B, const LsOptions& ls, const Mat<Scalar>* warm) {
  AltMinSolver<Scalar> solver(ens, y, ls);
  return solver.update_U(phases, B, warm);
}

template <class Scalar>
Estimate<Scalar> run_lrpr2(const Ensemble<Scalar>& ens, const RealMat& y, int iterations,
                           const RankRule& rank, const RunOptions<Scalar>& opts) {
  if (iterations < 0) throw ConfigurationError("run_lrpr2: negative iteration count");
  Tracer<Scalar> tracer(opts.truth, opts.stop_below);
  Estimate<Scalar> est = lrpr_init(ens, y, rank, opts.spectral);
  if (tracer.record(0, est.X_hat, est.trace) || iterations == 0) return est;
  AltMinSolver<Scalar> solver(ens, y, opts.ls);
  for (int t = 1; t <= iterations; ++t) {
    solver.round(est.U_hat, est.B_hat);
    est.X_hat = est.U_hat * est.B_hat;
    if (tracer.record(t, est.X_hat, est.trace)) break;
  }
  return est;
}

#define LRPR_INSTANTIATE_ALTMIN(S)                                                               \
  template Vec<S> phase_of<S>(const Vec<S>&);                                                    \
  template Mat<S> phase_step<S>(const Ensemble<S>&, const Mat<S>&, const Mat<S>&);               \
  template Vec<S> ls_update_b<S>(const Ensemble<S>&, Index, const Eigen::Ref<const Vec<S>>&,     \
                                 const Eigen::Ref<const RealVec>&, const Mat<S>&);               \
  template class AltMinSolver<S>;                                                                \
  template Mat<S> ls_update_U<S>(const Ensemble<S>&, const Mat<S>&, const RealMat&, const Mat<S>&, \
                                 const LsOptions&, const Mat<S>*);                               \
  template Estimate<S> run_lrpr2<S>(const Ensemble<S>&, const RealMat&, int, const RankRule&,    \
                                    const RunOptions<S>&);

LRPR_INSTANTIATE_ALTMIN(double)
LRPR_INSTANTIATE_ALTMIN(cplx)

}  // namespace lrpr
