#include <algorithm>
#include <cmath>

#include "lrpr/algorithms.hpp"
#include "lrpr/errors.hpp"
#include "lrpr/rng.hpp"

namespace lrpr {

namespace {

void check_measurements(const char* who, Index n_rows, Index n_cols, const RealMat& y) {
  if (y.size() == 0) throw ConfigurationError(std::string(who) + ": empty measurements");
  if (y.rows() != n_rows || y.cols() != n_cols) {
    throw DimensionError(std::string(who) + ": measurements are " + std::to_string(y.rows()) +
                         "x" + std::to_string(y.cols()) + " but the ensemble has " +
                         std::to_string(n_rows) + " rows and " + std::to_string(n_cols) +
                         " columns");
  }
}

/// acc += R' diag(w) R, lower triangle only. Rank updates halve the work and
/// signed weights are split into two updates.
template <class Scalar>
void accumulate_weighted_gram(Mat<Scalar>& acc, const Mat<Scalar>& rows, const RealVec& w) {
  const Index m = rows.rows();
  Index n_pos = 0;
  Index n_neg = 0;
  for (Index i = 0; i < m; ++i) {
    if (w(i) > 0.0) ++n_pos;
    else if (w(i) < 0.0) ++n_neg;
  }
  auto update = [&](Index count, double sign) {
    if (count == 0) return;
    Mat<Scalar> scaled(count, rows.cols());
    Index j = 0;
    for (Index i = 0; i < m; ++i) {
      if (sign * w(i) > 0.0) scaled.row(j++) = std::sqrt(std::abs(w(i))) * rows.row(i);
    }
    acc.template selfadjointView<Eigen::Lower>().rankUpdate(scaled.adjoint(), sign);
  };
  update(n_pos, 1.0);
  update(n_neg, -1.0);
}

template <class Scalar>
Mat<Scalar> full_from_lower(const Mat<Scalar>& lower) {
  return lower.template selfadjointView<Eigen::Lower>();
}

template <class Scalar>
bool shares_all_rows(const Ensemble<Scalar>& ens) {
  const Mat<Scalar>* first = ens.dense_rows(0);
  for (Index k = 1; k < ens.columns(); ++k) {
    if (ens.dense_rows(k) != first) return false;
  }
  return true;
}

/// Top eigenvector of a small Hermitian matrix (largest algebraic eigenvalue).
template <class Scalar>
Vec<Scalar> top_vector(const Mat<Scalar>& h) {
  Eigen::SelfAdjointEigenSolver<Mat<Scalar>> eig(h);
  if (eig.info() != Eigen::Success) throw NumericalError("eigensolver failed on a column matrix");
  return eig.eigenvectors().col(h.rows() - 1);
}

double root_mean(const Eigen::Ref<const RealVec>& y) {
  return std::sqrt(std::max(0.0, y.mean()));
}

}  // namespace

RealMat truncation_weights(const RealMat& y) {
  RealMat w(y.rows(), y.cols());
  for (Index k = 0; k < y.cols(); ++k) {
    const double cut = 9.0 * y.col(k).mean();
    for (Index i = 0; i < y.rows(); ++i) w(i, k) = y(i, k) <= cut ? y(i, k) : 0.0;
  }
  return w;
}

template <class Scalar>
SymmetricOperator<Scalar> build_YU(const Ensemble<Scalar>& ens, const RealMat& y,
                                   Index dense_threshold) {
  check_measurements("build_YU", ens.rows(), ens.columns(), y);
  const Index n = ens.dim();
  const Index q = ens.columns();
  const double scale = 1.0 / (static_cast<double>(ens.rows()) * static_cast<double>(q));
  auto w = std::make_shared<const RealMat>(truncation_weights(y));

  SymmetricOperator<Scalar> op;
  op.dim = n;
  const Ensemble<Scalar>* e = &ens;
  op.apply = [e, w, scale](const Mat<Scalar>& v) -> Mat<Scalar> {
    Mat<Scalar> out = Mat<Scalar>::Zero(e->dim(), v.cols());
    for (Index k = 0; k < e->columns(); ++k) {
      Mat<Scalar> z = e->forward(k, v);
      z = w->col(k).template cast<Scalar>().asDiagonal() * z;
      out.noalias() += e->adjoint(k, z);
    }
    return out * scale;
  };

  if (n > dense_threshold) return op;

  Mat<Scalar> dense;
  if (ens.dense_rows(0) != nullptr) {
    Mat<Scalar> lower = Mat<Scalar>::Zero(n, n);
    if (shares_all_rows(ens)) {
      accumulate_weighted_gram(lower, *ens.dense_rows(0), RealVec(w->rowwise().sum()));
    } else {
      for (Index k = 0; k < q; ++k) accumulate_weighted_gram(lower, *ens.dense_rows(k), RealVec(w->col(k)));
    }
    dense = full_from_lower(lower) * scale;
  } else {
    dense = op.apply(Mat<Scalar>::Identity(n, n));
    dense = (0.5 * (dense + dense.adjoint())).eval();
  }
  op.dense = std::make_shared<const Mat<Scalar>>(std::move(dense));
  return op;
}

Index estimate_rank_gap(const RealVec& eigvals) {
  if (eigvals.size() < 2) throw ConfigurationError("estimate_rank_gap: need at least two eigenvalues");
  Index best = 0;
  double best_gap = eigvals(0) - eigvals(1);
  for (Index j = 1; j + 1 < eigvals.size(); ++j) {
    const double gap = eigvals(j) - eigvals(j + 1);
    if (gap > best_gap) {
      best_gap = gap;
      best = j;
    }
  }
  return best + 1;
}

ThresholdRank estimate_rank_threshold(const RealVec& eigvals, double lambda_min) {
  if (!(lambda_min > 0.0)) throw ConfigurationError("estimate_rank_threshold: lambda_min must be > 0");
  if (eigvals.size() < 1) throw ConfigurationError("estimate_rank_threshold: no eigenvalues");
  const double floor = eigvals(eigvals.size() - 1);
  const double level = 0.25 * lambda_min;
  const double slack = 1e-12 * std::max({1.0, std::abs(eigvals(0)), level});
  ThresholdRank out;
  for (Index j = 0; j < eigvals.size(); ++j) {
    if (eigvals(j) - floor >= level - slack) ++out.rank;
  }
  out.no_signal = out.rank == 0;
  return out;
}

template <class Scalar>
Estimate<Scalar> lrpr_init(const Ensemble<Scalar>& ens, const RealMat& y, const RankRule& rank,
                           const SpectralOptions& opts, const MeasurementPart<Scalar>* fresh) {
  check_measurements("lrpr_init", ens.rows(), ens.columns(), y);
  const Index n = ens.dim();
  const Index q = ens.columns();
  if (rank.mode == RankMode::Known && (rank.r < 1 || rank.r > n)) {
    throw DimensionError("lrpr_init: known rank must be in [1, n]");
  }
  if (fresh) {
    if (!fresh->ens || fresh->ens->dim() != n || fresh->ens->columns() != q) {
      throw PartitionError("lrpr_init: fresh part does not match the init ensemble");
    }
    if (fresh->ens->sharing() != Sharing::Shared) {
      throw PartitionError("lrpr_init: fresh measurement vectors must be common to all columns");
    }
    check_measurements("lrpr_init (fresh part)", fresh->ens->rows(), q, fresh->y);
  }

  const SymmetricOperator<Scalar> op = build_YU(ens, y, opts.dense_threshold);
  Estimate<Scalar> est;
  Mat<Scalar> vectors;

  if (op.dense) {
    RealVec spectrum;
    const EigPair<Scalar> all = top_eigvecs_dense(*op.dense, n, &spectrum);
    vectors = all.vectors;
    est.eigenvalues = spectrum;
    est.degenerate = all.degenerate;
  } else {
    const Index want = rank.mode == RankMode::Known ? rank.r : std::min(n, rank.max_rank + 1);
    const EigPair<Scalar> top = top_eigvecs(op, want, opts.power_iters, opts.seed);
    vectors = top.vectors;
    est.eigenvalues = top.values;
    est.degenerate = top.degenerate;
    if (rank.mode == RankMode::Threshold && want < n) {
      // Smallest eigenvalue from the top of lambda_1 I - Y_U.
      const double top_value = top.values(0);
      SymmetricOperator<Scalar> flipped;
      flipped.dim = n;
      flipped.apply = [&op, top_value](const Mat<Scalar>& v) -> Mat<Scalar> {
        return top_value * v - op.apply(v);
      };
      const EigPair<Scalar> low =
          top_eigvecs(flipped, 1, opts.power_iters, derive_key({opts.seed, 1}));
      est.eigenvalues.conservativeResize(want + 1);
      est.eigenvalues(want) = top_value - (low.degenerate ? 0.0 : low.values(0));
    }
  }

  switch (rank.mode) {
    case RankMode::Known:
      est.r_hat = rank.r;
      break;
    case RankMode::Gap: {
      const Index usable = std::min<Index>(est.eigenvalues.size(), vectors.cols() + 1);
      est.r_hat = estimate_rank_gap(est.eigenvalues.head(usable));
      est.rank_estimated = true;
      break;
    }
    case RankMode::Threshold: {
      const ThresholdRank tr = estimate_rank_threshold(est.eigenvalues, rank.lambda_min);
      if (tr.no_signal) {
        throw NoSignalError("lrpr_init: no eigenvalue of the spectral matrix clears the threshold");
      }
      est.r_hat = std::min(tr.rank, vectors.cols());
      est.rank_estimated = true;
      break;
    }
  }

  est.U_hat = vectors.leftCols(est.r_hat);

  const Ensemble<Scalar>& coef_ens = fresh ? *fresh->ens : ens;
  const RealMat& coef_y = fresh ? fresh->y : y;
  const double inv_m = 1.0 / static_cast<double>(coef_ens.rows());
  est.B_hat.resize(est.r_hat, q);
  for (Index k = 0; k < q; ++k) {
    const double nu = root_mean(coef_y.col(k));
    if (nu == 0.0) {
      est.B_hat.col(k).setZero();
      continue;
    }
    const Mat<Scalar> proj = coef_ens.forward(k, est.U_hat);
    const Mat<Scalar> h = proj.adjoint() * coef_y.col(k).template cast<Scalar>().asDiagonal() * proj * inv_m;
    est.B_hat.col(k) = top_vector<Scalar>(h) * Scalar(nu);
  }
  est.X_hat = est.U_hat * est.B_hat;
  return est;
}

template <class Scalar>
Vec<Scalar> twf_init(const Ensemble<Scalar>& ens, Index k, const Eigen::Ref<const RealVec>& y_k,
                     const SpectralOptions& opts, ColumnInit* info) {
  if (k < 0 || k >= ens.columns()) throw DimensionError("twf_init: column index out of range");
  if (y_k.size() != ens.rows()) throw DimensionError("twf_init: measurement length mismatch");
  const Index n = ens.dim();
  const double nu = root_mean(y_k);
  const RealMat w = truncation_weights(RealMat(y_k));
  if (info) info->degenerate = false;
  if (nu == 0.0 || w.isZero(0.0)) {
    if (info) info->degenerate = true;
    return Vec<Scalar>::Zero(n);
  }

  Vec<Scalar> direction;
  const Mat<Scalar>* rows = ens.dense_rows(k);
  if (rows && n <= opts.dense_threshold) {
    Mat<Scalar> lower = Mat<Scalar>::Zero(n, n);
    accumulate_weighted_gram(lower, *rows, RealVec(w.col(0)));
    direction = top_vector<Scalar>(full_from_lower(lower));
  } else {
    SymmetricOperator<Scalar> op;
    op.dim = n;
    op.apply = [&ens, k, &w](const Mat<Scalar>& v) -> Mat<Scalar> {
      Mat<Scalar> z = ens.forward(k, v);
      z = w.col(0).template cast<Scalar>().asDiagonal() * z;
      return ens.adjoint(k, z);
    };
    const EigPair<Scalar> top =
        top_eigvecs(op, 1, opts.power_iters, derive_key({opts.seed, static_cast<std::uint64_t>(k)}));
    if (top.degenerate) {
      if (info) info->degenerate = true;
      return Vec<Scalar>::Zero(n);
    }
    direction = top.vectors.col(0);
  }
  return direction * Scalar(nu);
}

template <class Scalar>
Estimate<Scalar> twf_init_all(const Ensemble<Scalar>& ens, const RealMat& y,
                              const SpectralOptions& opts) {
  check_measurements("twf_init", ens.rows(), ens.columns(), y);
  Estimate<Scalar> est;
  est.X_hat.resize(ens.dim(), ens.columns());
  for (Index k = 0; k < ens.columns(); ++k) {
    ColumnInit info;
    est.X_hat.col(k) = twf_init<Scalar>(ens, k, y.col(k), opts, &info);
    est.degenerate = est.degenerate || info.degenerate;
  }
  return est;
}

template <class Scalar>
Estimate<Scalar> twfproj_init(const Ensemble<Scalar>& ens, const RealMat& y, Index r,
                              const SpectralOptions& opts) {
  Estimate<Scalar> est = twf_init_all(ens, y, opts);
  if (r < 1 || r > std::min(ens.dim(), ens.columns())) {
    throw DimensionError("twfproj_init: rank must be in [1, min(n, q)]");
  }
  if (est.X_hat.isZero(0.0)) {
    est.U_hat = Mat<Scalar>::Identity(ens.dim(), r);
    est.B_hat = Mat<Scalar>::Zero(r, ens.columns());
  } else {
    LowRankFactors<Scalar> f = truncated_svd(est.X_hat, r);
    est.U_hat = std::move(f.left);
    est.B_hat = std::move(f.right);
  }
  est.r_hat = r;
  est.X_hat = est.U_hat * est.B_hat;
  return est;
}

#define LRPR_INSTANTIATE_INIT(S)                                                                \
  template SymmetricOperator<S> build_YU<S>(const Ensemble<S>&, const RealMat&, Index);          \
  template Estimate<S> lrpr_init<S>(const Ensemble<S>&, const RealMat&, const RankRule&,         \
                                    const SpectralOptions&, const MeasurementPart<S>*);          \
  template Vec<S> twf_init<S>(const Ensemble<S>&, Index, const Eigen::Ref<const RealVec>&,       \
                              const SpectralOptions&, ColumnInit*);                              \
  template Estimate<S> twf_init_all<S>(const Ensemble<S>&, const RealMat&, const SpectralOptions&); \
  template Estimate<S> twfproj_init<S>(const Ensemble<S>&, const RealMat&, Index,                \
                                       const SpectralOptions&);

LRPR_INSTANTIATE_INIT(double)
LRPR_INSTANTIATE_INIT(cplx)

}  // namespace lrpr
