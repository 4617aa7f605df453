#include "lrpr/measurement.hpp"

#include <algorithm>
#include <cmath>

#include "lrpr/errors.hpp"
#include "lrpr/rng.hpp"

namespace lrpr {

// ---------------------------------------------------------------------------
// GroundTruth

GroundTruth gen_low_rank(Index n, Index q, Index r, std::uint64_t seed) {
  if (n < 1 || q < 1 || r < 1 || r > std::min(n, q)) {
    throw DimensionError("gen_low_rank: need 1 <= r <= min(n, q), got n=" + std::to_string(n) +
                         " q=" + std::to_string(q) + " r=" + std::to_string(r));
  }
  GroundTruth gt;
  gt.n = n;
  gt.q = q;
  gt.r = r;

  RealMat g(n, r);
  CounterStream subspace(derive_key({seed, stream_tag::kSubspace}));
  fill_gaussian(subspace, g.data(), g.size());
  Eigen::HouseholderQR<RealMat> qr(g);
  gt.U = qr.householderQ() * RealMat::Identity(n, r);

  gt.B.resize(r, q);
  for (Index k = 0; k < q; ++k) {
    CounterStream coeffs(derive_key({seed, stream_tag::kCoefficients, static_cast<std::uint64_t>(k)}));
    fill_uniform(coeffs, -1.0, 1.0, gt.B.col(k).data(), r);
  }
  gt.X = gt.U * gt.B;
  return gt;
}

double GroundTruth::min_eigenvalue() const {
  const RealMat gram = B * B.transpose() / static_cast<double>(q);
  return Eigen::SelfAdjointEigenSolver<RealMat>(gram, Eigen::EigenvaluesOnly).eigenvalues()(0);
}

double GroundTruth::condition_number() const {
  const RealMat gram = B * B.transpose() / static_cast<double>(q);
  const RealVec ev = Eigen::SelfAdjointEigenSolver<RealMat>(gram, Eigen::EigenvaluesOnly).eigenvalues();
  return ev(ev.size() - 1) / ev(0);
}

double GroundTruth::column_energy_ratio() const {
  const RealVec energy = X.colwise().squaredNorm().transpose();
  return energy.maxCoeff() / energy.mean();
}

// ---------------------------------------------------------------------------
// Names

std::string to_string(EnsembleKind kind) {
  switch (kind) {
    case EnsembleKind::GaussianReal: return "gaussian-real";
    case EnsembleKind::GaussianComplex: return "gaussian-complex";
    case EnsembleKind::Cdp: return "cdp";
  }
  return "unknown";
}

std::string to_string(Sharing sharing) {
  return sharing == Sharing::Shared ? "shared" : "per-column";
}

EnsembleKind parse_ensemble_kind(const std::string& text) {
  if (text == "gaussian-real") return EnsembleKind::GaussianReal;
  if (text == "gaussian-complex") return EnsembleKind::GaussianComplex;
  if (text == "cdp") return EnsembleKind::Cdp;
  throw ConfigurationError("unknown ensemble kind '" + text + "'");
}

Sharing parse_sharing(const std::string& text) {
  if (text == "per-column") return Sharing::PerColumn;
  if (text == "shared") return Sharing::Shared;
  throw ConfigurationError("unknown sharing mode '" + text + "'");
}

// ---------------------------------------------------------------------------
// Ensemble base

template <class Scalar>
void Ensemble<Scalar>::check_column(Index k) const {
  if (k < 0 || k >= q_) {
    throw DimensionError("column index " + std::to_string(k) + " out of range [0, " +
                         std::to_string(q_) + ")");
  }
}

template <class Scalar>
Mat<Scalar> Ensemble<Scalar>::materialize(Index k) const {
  if (const Mat<Scalar>* rows = dense_rows(k)) return *rows;
  if (kind_ == EnsembleKind::Cdp && n_ > CdpEnsemble::kMaxMaterializeDim) {
    throw ConfigurationError("refusing to materialize a CDP operator with n=" + std::to_string(n_));
  }
  return forward(k, Mat<Scalar>::Identity(n_, n_));
}

// ---------------------------------------------------------------------------
// GaussianEnsemble

template <class Scalar>
GaussianEnsemble<Scalar>::GaussianEnsemble(EnsembleKind kind, Index n, Index q, Index shared_from,
                                           std::vector<std::shared_ptr<const Mat<Scalar>>> blocks)
    : Ensemble<Scalar>(kind, n, blocks.empty() ? 0 : blocks.front()->rows(), q, shared_from),
      blocks_(std::move(blocks)) {
  if (static_cast<Index>(blocks_.size()) != q) {
    throw DimensionError("GaussianEnsemble: expected " + std::to_string(q) + " column blocks");
  }
  for (const auto& b : blocks_) {
    if (!b || b->rows() != this->rows() || b->cols() != n) {
      throw DimensionError("GaussianEnsemble: inconsistent column block shape");
    }
  }
}

template <class Scalar>
Mat<Scalar> GaussianEnsemble<Scalar>::forward(Index k, const Eigen::Ref<const Mat<Scalar>>& x) const {
  this->check_column(k);
  if (x.rows() != this->dim()) throw DimensionError("forward: operand has wrong row count");
  return *blocks_[k] * x;
}

template <class Scalar>
Mat<Scalar> GaussianEnsemble<Scalar>::adjoint(Index k, const Eigen::Ref<const Mat<Scalar>>& z) const {
  this->check_column(k);
  if (z.rows() != this->rows()) throw DimensionError("adjoint: operand has wrong row count");
  return blocks_[k]->adjoint() * z;
}

template <class Scalar>
const Mat<Scalar>* GaussianEnsemble<Scalar>::dense_rows(Index k) const {
  this->check_column(k);
  return blocks_[k].get();
}

template <class Scalar>
std::shared_ptr<const Ensemble<Scalar>> GaussianEnsemble<Scalar>::slice_rows(Index begin,
                                                                             Index count) const {
  if (begin < 0 || count < 0 || begin + count > this->rows()) {
    throw PartitionError("slice_rows: rows [" + std::to_string(begin) + ", " +
                         std::to_string(begin + count) + ") outside [0, " +
                         std::to_string(this->rows()) + ")");
  }
  const Index shared_from = std::clamp<Index>(this->shared_from() - begin, 0, count);
  std::vector<std::shared_ptr<const Mat<Scalar>>> out(blocks_.size());
  std::shared_ptr<const Mat<Scalar>> common;
  for (std::size_t k = 0; k < blocks_.size(); ++k) {
    if (k > 0 && blocks_[k] == blocks_[k - 1]) {
      out[k] = out[k - 1];
    } else if (shared_from == 0 && common) {
      out[k] = common;
    } else {
      out[k] = std::make_shared<const Mat<Scalar>>(blocks_[k]->middleRows(begin, count));
      if (shared_from == 0) common = out[k];
    }
  }
  return std::make_shared<GaussianEnsemble<Scalar>>(this->kind(), this->dim(), this->columns(),
                                                    shared_from, std::move(out));
}

namespace {

template <class Scalar>
void fill_rows(Mat<Scalar>& block, Index row_begin, Index row_end, std::uint64_t seed,
               std::uint64_t tag, std::uint64_t column) {
  Vec<Scalar> row(block.cols());
  for (Index i = row_begin; i < row_end; ++i) {
    CounterStream stream(tag == stream_tag::kSharedRow
                             ? derive_key({seed, tag, static_cast<std::uint64_t>(i)})
                             : derive_key({seed, tag, column, static_cast<std::uint64_t>(i)}));
    fill_gaussian(stream, row.data(), row.size());
    block.row(i) = row.transpose();
  }
}

template <class Scalar>
std::shared_ptr<const Ensemble<Scalar>> gen_gaussian(const EnsembleSpec& spec) {
  constexpr EnsembleKind expected =
      is_complex_v<Scalar> ? EnsembleKind::GaussianComplex : EnsembleKind::GaussianReal;
  if (spec.kind != expected) {
    throw ConfigurationError("gen_ensemble: kind " + to_string(spec.kind) +
                             " does not match the requested scalar field");
  }
  const Index total = spec.m + spec.fresh_rows;
  std::vector<std::shared_ptr<const Mat<Scalar>>> blocks(spec.q);
  if (spec.sharing == Sharing::Shared) {
    auto block = std::make_shared<Mat<Scalar>>(total, spec.n);
    fill_rows(*block, 0, total, spec.seed, stream_tag::kSharedRow, 0);
    std::fill(blocks.begin(), blocks.end(), block);
    return std::make_shared<GaussianEnsemble<Scalar>>(spec.kind, spec.n, spec.q, 0,
                                                      std::move(blocks));
  }
  Mat<Scalar> tail;
  if (spec.fresh_rows > 0) {
    Mat<Scalar> full(total, spec.n);
    fill_rows(full, spec.m, total, spec.seed, stream_tag::kSharedRow, 0);
    tail = full.bottomRows(spec.fresh_rows);
  }
  for (Index k = 0; k < spec.q; ++k) {
    auto block = std::make_shared<Mat<Scalar>>(total, spec.n);
    fill_rows(*block, 0, spec.m, spec.seed, stream_tag::kGaussianRow, static_cast<std::uint64_t>(k));
    if (spec.fresh_rows > 0) block->bottomRows(spec.fresh_rows) = tail;
    blocks[k] = std::move(block);
  }
  return std::make_shared<GaussianEnsemble<Scalar>>(spec.kind, spec.n, spec.q, spec.m,
                                                    std::move(blocks));
}

std::shared_ptr<const Ensemble<cplx>> gen_cdp(const EnsembleSpec& spec) {
  if (!spec.cdp) throw ConfigurationError("gen_ensemble: cdp kind requires cdp dims (n1, n2, L)");
  const CdpDims d = *spec.cdp;
  if (d.n1 < 1 || d.n2 < 1 || d.masks < 1 || d.n1 * d.n2 != spec.n || spec.m != spec.n * d.masks) {
    throw ConfigurationError("gen_ensemble: cdp requires n1*n2 = n and m = n*L (n=" +
                             std::to_string(spec.n) + ", m=" + std::to_string(spec.m) + ")");
  }
  if (spec.fresh_rows != 0) {
    throw ConfigurationError("gen_ensemble: partitioned measurements are Gaussian-only");
  }
  static const cplx kAlphabet[4] = {cplx(1, 0), cplx(-1, 0), cplx(0, 1), cplx(0, -1)};
  auto draw = [&](std::uint64_t column) {
    auto masks = std::make_shared<Mat<cplx>>(spec.n, d.masks);
    for (Index l = 0; l < d.masks; ++l) {
      CounterStream stream(derive_key({spec.seed, stream_tag::kCdpMask, column,
                                       static_cast<std::uint64_t>(l)}));
      for (Index i = 0; i < spec.n; ++i) (*masks)(i, l) = kAlphabet[stream() >> 62];
    }
    return std::shared_ptr<const Mat<cplx>>(std::move(masks));
  };
  std::vector<std::shared_ptr<const Mat<cplx>>> masks(spec.q);
  if (spec.sharing == Sharing::Shared) {
    std::fill(masks.begin(), masks.end(), draw(0));
  } else {
    for (Index k = 0; k < spec.q; ++k) masks[k] = draw(static_cast<std::uint64_t>(k));
  }
  const Index shared_from = spec.sharing == Sharing::Shared ? 0 : spec.m;
  return std::make_shared<CdpEnsemble>(d, spec.q, shared_from, std::move(masks));
}

}  // namespace

template <class Scalar>
std::shared_ptr<const Ensemble<Scalar>> gen_ensemble(const EnsembleSpec& spec) {
  if (spec.n < 1 || spec.m < 1 || spec.q < 1 || spec.fresh_rows < 0) {
    throw ConfigurationError("gen_ensemble: n, m, q must be positive");
  }
  if (spec.fresh_rows > 0 && spec.sharing == Sharing::Shared) {
    throw ConfigurationError("gen_ensemble: a fresh part only makes sense for per-column ensembles");
  }
  if (spec.kind == EnsembleKind::Cdp) {
    if constexpr (is_complex_v<Scalar>) {
      return gen_cdp(spec);
    } else {
      throw ConfigurationError("gen_ensemble: cdp measurements are complex-valued");
    }
  }
  return gen_gaussian<Scalar>(spec);
}

// ---------------------------------------------------------------------------
// Measurements

template <class Scalar>
Measurements measure(const Ensemble<Scalar>& ens, const Mat<Scalar>& x, double noise_halfwidth,
                     std::uint64_t seed) {
  if (x.rows() != ens.dim() || x.cols() != ens.columns()) {
    throw DimensionError("measure: signal is " + std::to_string(x.rows()) + "x" +
                         std::to_string(x.cols()) + ", ensemble expects " +
                         std::to_string(ens.dim()) + "x" + std::to_string(ens.columns()));
  }
  if (!(noise_halfwidth >= 0.0)) throw ConfigurationError("measure: noise half-width must be >= 0");
  Measurements out;
  out.noise_halfwidth = noise_halfwidth;
  out.y.resize(ens.rows(), ens.columns());
  RealVec noise(ens.rows());
  for (Index k = 0; k < ens.columns(); ++k) {
    out.y.col(k) = ens.forward(k, x.col(k)).col(0).cwiseAbs2();
    if (noise_halfwidth > 0.0) {
      CounterStream stream(derive_key({seed, stream_tag::kNoise, static_cast<std::uint64_t>(k)}));
      fill_uniform(stream, -noise_halfwidth, noise_halfwidth, noise.data(), noise.size());
      out.y.col(k) += noise;
    }
  }
  return out;
}

template <class Scalar>
SplitMeasurements<Scalar> split_measurements(const std::shared_ptr<const Ensemble<Scalar>>& ens,
                                             const RealMat& y, Index m, Index m_fresh) {
  if (!ens) throw PartitionError("split_measurements: null ensemble");
  if (m < 1 || m_fresh < 0 || m + m_fresh != ens->rows()) {
    throw PartitionError("split_measurements: m + m_fresh = " + std::to_string(m + m_fresh) +
                         " but the ensemble has " + std::to_string(ens->rows()) + " rows");
  }
  if (y.rows() != ens->rows() || y.cols() != ens->columns()) {
    throw PartitionError("split_measurements: measurement matrix does not match the ensemble");
  }
  SplitMeasurements<Scalar> out;
  out.init.y = y.topRows(m);
  out.init.ens = m == ens->rows() ? ens : ens->slice_rows(0, m);
  out.fresh.y = y.bottomRows(m_fresh);
  if (m_fresh > 0) out.fresh.ens = ens->slice_rows(m, m_fresh);
  return out;
}

// ---------------------------------------------------------------------------
// Instantiations

template class Ensemble<double>;
template class Ensemble<cplx>;
template class GaussianEnsemble<double>;
template class GaussianEnsemble<cplx>;

template std::shared_ptr<const Ensemble<double>> gen_ensemble<double>(const EnsembleSpec&);
template std::shared_ptr<const Ensemble<cplx>> gen_ensemble<cplx>(const EnsembleSpec&);
template Measurements measure<double>(const Ensemble<double>&, const Mat<double>&, double,
                                      std::uint64_t);
template Measurements measure<cplx>(const Ensemble<cplx>&, const Mat<cplx>&, double, std::uint64_t);
template SplitMeasurements<double> split_measurements<double>(
    const std::shared_ptr<const Ensemble<double>>&, const RealMat&, Index, Index);
template SplitMeasurements<cplx> split_measurements<cplx>(
    const std::shared_ptr<const Ensemble<cplx>>&, const RealMat&, Index, Index);

}  // namespace lrpr
