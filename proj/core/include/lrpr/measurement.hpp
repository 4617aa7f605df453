#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "lrpr/types.hpp"

namespace lrpr {

// ---------------------------------------------------------------------------
// Planted instance

/// Rank-r matrix X = U B with orthonormal U (n x r) and B (r x q).
struct GroundTruth {
  Index n = 0;
  Index q = 0;
  Index r = 0;
  RealMat U;
  RealMat B;
  RealMat X;

  /// kappa: ratio of the extreme nonzero eigenvalues of X X' / q.
  double condition_number() const;
  /// rho: largest column energy over the mean column energy.
  double column_energy_ratio() const;
  /// Smallest nonzero eigenvalue of X X' / q.
  double min_eigenvalue() const;

  template <class Scalar>
  Mat<Scalar> signal() const {
    return X.cast<Scalar>();
  }
};

/// U orthonormalizes an n x r iid Gaussian matrix; B is iid Uniform(-1, 1).
/// Deterministic in `seed`.
GroundTruth gen_low_rank(Index n, Index q, Index r, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Measurement operators

enum class EnsembleKind { GaussianReal, GaussianComplex, Cdp };
enum class Sharing { PerColumn, Shared };

std::string to_string(EnsembleKind kind);
std::string to_string(Sharing sharing);
EnsembleKind parse_ensemble_kind(const std::string& text);
Sharing parse_sharing(const std::string& text);

struct CdpDims {
  Index n1 = 0;
  Index n2 = 0;
  Index masks = 0;  // L, so that m = n * L
};

struct EnsembleSpec {
  EnsembleKind kind = EnsembleKind::GaussianReal;
  Index n = 0;
  Index m = 0;  // rows per column (init part when fresh_rows > 0)
  Index q = 0;
  Sharing sharing = Sharing::PerColumn;
  std::uint64_t seed = 0;
  /// Extra rows appended after the first m, common to every column (the
  /// fresh set of the partitioned model). Gaussian kinds only.
  Index fresh_rows = 0;
  std::optional<CdpDims> cdp;
};

/// Family of per-column linear maps x_k -> A_k' x_k (m rows each). Row i of
/// column k is a_{i,k}' so that forward(k, x)_i = <a_{i,k}, x>.
template <class Scalar>
class Ensemble {
 public:
  Ensemble(EnsembleKind kind, Index n, Index m, Index q, Index shared_from)
      : kind_(kind), n_(n), m_(m), q_(q), shared_from_(shared_from) {}
  virtual ~Ensemble() = default;

  EnsembleKind kind() const { return kind_; }
  Index dim() const { return n_; }
  Index rows() const { return m_; }
  Index columns() const { return q_; }
  /// Rows at or beyond this index use the same vectors for every column.
  Index shared_from() const { return shared_from_; }
  Sharing sharing() const { return shared_from_ == 0 ? Sharing::Shared : Sharing::PerColumn; }

  /// A_k' X for an n x p block X; returns m x p.
  virtual Mat<Scalar> forward(Index k, const Eigen::Ref<const Mat<Scalar>>& x) const = 0;
  /// A_k Z for an m x p block Z; returns n x p.
  virtual Mat<Scalar> adjoint(Index k, const Eigen::Ref<const Mat<Scalar>>& z) const = 0;

  /// Dense m x n matrix of column k, when the ensemble stores one.
  virtual const Mat<Scalar>* dense_rows(Index /*k*/) const { return nullptr; }

  /// Sub-ensemble made of rows [begin, begin + count) of every column.
  virtual std::shared_ptr<const Ensemble<Scalar>> slice_rows(Index begin, Index count) const = 0;

  /// Dense m x n matrix of column k built by applying forward to the identity.
  Mat<Scalar> materialize(Index k) const;

 protected:
  void check_column(Index k) const;

 private:
  EnsembleKind kind_;
  Index n_;
  Index m_;
  Index q_;
  Index shared_from_;
};

/// Explicitly stored Gaussian vectors. Columns with shared storage hold the
/// same pointer, so shared ensembles cost one m x n block.
template <class Scalar>
class GaussianEnsemble final : public Ensemble<Scalar> {
 public:
  GaussianEnsemble(EnsembleKind kind, Index n, Index q, Index shared_from,
                   std::vector<std::shared_ptr<const Mat<Scalar>>> blocks);

  Mat<Scalar> forward(Index k, const Eigen::Ref<const Mat<Scalar>>& x) const override;
  Mat<Scalar> adjoint(Index k, const Eigen::Ref<const Mat<Scalar>>& z) const override;
  const Mat<Scalar>* dense_rows(Index k) const override;
  std::shared_ptr<const Ensemble<Scalar>> slice_rows(Index begin, Index count) const override;

  /// Storage handle for column k; equal handles mean reference-equal vectors.
  const std::shared_ptr<const Mat<Scalar>>& block(Index k) const { return blocks_[k]; }

 private:
  std::vector<std::shared_ptr<const Mat<Scalar>>> blocks_;
};

/// Coded diffraction patterns: A_k' x = [F M_{k,1} x; ...; F M_{k,L} x] with
/// diagonal masks drawn from {1, -1, i, -i} and F the unnormalized 2-D DFT of
/// the n1 x n2 image stored row-major in x. Only the masks are stored.
class CdpEnsemble final : public Ensemble<cplx> {
 public:
  CdpEnsemble(CdpDims dims, Index q, Index shared_from,
              std::vector<std::shared_ptr<const Mat<cplx>>> masks);
  ~CdpEnsemble() override;

  Mat<cplx> forward(Index k, const Eigen::Ref<const Mat<cplx>>& x) const override;
  Mat<cplx> adjoint(Index k, const Eigen::Ref<const Mat<cplx>>& z) const override;
  std::shared_ptr<const Ensemble<cplx>> slice_rows(Index begin, Index count) const override;

  const CdpDims& dims() const { return dims_; }
  /// n x L matrix of mask diagonals for column k.
  const Mat<cplx>& masks(Index k) const { return *masks_[k]; }

  /// Largest n for which materialize() is permitted.
  static constexpr Index kMaxMaterializeDim = 4096;

 private:
  struct Plans;
  CdpDims dims_;
  std::vector<std::shared_ptr<const Mat<cplx>>> masks_;
  std::shared_ptr<const Plans> plans_;
};

/// Deterministic ensemble for `spec`. Scalar must be double for
/// GaussianReal and cplx for GaussianComplex and Cdp.
template <class Scalar>
std::shared_ptr<const Ensemble<Scalar>> gen_ensemble(const EnsembleSpec& spec);

// ---------------------------------------------------------------------------
// Measurements

/// Squared magnitudes y(i, k) = |<a_{i,k}, x_k>|^2 (+ noise), m x q.
struct Measurements {
  RealMat y;
  double noise_halfwidth = 0.0;
};

/// y = |A_k' x_k|^2 + w with w iid Uniform(-noise_halfwidth, noise_halfwidth).
/// Noise is not clipped, so noisy entries may be negative.
template <class Scalar>
Measurements measure(const Ensemble<Scalar>& ens, const Mat<Scalar>& x, double noise_halfwidth,
                     std::uint64_t seed);

template <class Scalar>
Measurements measure(const Ensemble<Scalar>& ens, const GroundTruth& truth,
                     double noise_halfwidth, std::uint64_t seed) {
  return measure(ens, truth.signal<Scalar>(), noise_halfwidth, seed);
}

template <class Scalar>
struct MeasurementPart {
  RealMat y;
  std::shared_ptr<const Ensemble<Scalar>> ens;
};

template <class Scalar>
struct SplitMeasurements {
  MeasurementPart<Scalar> init;   // first m rows
  MeasurementPart<Scalar> fresh;  // last m_fresh rows
};

/// Disjoint row partition of an ensemble and its measurements.
template <class Scalar>
SplitMeasurements<Scalar> split_measurements(const std::shared_ptr<const Ensemble<Scalar>>& ens,
                                             const RealMat& y, Index m, Index m_fresh);

}  // namespace lrpr
