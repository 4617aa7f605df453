#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "lrpr/measurement.hpp"
#include "lrpr/spectral.hpp"
#include "lrpr/types.hpp"

namespace lrpr {

// ---------------------------------------------------------------------------
// Parameters and results

/// How the two truncation events of a gradient step are combined.
enum class EventRule { Intersection, Union };

std::string to_string(EventRule rule);
EventRule parse_event_rule(const std::string& text);

/// Truncated Wirtinger-flow step parameters.
struct TwfParams {
  double step = 0.2;
  double alpha_lb = 0.3;
  double alpha_ub = 5.0;
  double alpha_h = 5.0;
  int iterations = 100;
  EventRule events = EventRule::Union;

  void validate() const;
};

struct TracePoint {
  int iteration = 0;
  double norm_err = std::numeric_limits<double>::quiet_NaN();
  double elapsed_seconds = 0.0;
};

template <class Scalar>
struct Estimate {
  Mat<Scalar> U_hat;  // n x r_hat, orthonormal; empty for column-wise methods
  Mat<Scalar> B_hat;  // r_hat x q
  Mat<Scalar> X_hat;  // n x q
  Index r_hat = 0;
  bool rank_estimated = false;
  /// Spectral matrix was numerically zero (e.g. all-zero measurements).
  bool degenerate = false;
  /// Leading eigenvalues of the spectral matrix seen by the rank rule.
  RealVec eigenvalues;
  std::vector<TracePoint> trace;

  bool factored() const { return U_hat.cols() > 0; }
};

enum class RankMode { Known, Gap, Threshold };

struct RankRule {
  RankMode mode = RankMode::Known;
  Index r = 1;                // Known
  double lambda_min = 0.0;    // Threshold: lower bound on the smallest signal eigenvalue
  Index max_rank = 10;        // eigenvalues computed on the operator path

  static RankRule known(Index r);
  static RankRule gap(Index max_rank = 10);
  static RankRule threshold(double lambda_min, Index max_rank = 10);
};

struct SpectralOptions {
  /// Materialize n x n spectral matrices up to this dimension.
  Index dense_threshold = 2000;
  int power_iters = 50;
  std::uint64_t seed = 0;
};

struct LsOptions {
  /// Closed-form U update up to this many unknowns (n * r), CGLS above.
  Index dense_unknowns = 20000;
  /// Memory cap for the cached per-column Gram matrices of the closed form.
  double gram_cache_bytes = 2.5e9;
  int cgls_iters = 3;
};

template <class Scalar>
struct RunOptions {
  SpectralOptions spectral;
  LsOptions ls;
  /// Reference signal for the error trace; no errors are traced when null.
  const Mat<Scalar>* truth = nullptr;
  /// Stop once the traced error falls below this value (0 disables).
  double stop_below = 0.0;
};

/// Monotonic stopwatch that records (iteration, error, elapsed) points. The
/// clock is paused while the error itself is computed.
template <class Scalar>
class Tracer {
 public:
  Tracer(const Mat<Scalar>* truth, double stop_below);

  /// Appends a point for `x_hat`; returns true when the stop level is reached.
  bool record(int iteration, const Mat<Scalar>& x_hat, std::vector<TracePoint>& trace);
  double elapsed() const;

 private:
  using Clock = std::chrono::steady_clock;
  const Mat<Scalar>* truth_;
  double stop_below_;
  Clock::time_point start_;
  Clock::duration paused_{};
};

// ---------------------------------------------------------------------------
// Spectral initialization

/// y(i,k) * 1{y(i,k) <= 9 * mean_i y(i,k)}. Negative (noisy) entries follow
/// the same rule and are kept with their sign.
RealMat truncation_weights(const RealMat& y);

/// v -> (1/mq) sum_{i,k} w(i,k) a_{i,k} a_{i,k}' v with truncated weights.
/// The dense matrix is attached when n <= dense_threshold.
template <class Scalar>
SymmetricOperator<Scalar> build_YU(const Ensemble<Scalar>& ens, const RealMat& y,
                                   Index dense_threshold = 2000);

/// 1-based argmax_j (lambda_j - lambda_{j+1}); ties go to the smallest j.
Index estimate_rank_gap(const RealVec& eigvals);

struct ThresholdRank {
  Index rank = 0;
  bool no_signal = true;
};

/// Number of j with lambda_j - lambda_last >= 0.25 * lambda_min. The
/// qualifying indices form a prefix of the descending list, so this is also
/// the last qualifying index. `eigvals` must end with the smallest eigenvalue.
ThresholdRank estimate_rank_threshold(const RealVec& eigvals, double lambda_min);

/// Subspace from the top eigenvectors of Y_U, then per column the top
/// eigenvector of (A_k' U)' diag(y_k) (A_k' U) / m scaled by the root-mean
/// measurement. With `fresh`, the per-column step uses that part instead.
template <class Scalar>
Estimate<Scalar> lrpr_init(const Ensemble<Scalar>& ens, const RealMat& y, const RankRule& rank,
                           const SpectralOptions& opts = {},
                           const MeasurementPart<Scalar>* fresh = nullptr);

struct ColumnInit {
  bool degenerate = false;
};

/// Truncated spectral estimate of one column: top eigenvector of
/// sum_i w_i a_i a_i' scaled by sqrt(mean_i y_i).
template <class Scalar>
Vec<Scalar> twf_init(const Ensemble<Scalar>& ens, Index k, const Eigen::Ref<const RealVec>& y_k,
                     const SpectralOptions& opts = {}, ColumnInit* info = nullptr);

/// twf_init on every column.
template <class Scalar>
Estimate<Scalar> twf_init_all(const Ensemble<Scalar>& ens, const RealMat& y,
                              const SpectralOptions& opts = {});

/// twf_init_all followed by rank-r truncated SVD.
template <class Scalar>
Estimate<Scalar> twfproj_init(const Ensemble<Scalar>& ens, const RealMat& y, Index r,
                              const SpectralOptions& opts = {});

// ---------------------------------------------------------------------------
// Gradient iterations

/// One truncated Poisson-likelihood gradient step on column k:
/// x + (2 step/m) sum_i (y_i - |z_i|^2) / conj(z_i) a_i over the kept events,
/// with z = A_k' x. Terms with |z_i| < 1e-14 ||x|| are dropped.
template <class Scalar>
Vec<Scalar> twf_step(const Ensemble<Scalar>& ens, Index k, const Eigen::Ref<const Vec<Scalar>>& x,
                     const Eigen::Ref<const RealVec>& y_k, const TwfParams& p);

/// Same step given z = A_k' x and a way to apply A_k.
template <class Scalar>
Vec<Scalar> twf_step_from(const Vec<Scalar>& x, const Vec<Scalar>& z,
                          const Eigen::Ref<const RealVec>& y_k, const TwfParams& p,
                          const std::function<Vec<Scalar>(const Vec<Scalar>&)>& adjoint);

enum class InitKind { Lrpr, Twf, TwfProj };

std::string to_string(InitKind kind);

/// Column-wise gradient iterations from `start` (no rank coupling).
template <class Scalar>
Estimate<Scalar> iterate_twf(const Ensemble<Scalar>& ens, const RealMat& y, Estimate<Scalar> start,
                             const TwfParams& p, Tracer<Scalar>& tracer);

/// Gradient sweep followed by rank-r projection, repeated.
template <class Scalar>
Estimate<Scalar> iterate_projected_twf(const Ensemble<Scalar>& ens, const RealMat& y,
                                       Estimate<Scalar> start, Index r, const TwfParams& p,
                                       Tracer<Scalar>& tracer);

/// Gradient iterations initialized by LRPR-init (Lrpr) or TWF-init (Twf).
template <class Scalar>
Estimate<Scalar> run_lrpr_twf(const Ensemble<Scalar>& ens, const RealMat& y, const TwfParams& p,
                              InitKind init, const RankRule& rank,
                              const RunOptions<Scalar>& opts = {});

/// Projected gradient iterations initialized by LRPR-init (Lrpr) or
/// TWFproj-init (TwfProj). The rank is the init's r_hat.
template <class Scalar>
Estimate<Scalar> run_lrpr1(const Ensemble<Scalar>& ens, const RealMat& y, const TwfParams& p,
                           InitKind init, const RankRule& rank,
                           const RunOptions<Scalar>& opts = {});

// ---------------------------------------------------------------------------
// Alternating minimization

/// phase(A_k' U b_k) for every column, m x q, with phase(0) = 1.
template <class Scalar>
Mat<Scalar> phase_step(const Ensemble<Scalar>& ens, const Mat<Scalar>& U, const Mat<Scalar>& B);

/// Unit-modulus phases of a vector, phase(0) = 1.
template <class Scalar>
Vec<Scalar> phase_of(const Vec<Scalar>& z);

/// argmin_U sum_k || C_k sqrt(y_k) - A_k' U b_k ||^2. Closed form through the
/// normal equations when small enough, otherwise `ls.cgls_iters` CGLS
/// iterations warm-started at `warm` (if given). Not orthonormalized.
template <class Scalar>
Mat<Scalar> ls_update_U(const Ensemble<Scalar>& ens, const Mat<Scalar>& phases, const RealMat& y,
                        const Mat<Scalar>& B, const LsOptions& ls = {},
                        const Mat<Scalar>* warm = nullptr);

/// argmin_b || C_k sqrt(y_k) - A_k' U b ||.
template <class Scalar>
Vec<Scalar> ls_update_b(const Ensemble<Scalar>& ens, Index k, const Eigen::Ref<const Vec<Scalar>>& phases_k,
                        const Eigen::Ref<const RealVec>& y_k, const Mat<Scalar>& U);

/// Keeps per-column Gram matrices A_k A_k' between U updates.
template <class Scalar>
class AltMinSolver {
 public:
  AltMinSolver(const Ensemble<Scalar>& ens, const RealMat& y, LsOptions ls = {});

  /// One round: phases, U by least squares then QR, B column by column.
  void round(Mat<Scalar>& U, Mat<Scalar>& B);

  Mat<Scalar> update_U(const Mat<Scalar>& phases, const Mat<Scalar>& B, const Mat<Scalar>* warm);

 private:
  bool use_dense(Index r) const;
  void build_grams();

  const Ensemble<Scalar>& ens_;
  RealMat sqrt_y_;
  LsOptions ls_;
  std::vector<std::shared_ptr<const Mat<Scalar>>> grams_;
};

/// LRPR-init followed by `iterations` alternating-minimization rounds.
template <class Scalar>
Estimate<Scalar> run_lrpr2(const Ensemble<Scalar>& ens, const RealMat& y, int iterations,
                           const RankRule& rank, const RunOptions<Scalar>& opts = {});

}  // namespace lrpr
