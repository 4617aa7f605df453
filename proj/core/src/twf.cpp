#include <cmath>

#include "lrpr/algorithms.hpp"
#include "lrpr/errors.hpp"
#include "lrpr/metrics.hpp"

namespace lrpr {

std::string to_string(EventRule rule) {
  return rule == EventRule::Union ? "union" : "intersection";
}

EventRule parse_event_rule(const std::string& text) {
  if (text == "intersection") return EventRule::Intersection;
  if (text == "union") return EventRule::Union;
  throw ConfigurationError("unknown truncation event rule '" + text + "' (intersection|union)");
}

std::string to_string(InitKind kind) {
  switch (kind) {
    case InitKind::Lrpr: return "lrpr";
    case InitKind::Twf: return "twf";
    case InitKind::TwfProj: return "twfproj";
  }
  return "unknown";
}

void TwfParams::validate() const {
  if (!(step >= 0.0) || !std::isfinite(step)) throw ConfigurationError("twf step must be >= 0");
  if (!(alpha_lb > 0.0 && alpha_lb < alpha_ub)) {
    throw ConfigurationError("twf truncation bounds need 0 < alpha_lb < alpha_ub");
  }
  if (!(alpha_h > 0.0)) throw ConfigurationError("twf alpha_h must be > 0");
  if (iterations < 0) throw ConfigurationError("twf iteration count must be >= 0");
}

RankRule RankRule::known(Index r) {
  RankRule rule;
  rule.mode = RankMode::Known;
  rule.r = r;
  return rule;
}

RankRule RankRule::gap(Index max_rank) {
  RankRule rule;
  rule.mode = RankMode::Gap;
  rule.max_rank = max_rank;
  return rule;
}

RankRule RankRule::threshold(double lambda_min, Index max_rank) {
  RankRule rule;
  rule.mode = RankMode::Threshold;
  rule.lambda_min = lambda_min;
  rule.max_rank = max_rank;
  return rule;
}

// ---------------------------------------------------------------------------
// Tracer

template <class Scalar>
Tracer<Scalar>::Tracer(const Mat<Scalar>* truth, double stop_below)
    : truth_(truth), stop_below_(stop_below), start_(Clock::now()) {}

template <class Scalar>
double Tracer<Scalar>::elapsed() const {
  return std::chrono::duration<double>(Clock::now() - start_ - paused_).count();
}

template <class Scalar>
bool Tracer<Scalar>::record(int iteration, const Mat<Scalar>& x_hat, std::vector<TracePoint>& trace) {
  TracePoint point;
  point.iteration = iteration;
  point.elapsed_seconds = elapsed();
  const auto pause = Clock::now();
  if (truth_) point.norm_err = norm_err(*truth_, x_hat);
  paused_ += Clock::now() - pause;
  trace.push_back(point);
  return truth_ && stop_below_ > 0.0 && point.norm_err < stop_below_;
}

// ---------------------------------------------------------------------------
// Gradient step

template <class Scalar>
Vec<Scalar> twf_step_from(const Vec<Scalar>& x, const Vec<Scalar>& z,
                          const Eigen::Ref<const RealVec>& y_k, const TwfParams& p,
                          const std::function<Vec<Scalar>(const Vec<Scalar>&)>& adjoint) {
  if (z.size() != y_k.size()) throw DimensionError("twf_step: measurement length mismatch");
  if (!x.allFinite() || !z.allFinite()) throw NumericalError("twf_step: non-finite iterate");
  const double norm = x.norm();
  if (norm == 0.0 || p.step == 0.0) return x;

  const Index m = z.size();
  RealVec residual(m);
  for (Index i = 0; i < m; ++i) residual(i) = y_k(i) - std::norm(z(i));
  const double mean_abs = residual.cwiseAbs().mean();

  Vec<Scalar> c = Vec<Scalar>::Zero(m);
  for (Index i = 0; i < m; ++i) {
    const double mag = std::abs(z(i));
    if (mag < 1e-14 * norm) continue;
    const double ratio = mag / norm;
    const bool e1 = p.alpha_lb <= ratio && ratio <= p.alpha_ub;
    const bool e2 = std::abs(residual(i)) <= p.alpha_h * mean_abs * ratio;
    const bool keep = p.events == EventRule::Union ? (e1 || e2) : (e1 && e2);
    if (keep) c(i) = residual(i) / Eigen::numext::conj(z(i));
  }
  Vec<Scalar> out = x + (2.0 * p.step / static_cast<double>(m)) * adjoint(c);
  if (!out.allFinite()) throw NumericalError("twf_step: step produced NaN/Inf");
  return out;
}

template <class Scalar>
Vec<Scalar> twf_step(const Ensemble<Scalar>& ens, Index k, const Eigen::Ref<const Vec<Scalar>>& x,
                     const Eigen::Ref<const RealVec>& y_k, const TwfParams& p) {
  if (x.size() != ens.dim()) throw DimensionError("twf_step: iterate length mismatch");
  const Vec<Scalar> xv = x;
  const Vec<Scalar> z = ens.forward(k, xv);
  return twf_step_from<Scalar>(xv, z, y_k, p, [&ens, k](const Vec<Scalar>& c) -> Vec<Scalar> {
    return ens.adjoint(k, c);
  });
}

namespace {

template <class Scalar>
void sweep(const Ensemble<Scalar>& ens, const RealMat& y, Mat<Scalar>& x, const TwfParams& p) {
  for (Index k = 0; k < ens.columns(); ++k) {
    x.col(k) = twf_step<Scalar>(ens, k, x.col(k), y.col(k), p);
  }
}

template <class Scalar>
void check_run(const Ensemble<Scalar>& ens, const RealMat& y, const Estimate<Scalar>& start,
               const TwfParams& p) {
  p.validate();
  if (y.rows() != ens.rows() || y.cols() != ens.columns()) {
    throw DimensionError("gradient iterations: measurements do not match the ensemble");
  }
  if (start.X_hat.rows() != ens.dim() || start.X_hat.cols() != ens.columns()) {
    throw DimensionError("gradient iterations: starting point has the wrong shape");
  }
}

template <class Scalar>
Estimate<Scalar> initialize(const Ensemble<Scalar>& ens, const RealMat& y, InitKind init,
                            const RankRule& rank, const SpectralOptions& opts) {
  switch (init) {
    case InitKind::Lrpr: return lrpr_init(ens, y, rank, opts);
    case InitKind::Twf: return twf_init_all(ens, y, opts);
    case InitKind::TwfProj:
      if (rank.mode != RankMode::Known) {
        throw ConfigurationError("TWFproj initialization needs a known rank");
      }
      return twfproj_init(ens, y, rank.r, opts);
  }
  throw ConfigurationError("unknown initialization");
}

}  // namespace

template <class Scalar>
Estimate<Scalar> iterate_twf(const Ensemble<Scalar>& ens, const RealMat& y, Estimate<Scalar> est,
                             const TwfParams& p, Tracer<Scalar>& tracer) {
  check_run(ens, y, est, p);
  if (p.iterations > 0) {
    // Column-wise iterates leave the factored form.
    est.U_hat.resize(ens.dim(), 0);
    est.B_hat.resize(0, ens.columns());
  }
  for (int t = 1; t <= p.iterations; ++t) {
    sweep(ens, y, est.X_hat, p);
    if (tracer.record(t, est.X_hat, est.trace)) break;
  }
  return est;
}

template <class Scalar>
Estimate<Scalar> iterate_projected_twf(const Ensemble<Scalar>& ens, const RealMat& y,
                                       Estimate<Scalar> est, Index r, const TwfParams& p,
                                       Tracer<Scalar>& tracer) {
  check_run(ens, y, est, p);
  if (r < 1 || r > std::min(ens.dim(), ens.columns())) {
    throw DimensionError("projected iterations: rank must be in [1, min(n, q)]");
  }
  for (int t = 1; t <= p.iterations; ++t) {
    sweep(ens, y, est.X_hat, p);
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
    if (tracer.record(t, est.X_hat, est.trace)) break;
  }
  return est;
}

template <class Scalar>
Estimate<Scalar> run_lrpr_twf(const Ensemble<Scalar>& ens, const RealMat& y, const TwfParams& p,
                              InitKind init, const RankRule& rank, const RunOptions<Scalar>& opts) {
  p.validate();
  Tracer<Scalar> tracer(opts.truth, opts.stop_below);
  Estimate<Scalar> est = initialize(ens, y, init, rank, opts.spectral);
  if (tracer.record(0, est.X_hat, est.trace)) return est;
  return iterate_twf(ens, y, std::move(est), p, tracer);
}

template <class Scalar>
Estimate<Scalar> run_lrpr1(const Ensemble<Scalar>& ens, const RealMat& y, const TwfParams& p,
                           InitKind init, const RankRule& rank, const RunOptions<Scalar>& opts) {
  p.validate();
  if (init == InitKind::Twf) {
    throw ConfigurationError("projected iterations start from a rank-r init (lrpr or twfproj)");
  }
  Tracer<Scalar> tracer(opts.truth, opts.stop_below);
  Estimate<Scalar> est = initialize(ens, y, init, rank, opts.spectral);
  if (tracer.record(0, est.X_hat, est.trace)) return est;
  const Index r = est.r_hat;
  return iterate_projected_twf(ens, y, std::move(est), r, p, tracer);
}

#define LRPR_INSTANTIATE_TWF(S)                                                                  \
  template class Tracer<S>;                                                                      \
  template Vec<S> twf_step_from<S>(const Vec<S>&, const Vec<S>&, const Eigen::Ref<const RealVec>&, \
                                   const TwfParams&, const std::function<Vec<S>(const Vec<S>&)>&); \
  template Vec<S> twf_step<S>(const Ensemble<S>&, Index, const Eigen::Ref<const Vec<S>>&,         \
                              const Eigen::Ref<const RealVec>&, const TwfParams&);                \
  template Estimate<S> iterate_twf<S>(const Ensemble<S>&, const RealMat&, Estimate<S>,           \
                                      const TwfParams&, Tracer<S>&);                             \
  template Estimate<S> iterate_projected_twf<S>(const Ensemble<S>&, const RealMat&, Estimate<S>, \
                                                Index, const TwfParams&, Tracer<S>&);            \
  template Estimate<S> run_lrpr_twf<S>(const Ensemble<S>&, const RealMat&, const TwfParams&,     \
                                       InitKind, const RankRule&, const RunOptions<S>&);         \
  template Estimate<S> run_lrpr1<S>(const Ensemble<S>&, const RealMat&, const TwfParams&,        \
                                    InitKind, const RankRule&, const RunOptions<S>&);

LRPR_INSTANTIATE_TWF(double)
LRPR_INSTANTIATE_TWF(cplx)

}  // namespace lrpr
