#include <mutex>

#include <fftw3.h>

#include "lrpr/errors.hpp"
#include "lrpr/measurement.hpp"

namespace lrpr {

namespace {
// FFTW planning and plan destruction are not thread-safe; execution is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

fftw_complex* as_fftw(cplx* p) { return reinterpret_cast<fftw_complex*>(p); }
}  // namespace

struct CdpEnsemble::Plans {
  fftw_plan forward = nullptr;
  fftw_plan backward = nullptr;

  Plans(Index n1, Index n2) {
    std::lock_guard<std::mutex> lock(planner_mutex());
    const auto n = static_cast<std::size_t>(n1 * n2);
    auto* in = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n));
    auto* out = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n));
    const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
    forward = fftw_plan_dft_2d(static_cast<int>(n1), static_cast<int>(n2), in, out, FFTW_FORWARD, flags);
    backward = fftw_plan_dft_2d(static_cast<int>(n1), static_cast<int>(n2), in, out, FFTW_BACKWARD, flags);
    fftw_free(in);
    fftw_free(out);
    if (!forward || !backward) throw NumericalError("FFTW failed to create a 2-D plan");
  }

  ~Plans() {
    std::lock_guard<std::mutex> lock(planner_mutex());
    if (forward) fftw_destroy_plan(forward);
    if (backward) fftw_destroy_plan(backward);
  }

  Plans(const Plans&) = delete;
  Plans& operator=(const Plans&) = delete;
};

CdpEnsemble::CdpEnsemble(CdpDims dims, Index q, Index shared_from,
                         std::vector<std::shared_ptr<const Mat<cplx>>> masks)
    : Ensemble<cplx>(EnsembleKind::Cdp, dims.n1 * dims.n2, dims.n1 * dims.n2 * dims.masks, q,
                     shared_from),
      dims_(dims),
      masks_(std::move(masks)),
      plans_(std::make_shared<const Plans>(dims.n1, dims.n2)) {
  if (static_cast<Index>(masks_.size()) != q) {
    throw DimensionError("CdpEnsemble: expected one mask stack per column");
  }
  for (const auto& m : masks_) {
    if (!m || m->rows() != dim() || m->cols() != dims.masks) {
      throw DimensionError("CdpEnsemble: mask stack has the wrong shape");
    }
  }
}

CdpEnsemble::~CdpEnsemble() = default;

Mat<cplx> CdpEnsemble::forward(Index k, const Eigen::Ref<const Mat<cplx>>& x) const {
  check_column(k);
  if (x.rows() != dim()) throw DimensionError("cdp forward: operand has wrong row count");
  const Index n = dim();
  const Mat<cplx>& mask = *masks_[k];
  Mat<cplx> out(rows(), x.cols());
  Vec<cplx> buffer(n);
  for (Index p = 0; p < x.cols(); ++p) {
    for (Index l = 0; l < dims_.masks; ++l) {
      buffer = mask.col(l).cwiseProduct(x.col(p));
      fftw_execute_dft(plans_->forward, as_fftw(buffer.data()), as_fftw(&out(l * n, p)));
    }
  }
  return out;
}

Mat<cplx> CdpEnsemble::adjoint(Index k, const Eigen::Ref<const Mat<cplx>>& z) const {
  check_column(k);
  if (z.rows() != rows()) throw DimensionError("cdp adjoint: operand has wrong row count");
  const Index n = dim();
  const Mat<cplx>& mask = *masks_[k];
  Mat<cplx> out = Mat<cplx>::Zero(n, z.cols());
  Vec<cplx> in(n);
  Vec<cplx> buffer(n);
  for (Index p = 0; p < z.cols(); ++p) {
    for (Index l = 0; l < dims_.masks; ++l) {
      in = z.col(p).segment(l * n, n);
      fftw_execute_dft(plans_->backward, as_fftw(in.data()), as_fftw(buffer.data()));
      out.col(p) += mask.col(l).conjugate().cwiseProduct(buffer);
    }
  }
  return out;
}

std::shared_ptr<const Ensemble<cplx>> CdpEnsemble::slice_rows(Index begin, Index count) const {
  const Index n = dim();
  if (begin < 0 || count < 1 || begin + count > rows() || begin % n != 0 || count % n != 0) {
    throw PartitionError("cdp slice_rows: CDP rows can only be split on whole masks (multiples of n)");
  }
  const Index first = begin / n;
  const Index masks = count / n;
  std::vector<std::shared_ptr<const Mat<cplx>>> out(masks_.size());
  for (std::size_t k = 0; k < masks_.size(); ++k) {
    if (k > 0 && masks_[k] == masks_[k - 1]) {
      out[k] = out[k - 1];
    } else {
      out[k] = std::make_shared<const Mat<cplx>>(masks_[k]->middleCols(first, masks));
    }
  }
  CdpDims dims = dims_;
  dims.masks = masks;
  return std::make_shared<CdpEnsemble>(dims, columns(), shared_from() == 0 ? 0 : count,
                                       std::move(out));
}

}  // namespace lrpr
