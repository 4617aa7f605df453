// Kernel timings: spectral matrix, gradient sweeps, CDP transforms, CGLS.

#include <optional>

#include <benchmark/benchmark.h>

#include "lrpr/algorithms.hpp"
#include "lrpr/measurement.hpp"
#include "lrpr/spectral.hpp"

using namespace lrpr;

namespace {

template <class Scalar>
struct Problem {
  GroundTruth truth;
  std::shared_ptr<const Ensemble<Scalar>> ens;
  RealMat y;

  Problem(Index n, Index m, Index q, EnsembleKind kind, std::optional<CdpDims> cdp = {}) {
    truth = gen_low_rank(n, q, 2, 11);
    EnsembleSpec spec;
    spec.kind = kind;
    spec.n = n;
    spec.m = m;
    spec.q = q;
    spec.seed = 12;
    spec.cdp = cdp;
    ens = gen_ensemble<Scalar>(spec);
    y = measure(*ens, truth, 0.0, 13).y;
  }
};

void BM_BuildYU(benchmark::State& state) {
  const Index q = state.range(0);
  Problem<double> p(100, 100, q, EnsembleKind::GaussianReal);
  for (auto _ : state) {
    auto op = build_YU(*p.ens, p.y);
    benchmark::DoNotOptimize(op.dense);
  }
  state.SetItemsProcessed(state.iterations() * q * 100);
}
BENCHMARK(BM_BuildYU)->Arg(100)->Arg(1000)->Unit(benchmark::kMillisecond);

void BM_LrprInit(benchmark::State& state) {
  Problem<double> p(100, 100, state.range(0), EnsembleKind::GaussianReal);
  for (auto _ : state) benchmark::DoNotOptimize(lrpr_init(*p.ens, p.y, RankRule::known(2)).X_hat);
}
BENCHMARK(BM_LrprInit)->Arg(100)->Arg(1000)->Unit(benchmark::kMillisecond);

void BM_TwfSweep(benchmark::State& state) {
  const Index q = 100;
  Problem<cplx> p(100, 100 * state.range(0), q, EnsembleKind::GaussianComplex);
  const Mat<cplx> x = p.truth.signal<cplx>() + 0.1 * Mat<cplx>::Ones(100, q);
  const TwfParams params;
  for (auto _ : state) {
    for (Index k = 0; k < q; ++k) {
      benchmark::DoNotOptimize(twf_step<cplx>(*p.ens, k, x.col(k), p.y.col(k), params));
    }
  }
  state.SetItemsProcessed(state.iterations() * q);
}
BENCHMARK(BM_TwfSweep)->Arg(1)->Arg(8)->Unit(benchmark::kMillisecond);

void BM_CdpForward(benchmark::State& state) {
  const Index side = state.range(0);
  const Index n = side * side;
  Problem<cplx> p(n, 3 * n, 4, EnsembleKind::Cdp, CdpDims{side, side, 3});
  const Mat<cplx> x = p.truth.signal<cplx>();
  for (auto _ : state) benchmark::DoNotOptimize(p.ens->forward(0, x.col(0)));
  state.SetItemsProcessed(state.iterations() * 3 * n);
}
BENCHMARK(BM_CdpForward)->Arg(32)->Arg(128);

void BM_CdpAdjoint(benchmark::State& state) {
  const Index side = state.range(0);
  const Index n = side * side;
  Problem<cplx> p(n, 3 * n, 4, EnsembleKind::Cdp, CdpDims{side, side, 3});
  const Mat<cplx> z = Mat<cplx>::Ones(3 * n, 1);
  for (auto _ : state) benchmark::DoNotOptimize(p.ens->adjoint(0, z));
}
BENCHMARK(BM_CdpAdjoint)->Arg(32)->Arg(128);

void BM_Cgls(benchmark::State& state) {
  const Index rows = 2000, cols = state.range(0);
  const RealMat a = RealMat::Random(rows, cols);
  const RealVec b = RealVec::Random(rows);
  LinearOperator<double> op;
  op.rows = rows;
  op.cols = cols;
  op.forward = [&a](const RealVec& v) -> RealVec { return a * v; };
  op.adjoint = [&a](const RealVec& v) -> RealVec { return a.transpose() * v; };
  for (auto _ : state) benchmark::DoNotOptimize(cgls(op, b, 20, 0.0).x);
}
BENCHMARK(BM_Cgls)->Arg(50)->Arg(200)->Unit(benchmark::kMillisecond);

void BM_AltMinRound(benchmark::State& state) {
  Problem<cplx> p(100, 80, 200, EnsembleKind::GaussianComplex);
  LsOptions ls;
  ls.dense_unknowns = state.range(0) ? 20000 : 0;
  AltMinSolver<cplx> solver(*p.ens, p.y, ls);
  const Estimate<cplx> init = lrpr_init(*p.ens, p.y, RankRule::known(2));
  for (auto _ : state) {
    Mat<cplx> u = init.U_hat;
    Mat<cplx> b = init.B_hat;
    solver.round(u, b);
    benchmark::DoNotOptimize(b);
  }
}
BENCHMARK(BM_AltMinRound)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
