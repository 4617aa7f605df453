#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include <gtest/gtest.h>

#include "lrpr/measurement.hpp"
#include "lrpr/rng.hpp"

namespace lrpr::testing {

template <class Scalar>
Mat<Scalar> random_matrix(Index rows, Index cols, std::uint64_t seed) {
  CounterStream stream(derive_key({seed, 0x7e57}));
  Mat<Scalar> out(rows, cols);
  fill_gaussian<Scalar>(stream, out.data(), out.size());
  return out;
}

template <class Scalar>
Vec<Scalar> random_vector(Index n, std::uint64_t seed) {
  return random_matrix<Scalar>(n, 1, seed).col(0);
}

/// Per-column ensemble over explicitly given row blocks.
template <class Scalar>
std::shared_ptr<const Ensemble<Scalar>> ensemble_from(const std::vector<Mat<Scalar>>& blocks) {
  std::vector<std::shared_ptr<const Mat<Scalar>>> handles;
  for (const auto& b : blocks) handles.push_back(std::make_shared<const Mat<Scalar>>(b));
  const EnsembleKind kind = is_complex_v<Scalar> ? EnsembleKind::GaussianComplex : EnsembleKind::GaussianReal;
  const Index n = blocks.front().cols();
  const Index m = blocks.front().rows();
  return std::make_shared<GaussianEnsemble<Scalar>>(kind, n, static_cast<Index>(blocks.size()), m,
                                                    std::move(handles));
}

template <class Scalar>
std::shared_ptr<const Ensemble<Scalar>> gaussian(Index n, Index m, Index q, std::uint64_t seed,
                                                 Sharing sharing = Sharing::PerColumn) {
  EnsembleSpec spec;
  spec.kind = is_complex_v<Scalar> ? EnsembleKind::GaussianComplex : EnsembleKind::GaussianReal;
  spec.n = n;
  spec.m = m;
  spec.q = q;
  spec.sharing = sharing;
  spec.seed = seed;
  return gen_ensemble<Scalar>(spec);
}

/// Orthonormal basis of an n x r Gaussian matrix.
template <class Scalar>
Mat<Scalar> random_basis(Index n, Index r, std::uint64_t seed) {
  Eigen::HouseholderQR<Mat<Scalar>> qr(random_matrix<Scalar>(n, r, seed));
  return qr.householderQ() * Mat<Scalar>::Identity(n, r);
}

}  // namespace lrpr::testing
