#pragma once

#include <cstdint>

#include "lrpr/harness.hpp"
#include "lrpr/rng.hpp"

namespace lrpr::detail {

// Seed tags of the experiment grid.
inline constexpr std::uint64_t kTruthSeed = 0x5452;
inline constexpr std::uint64_t kEnsembleSeed = 0x454e;
inline constexpr std::uint64_t kNoiseSeed = 0x4e53;
inline constexpr std::uint64_t kSolverSeed = 0x534f;

inline std::uint64_t grid_seed(const ExperimentConfig& cfg, std::uint64_t tag, std::size_t cell,
                               int trial = 0) {
  return derive_key({cfg.seed, tag, static_cast<std::uint64_t>(cell), static_cast<std::uint64_t>(trial)});
}

/// Ensemble spec for one grid cell of `cfg`.
inline EnsembleSpec ensemble_spec(const ExperimentConfig& cfg, Index m, Index q,
                                  std::uint64_t seed, Sharing sharing, Index fresh_rows) {
  EnsembleSpec spec;
  spec.n = cfg.n;
  spec.m = m;
  spec.q = q;
  spec.sharing = sharing;
  spec.seed = seed;
  spec.fresh_rows = fresh_rows;
  if (cfg.ensemble == "cdp") {
    spec.kind = EnsembleKind::Cdp;
    spec.cdp = CdpDims{cfg.cdp_n1, cfg.cdp_n2, m / cfg.n};
  } else {
    spec.kind = cfg.field == Field::Real ? EnsembleKind::GaussianReal : EnsembleKind::GaussianComplex;
  }
  return spec;
}

}  // namespace lrpr::detail
