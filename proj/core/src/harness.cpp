#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <limits>
#include <map>
#include <mutex>
#include <thread>

#include "harness_internal.hpp"
#include "lrpr/errors.hpp"
#include "lrpr/harness.hpp"
#include "lrpr/metrics.hpp"

namespace lrpr {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct CellDef {
  double ratio = 0.0;
  Index q = 0;
  Index m = 0;
};

bool uses_rank_rule(AlgorithmFamily f) {
  return f == AlgorithmFamily::LrprInit || f == AlgorithmFamily::LrprTwf ||
         f == AlgorithmFamily::Lrpr1 || f == AlgorithmFamily::Lrpr2;
}

RankRule rank_rule_for(const ExperimentConfig& cfg, const AlgorithmSpec& spec, const GroundTruth& gt) {
  switch (spec.rank_mode.value_or(cfg.rank_mode)) {
    case RankMode::Known: return RankRule::known(cfg.r);
    case RankMode::Gap: return RankRule::gap(cfg.max_rank);
    case RankMode::Threshold:
      return RankRule::threshold(cfg.lambda_min.value_or(gt.min_eigenvalue()), cfg.max_rank);
  }
  return RankRule::known(cfg.r);
}

/// Ensembles and measurements of one trial, built on first use.
template <class Scalar>
class TrialData {
 public:
  TrialData(const ExperimentConfig& cfg, const CellDef& cell, std::size_t cell_index, int trial,
            const GroundTruth& gt)
      : cfg_(cfg), cell_(cell), gt_(gt),
        ens_seed_(detail::grid_seed(cfg, detail::kEnsembleSeed, cell_index, trial)),
        noise_seed_(detail::grid_seed(cfg, detail::kNoiseSeed, cell_index, trial)) {}

  struct Entry {
    std::shared_ptr<const Ensemble<Scalar>> ens;
    RealMat y;
  };

  const Entry& get(bool same, bool partitioned) {
    const int key = (same ? 1 : 0) + (partitioned ? 2 : 0);
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
    const Sharing sharing = same ? Sharing::Shared : cfg_.sharing;
    const Index fresh = partitioned ? cfg_.rows_for(cfg_.fresh_over_n) : 0;
    Entry e;
    e.ens = gen_ensemble<Scalar>(detail::ensemble_spec(cfg_, cell_.m, cell_.q, ens_seed_, sharing, fresh));
    e.y = measure(*e.ens, gt_, cfg_.noise_halfwidth, noise_seed_).y;
    return cache_.emplace(key, std::move(e)).first->second;
  }

 private:
  const ExperimentConfig& cfg_;
  const CellDef& cell_;
  const GroundTruth& gt_;
  std::uint64_t ens_seed_;
  std::uint64_t noise_seed_;
  std::map<int, Entry> cache_;
};

template <class Scalar>
Estimate<Scalar> run_algorithm(const ExperimentConfig& cfg, const AlgorithmSpec& spec,
                               const typename TrialData<Scalar>::Entry& data, const CellDef& cell,
                               const RankRule& rule, const RunOptions<Scalar>& opts) {
  const Ensemble<Scalar>& ens = *data.ens;
  const RealMat& y = data.y;
  auto init_only = [&](auto&& fn) {
    Tracer<Scalar> tracer(opts.truth, 0.0);
    Estimate<Scalar> est = fn();
    tracer.record(0, est.X_hat, est.trace);
    return est;
  };
  switch (spec.family) {
    case AlgorithmFamily::LrprInit:
      return init_only([&] {
        if (!spec.partitioned) return lrpr_init(ens, y, rule, opts.spectral);
        const Index fresh = cfg.rows_for(cfg.fresh_over_n);
        const SplitMeasurements<Scalar> parts = split_measurements(data.ens, y, cell.m, fresh);
        return lrpr_init(*parts.init.ens, parts.init.y, rule, opts.spectral, &parts.fresh);
      });
    case AlgorithmFamily::TwfInit:
      return init_only([&] { return twf_init_all(ens, y, opts.spectral); });
    case AlgorithmFamily::TwfProjInit:
      return init_only([&] { return twfproj_init(ens, y, cfg.r, opts.spectral); });
    case AlgorithmFamily::LrprTwf:
      return run_lrpr_twf(ens, y, cfg.twf, InitKind::Lrpr, rule, opts);
    case AlgorithmFamily::Twf:
      return run_lrpr_twf(ens, y, cfg.twf, InitKind::Twf, rule, opts);
    case AlgorithmFamily::TwfProj:
      return run_lrpr1(ens, y, cfg.twf, InitKind::TwfProj, RankRule::known(cfg.r), opts);
    case AlgorithmFamily::Lrpr1:
      return run_lrpr1(ens, y, cfg.twf, InitKind::Lrpr, rule, opts);
    case AlgorithmFamily::Lrpr2:
      return run_lrpr2(ens, y, cfg.twf.iterations, rule, opts);
  }
  throw ConfigurationError("unknown algorithm family");
}

template <class Scalar>
void run_trial(const ExperimentConfig& cfg, const CellDef& cell, std::size_t cell_index, int trial,
               const GroundTruth& gt, TrialRecord* out) {
  TrialData<Scalar> data(cfg, cell, cell_index, trial, gt);
  const Mat<Scalar> x = gt.signal<Scalar>();
  const Mat<Scalar> u = gt.U.template cast<Scalar>();

  for (std::size_t a = 0; a < cfg.algorithms.size(); ++a) {
    const AlgorithmSpec& spec = cfg.algorithms[a];
    TrialRecord& rec = out[a];
    rec.cell = cell_index;
    rec.m_over_n = cell.ratio;
    rec.q = cell.q;
    rec.algorithm = spec.label;
    rec.trial = trial;

    const bool estimates_rank =
        uses_rank_rule(spec.family) && spec.rank_mode.value_or(cfg.rank_mode) != RankMode::Known;
    try {
      const auto& entry = data.get(spec.same, spec.partitioned);
      RunOptions<Scalar> opts;
      opts.spectral.dense_threshold = cfg.dense_threshold;
      opts.spectral.power_iters = cfg.power_iters;
      opts.spectral.seed = detail::grid_seed(cfg, detail::kSolverSeed, cell_index, trial);
      opts.ls.dense_unknowns = cfg.ls_dense_unknowns;
      opts.ls.cgls_iters = cfg.cgls_iters;
      opts.stop_below = cfg.stop_below;
      if (cfg.record_traces || cfg.stop_below > 0.0) opts.truth = &x;
      const RankRule rule = rank_rule_for(cfg, spec, gt);

      const auto start = std::chrono::steady_clock::now();
      Estimate<Scalar> est = run_algorithm<Scalar>(cfg, spec, entry, cell, rule, opts);
      const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      rec.seconds = opts.truth && !est.trace.empty() ? est.trace.back().elapsed_seconds : wall;

      const ErrorReport rep = evaluate<Scalar>(x, u, est.X_hat, est.U_hat, est.r_hat);
      rec.norm_err = rep.norm_err;
      rec.se = rep.se;
      rec.r_hat = est.r_hat;
      if (estimates_rank) rec.rank_correct = est.r_hat == cfg.r;
      if (cfg.record_traces) rec.trace = std::move(est.trace);
    } catch (const NoSignalError& e) {
      rec.failed = true;
      rec.error = e.what();
      rec.norm_err = rec.se = kNaN;
      rec.r_hat = 0;
      if (estimates_rank) rec.rank_correct = false;
    } catch (const Error& e) {
      rec.failed = true;
      rec.error = e.what();
      rec.norm_err = rec.se = kNaN;
    } catch (const std::bad_alloc&) {
      rec.failed = true;
      rec.error = "out of memory";
      rec.norm_err = rec.se = kNaN;
    }
  }
}

}  // namespace

std::vector<CellSummary> aggregate(const std::vector<TrialRecord>& records) {
  struct Acc {
    CellSummary s;
    int ok = 0;
    int rank_seen = 0;
    int rank_hits = 0;
  };
  std::vector<Acc> accs;
  std::map<std::pair<std::size_t, std::string>, std::size_t> index;
  for (const TrialRecord& rec : records) {
    const auto key = std::make_pair(rec.cell, rec.algorithm);
    auto it = index.find(key);
    if (it == index.end()) {
      it = index.emplace(key, accs.size()).first;
      Acc acc;
      acc.s.m_over_n = rec.m_over_n;
      acc.s.q = rec.q;
      acc.s.algorithm = rec.algorithm;
      accs.push_back(acc);
    }
    Acc& acc = accs[it->second];
    ++acc.s.trials;
    if (rec.rank_correct) {
      ++acc.rank_seen;
      if (*rec.rank_correct) ++acc.rank_hits;
    }
    if (rec.failed) {
      ++acc.s.fail_count;
      continue;
    }
    ++acc.ok;
    acc.s.mean_norm_err += rec.norm_err;
    acc.s.mean_se += rec.se;
    acc.s.mean_seconds += rec.seconds;
  }
  std::vector<CellSummary> out;
  out.reserve(accs.size());
  for (Acc& acc : accs) {
    if (acc.ok > 0) {
      acc.s.mean_norm_err /= acc.ok;
      acc.s.mean_se /= acc.ok;
      acc.s.mean_seconds /= acc.ok;
    } else {
      acc.s.mean_norm_err = acc.s.mean_se = acc.s.mean_seconds = kNaN;
    }
    acc.s.pr_rank_correct =
        acc.rank_seen > 0 ? static_cast<double>(acc.rank_hits) / acc.rank_seen : kNaN;
    out.push_back(acc.s);
  }
  return out;
}

const CellSummary& ExperimentReport::cell(double m_over_n, Index q, const std::string& algorithm) const {
  for (const CellSummary& c : cells) {
    if (std::abs(c.m_over_n - m_over_n) <= 1e-12 && c.q == q && c.algorithm == algorithm) return c;
  }
  throw ConfigurationError("report has no cell (m/n=" + std::to_string(m_over_n) +
                           ", q=" + std::to_string(q) + ", " + algorithm + ")");
}

std::vector<const TrialRecord*> ExperimentReport::trials_of(double m_over_n, Index q,
                                                            const std::string& algorithm) const {
  std::vector<const TrialRecord*> out;
  for (const TrialRecord& r : records) {
    if (std::abs(r.m_over_n - m_over_n) <= 1e-12 && r.q == q && r.algorithm == algorithm) {
      out.push_back(&r);
    }
  }
  return out;
}

ExperimentReport run_experiment(const ExperimentConfig& cfg,
                                const std::optional<std::filesystem::path>& trials_path) {
  cfg.validate();
  std::vector<CellDef> cells;
  for (double ratio : cfg.m_over_n) {
    for (Index q : cfg.q) cells.push_back(CellDef{ratio, q, cfg.rows_for(ratio)});
  }
  std::vector<GroundTruth> truths;
  truths.reserve(cells.size());
  for (std::size_t c = 0; c < cells.size(); ++c) {
    truths.push_back(gen_low_rank(cfg.n, cells[c].q, cfg.r, detail::grid_seed(cfg, detail::kTruthSeed, c)));
  }

  const std::size_t n_alg = cfg.algorithms.size();
  const std::size_t n_trials = static_cast<std::size_t>(cfg.trials);
  const std::size_t n_jobs = cells.size() * n_trials;
  // Slot layout: job (cell, trial) owns algorithms [job * n_alg, job * n_alg + n_alg).
  std::vector<TrialRecord> slots(n_jobs * n_alg);

  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::exception_ptr first_error;
  auto worker = [&] {
    for (;;) {
      const std::size_t job = next.fetch_add(1);
      if (job >= n_jobs) return;
      const std::size_t c = job / n_trials;
      const int t = static_cast<int>(job % n_trials);
      try {
        if (cfg.field == Field::Real) {
          run_trial<double>(cfg, cells[c], c, t, truths[c], &slots[job * n_alg]);
        } else {
          run_trial<cplx>(cfg, cells[c], c, t, truths[c], &slots[job * n_alg]);
        }
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    }
  };
  const int threads = std::min<int>(cfg.effective_threads(), static_cast<int>(n_jobs));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < threads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (first_error) std::rethrow_exception(first_error);

  ExperimentReport report;
  report.config_json = cfg.to_json();
  report.records.reserve(slots.size());
  // Cell-major, then algorithm, then trial.
  for (std::size_t c = 0; c < cells.size(); ++c) {
    for (std::size_t a = 0; a < n_alg; ++a) {
      for (std::size_t t = 0; t < n_trials; ++t) {
        report.records.push_back(std::move(slots[(c * n_trials + t) * n_alg + a]));
      }
    }
  }
  if (trials_path) write_trials_jsonl(report.records, *trials_path);
  report.cells = aggregate(report.records);
  return report;
}

}  // namespace lrpr
