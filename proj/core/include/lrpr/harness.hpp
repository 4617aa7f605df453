#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "lrpr/algorithms.hpp"
#include "lrpr/measurement.hpp"

namespace lrpr {

// ---------------------------------------------------------------------------
// Configuration

enum class AlgorithmFamily {
  LrprInit,     // spectral init only
  TwfInit,      // column-wise truncated spectral init
  TwfProjInit,  // column-wise init + rank-r projection
  LrprTwf,      // gradient iterations from the LRPR init
  Twf,          // gradient iterations from the column-wise init
  TwfProj,      // projected iterations from the projected init
  Lrpr1,        // projected iterations from the LRPR init
  Lrpr2,        // alternating minimization from the LRPR init
};

/// One entry of the algorithm list, e.g. "lrpr-init:gap" or "lrpr2".
/// Recognized modifiers: known, gap, threshold (rank rule), same (shared
/// measurement vectors), partitioned (fresh rows for the coefficient step).
struct AlgorithmSpec {
  std::string label;
  AlgorithmFamily family = AlgorithmFamily::LrprInit;
  std::optional<RankMode> rank_mode;
  bool same = false;
  bool partitioned = false;

  static AlgorithmSpec parse(const std::string& text);
  bool iterative() const;
};

struct ExperimentConfig {
  Index n = 100;
  Index r = 2;
  std::vector<Index> q = {100};
  std::vector<double> m_over_n = {1.0};
  Field field = Field::Real;
  /// "gaussian" or "cdp"; cdp needs a complex field and cdp_n1 * cdp_n2 = n.
  std::string ensemble = "gaussian";
  Index cdp_n1 = 0;
  Index cdp_n2 = 0;
  Sharing sharing = Sharing::PerColumn;
  double noise_halfwidth = 0.0;
  int trials = 1;
  std::vector<AlgorithmSpec> algorithms;
  RankMode rank_mode = RankMode::Known;
  /// Threshold rule lower bound; when unset the truth's smallest signal
  /// eigenvalue is used.
  std::optional<double> lambda_min;
  Index max_rank = 10;
  /// Fresh rows per column for partitioned runs, as a multiple of n.
  double fresh_over_n = 0.0;
  TwfParams twf;
  int power_iters = 50;
  Index dense_threshold = 2000;
  Index ls_dense_unknowns = 20000;
  int cgls_iters = 3;
  double stop_below = 0.0;
  bool record_traces = false;
  std::uint64_t seed = 0;
  int threads = 0;  // 0: hardware concurrency
  bool timing_mode = false;
  std::string out = "out";

  /// Parses a flat JSON object; unknown keys are errors.
  static ExperimentConfig parse(const std::string& json_text);
  static ExperimentConfig load(const std::filesystem::path& path);
  void validate() const;
  /// Rows per column for a grid value of m/n.
  Index rows_for(double ratio) const;
  int effective_threads() const;
  std::string to_json() const;
};

// ---------------------------------------------------------------------------
// Results

struct TrialRecord {
  std::size_t cell = 0;
  double m_over_n = 0.0;
  Index q = 0;
  std::string algorithm;
  int trial = 0;
  double norm_err = 0.0;
  double se = 0.0;
  Index r_hat = 0;
  /// Set only for algorithms that estimate the rank.
  std::optional<bool> rank_correct;
  double seconds = 0.0;
  bool failed = false;
  std::string error;
  std::vector<TracePoint> trace;
};

struct CellSummary {
  double m_over_n = 0.0;
  Index q = 0;
  std::string algorithm;
  int trials = 0;
  double mean_norm_err = 0.0;
  double mean_se = 0.0;
  /// NaN when the algorithm does not estimate the rank.
  double pr_rank_correct = 0.0;
  double mean_seconds = 0.0;
  int fail_count = 0;
};

struct ExperimentReport {
  std::string config_json;
  std::vector<CellSummary> cells;
  std::vector<TrialRecord> records;

  const CellSummary& cell(double m_over_n, Index q, const std::string& algorithm) const;
  /// Records of one cell and algorithm, in trial order.
  std::vector<const TrialRecord*> trials_of(double m_over_n, Index q,
                                            const std::string& algorithm) const;
};

/// Means over successful trials; grid and algorithm order follow the records.
std::vector<CellSummary> aggregate(const std::vector<TrialRecord>& records);

/// Runs the whole grid. When `trials_path` is given, per-trial records are
/// written there (JSON lines) before aggregation.
ExperimentReport run_experiment(const ExperimentConfig& cfg,
                                const std::optional<std::filesystem::path>& trials_path = {});

// ---------------------------------------------------------------------------
// Output

/// Writes `<stem>.csv` (one row per cell) and `<stem>.json` (cells, records
/// and traces). Returns the CSV path.
std::filesystem::path emit_table(const ExperimentReport& report, const std::filesystem::path& stem);
std::string format_csv(const ExperimentReport& report);
std::string report_to_json(const ExperimentReport& report);
ExperimentReport report_from_json(const std::string& text);
ExperimentReport read_report_json(const std::filesystem::path& path);

void write_trials_jsonl(const std::vector<TrialRecord>& records, const std::filesystem::path& path);
std::vector<TrialRecord> read_trials_jsonl(const std::filesystem::path& path);

/// Trace rows (algorithm, trial, iteration, elapsed_seconds, norm_err) of one
/// grid cell.
std::string format_curves(const ExperimentReport& report, double m_over_n, Index q);
/// One curves file per grid cell, named `<stem>_m<ratio>_q<q>.csv`.
std::vector<std::filesystem::path> emit_timing_curves(const ExperimentReport& report,
                                                      const std::filesystem::path& stem);

/// Human-readable mean NormErr grid, algorithms as columns.
std::string format_table(const ExperimentReport& report);

void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Instance files
//
// Matrices are stored as raw little-endian float64 in column-major order;
// complex matrices interleave (re, im) per entry. Ensembles are stored as q
// consecutive m x n blocks (Gaussian) or n x L mask blocks (CDP). A JSON
// sidecar `instance.json` records dimensions, field, kind and seed.

struct InstanceInfo {
  Index n = 0;
  Index q = 0;
  Index r = 0;
  Index m = 0;
  Field field = Field::Real;
  EnsembleKind kind = EnsembleKind::GaussianReal;
  Sharing sharing = Sharing::PerColumn;
  std::optional<CdpDims> cdp;
  double noise_halfwidth = 0.0;
  std::uint64_t seed = 0;
};

struct Instance {
  InstanceInfo info;
  RealMat U;
  RealMat B;
  RealMat X;
  RealMat y;
  /// Ensemble storage, real or complex (the unused one is empty).
  std::vector<RealMat> real_blocks;
  std::vector<Mat<cplx>> complex_blocks;
};

/// Generates the first grid cell's instance of `cfg` and writes it to `dir`.
InstanceInfo write_instance(const ExperimentConfig& cfg, const std::filesystem::path& dir);
Instance read_instance(const std::filesystem::path& dir);

void write_matrix(const std::filesystem::path& path, const RealMat& m);
void write_matrix(const std::filesystem::path& path, const Mat<cplx>& m);
RealMat read_real_matrix(const std::filesystem::path& path, Index rows, Index cols);
Mat<cplx> read_complex_matrix(const std::filesystem::path& path, Index rows, Index cols);

}  // namespace lrpr
