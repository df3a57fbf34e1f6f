#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dml/config.hpp"
#include "dml/data.hpp"
#include "dml/eval.hpp"
#include "dml/trainer.hpp"

namespace dml {

enum class SweepAxis { batch_size, embedding_dim, alpha, delta, noise_rate, loss_kind };

std::string_view to_string(SweepAxis axis);
SweepAxis parse_sweep_axis(std::string_view name);

/// One training run: train + evaluate. Failures are captured, not thrown.
struct RunOutcome {
  bool ok = false;
  std::string error_category;
  std::string error;
  std::vector<MetricsRow> log;
  double final_recall1 = 0.0;
  std::optional<std::size_t> epochs_to_threshold;
  ComplexityCounter counters;
  double wall_time_seconds = 0.0;
  SamplerSpec sampler;
};

/// Trains `config` on `dataset` and summarises the run.
RunOutcome run_single(const RunConfig& config, const Dataset& dataset);

struct SweepSpec {
  SweepAxis axis = SweepAxis::alpha;
  std::vector<std::string> values;
  RunConfig base;           // base.seed is the first seed
  std::size_t repeats = 1;  // seeds base.seed .. base.seed + repeats - 1

  /// Throws InvalidSpecError when a value is outside its axis' range.
  void validate() const;
};

/// The configuration of one sweep cell.
RunConfig sweep_cell_config(const SweepSpec& spec, std::size_t value_index,
                            std::size_t repeat);

struct SweepCell {
  std::size_t value_index = 0;
  std::string value;
  std::uint64_t seed = 0;
  RunOutcome outcome;
};

/// Aggregate over the repeats of one value. Epoch statistics count a run that
/// never reaches the threshold as epochs + 1.
struct SweepRow {
  std::string value;
  std::size_t runs = 0;
  std::size_t failed = 0;
  std::size_t reached = 0;
  double recall1_mean = 0.0;
  double recall1_std = 0.0;
  double epochs_to_threshold_mean = 0.0;
  double epochs_to_threshold_std = 0.0;
};

struct SweepResult {
  SweepSpec spec;
  std::vector<SweepCell> cells;
  std::vector<SweepRow> rows;
};

/// Runs every (value, seed) cell, `spec.base.threads` at a time. Cells are
/// keyed by position so the result does not depend on scheduling.
SweepResult run_sweep(const SweepSpec& spec);

struct BenchSpec {
  std::vector<LossKind> methods;
  RunConfig base;
  std::size_t repeats = 5;
};

struct MethodSummary {
  LossKind method = LossKind::proxy_anchor;
  SamplerSpec sampler;
  std::vector<RunOutcome> runs;  // one per seed
  std::vector<std::pair<std::size_t, double>> mean_curve;  // epoch, mean Recall@1
  std::size_t failed = 0;
  std::size_t reached = 0;
  double epochs_to_threshold_mean = 0.0;  // censored at epochs + 1
  double final_recall1_mean = 0.0;
  double final_recall1_std = 0.0;
  double wall_time_total = 0.0;
  std::uint64_t similarity_evals_per_epoch = 0;
  std::uint64_t tuples_per_epoch = 0;
};

struct BenchReport {
  std::vector<std::uint64_t> seeds;
  std::vector<MethodSummary> methods;  // in spec order
  std::vector<std::size_t> ranking;    // indices into methods
  double threshold = 0.0;
};

/// Trains every method on the same per-seed dataset, split and evaluation
/// cadence and ranks them by mean epochs-to-threshold, then by mean final
/// Recall@1.
BenchReport run_convergence_benchmark(const BenchSpec& spec);

std::string render_sweep_cells_csv(const SweepResult& result);
std::string render_sweep_aggregate_csv(const SweepResult& result);
std::string render_sweep_curves_csv(const SweepResult& result);

std::string render_bench_curves_csv(const BenchReport& report);
std::string render_bench_runs_csv(const BenchReport& report);
std::string render_bench_ranking_csv(const BenchReport& report);
std::string render_bench_ranking_table(const BenchReport& report);

}  // namespace dml
