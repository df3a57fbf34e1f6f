#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dml/matrix.hpp"

namespace dml {

/// Cumulative training work. Monotone non-decreasing over a run.
struct ComplexityCounter {
  std::uint64_t similarity_evals_total = 0;
  std::uint64_t tuples_considered_total = 0;
  std::uint64_t batches_processed = 0;

  bool operator==(const ComplexityCounter&) const = default;
};

/// Recall@K under cosine similarity. Gallery items are ranked by similarity
/// descending, ties broken by the lower gallery index. With
/// `self_match_excluded`, query i and gallery i are the same item and that
/// item is removed from query i's ranking.
std::map<std::size_t, double> recall_at_k(const Matrix& query,
                                          const Matrix& gallery,
                                          std::span<const int> query_labels,
                                          std::span<const int> gallery_labels,
                                          std::span<const std::size_t> ks,
                                          bool self_match_excluded);

/// A single metric sampled at logged epochs.
struct MethodCurve {
  std::string method;
  std::vector<std::pair<std::size_t, double>> points;  // (epoch, value)
};

struct ConvergenceEntry {
  std::string method;
  std::optional<std::size_t> epochs_to_threshold;
  double final_value = 0.0;
};

/// First logged epoch whose value reaches `threshold`, or nullopt.
std::optional<std::size_t> epochs_to_threshold(const MethodCurve& curve,
                                               double threshold);

/// One entry per curve, ordered by epochs-to-threshold (never-reached last),
/// then by final value descending, then by input order. Throws
/// InvalidSpecError when the curves do not share their logged epochs.
std::vector<ConvergenceEntry> convergence_summary(
    std::span<const MethodCurve> curves, double threshold);

struct EvalReport {
  std::map<std::size_t, double> recall_at;
  std::map<std::pair<std::string, double>, std::optional<std::size_t>>
      epochs_to_threshold;
  ComplexityCounter counters;
  double wall_time_seconds = 0.0;
};

std::string render_report_csv(const EvalReport& report);
std::string render_report_table(const EvalReport& report);

/// Plain-text table of a convergence summary.
std::string render_convergence_table(std::span<const ConvergenceEntry> entries,
                                     double threshold);

}  // namespace dml
