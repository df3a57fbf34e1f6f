#include "dml/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "dml/errors.hpp"
#include "dml/numkernel.hpp"

namespace dml {

std::map<std::size_t, double> recall_at_k(const Matrix& query,
                                          const Matrix& gallery,
                                          std::span<const int> query_labels,
                                          std::span<const int> gallery_labels,
                                          std::span<const std::size_t> ks,
                                          bool self_match_excluded) {
  if (gallery.rows == 0) throw EmptyGalleryError("gallery is empty");
  if (query.rows == 0) throw EmptyInputError("query set is empty");
  if (query.rows != query_labels.size() || gallery.rows != gallery_labels.size()) {
    throw DimensionMismatchError("label count differs from embedding count");
  }
  if (query.cols != gallery.cols) {
    throw DimensionMismatchError("query and gallery dimensions differ");
  }
  if (self_match_excluded && query.rows != gallery.rows) {
    throw DimensionMismatchError(
        "self-match exclusion requires query and gallery to be the same set");
  }
  const std::size_t candidates = gallery.rows - (self_match_excluded ? 1 : 0);
  if (candidates == 0) throw EmptyGalleryError("no gallery item left after self exclusion");
  for (std::size_t k : ks) {
    if (k < 1 || k > candidates) {
      throw KTooLargeError("K=" + std::to_string(k) + " outside [1, " +
                           std::to_string(candidates) + "]");
    }
  }

  std::map<std::size_t, std::size_t> hits;
  for (std::size_t k : ks) hits[k] = 0;
  std::vector<double> sims(gallery.rows);
  for (std::size_t q = 0; q < query.rows; ++q) {
    for (std::size_t g = 0; g < gallery.rows; ++g) {
      sims[g] = cosine_similarity(query.row(q), gallery.row(g));
    }
    // Best-ranked same-label item; its rank is the number of items ahead of
    // it under (similarity desc, index asc).
    std::size_t best = gallery.rows;
    for (std::size_t g = 0; g < gallery.rows; ++g) {
      if (self_match_excluded && g == q) continue;
      if (gallery_labels[g] != query_labels[q]) continue;
      if (best == gallery.rows || sims[g] > sims[best]) best = g;
    }
    if (best == gallery.rows) continue;
    std::size_t ahead = 0;
    for (std::size_t g = 0; g < gallery.rows; ++g) {
      if (self_match_excluded && g == q) continue;
      if (sims[g] > sims[best] || (sims[g] == sims[best] && g < best)) ++ahead;
    }
    for (auto& [k, h] : hits) {
      if (ahead < k) ++h;
    }
  }
  std::map<std::size_t, double> out;
  for (const auto& [k, h] : hits) {
    out[k] = static_cast<double>(h) / static_cast<double>(query.rows);
  }
  return out;
}

std::optional<std::size_t> epochs_to_threshold(const MethodCurve& curve,
                                               double threshold) {
  for (const auto& [epoch, value] : curve.points) {
    if (value >= threshold) return epoch;
  }
  return std::nullopt;
}

std::vector<ConvergenceEntry> convergence_summary(
    std::span<const MethodCurve> curves, double threshold) {
  for (const MethodCurve& c : curves) {
    if (c.points.size() != curves.front().points.size()) {
      throw InvalidSpecError("curves do not share an evaluation cadence");
    }
    for (std::size_t i = 0; i < c.points.size(); ++i) {
      if (c.points[i].first != curves.front().points[i].first) {
        throw InvalidSpecError("curves do not share an evaluation cadence");
      }
    }
  }
  std::vector<ConvergenceEntry> entries;
  for (const MethodCurve& c : curves) {
    entries.push_back({c.method, epochs_to_threshold(c, threshold),
                       c.points.empty() ? 0.0 : c.points.back().second});
  }
  std::stable_sort(entries.begin(), entries.end(),
                   [](const ConvergenceEntry& a, const ConvergenceEntry& b) {
                     if (a.epochs_to_threshold.has_value() !=
                         b.epochs_to_threshold.has_value()) {
                       return a.epochs_to_threshold.has_value();
                     }
                     if (a.epochs_to_threshold != b.epochs_to_threshold) {
                       return *a.epochs_to_threshold < *b.epochs_to_threshold;
                     }
                     return a.final_value > b.final_value;
                   });
  return entries;
}

namespace {

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::string render_report_csv(const EvalReport& report) {
  std::ostringstream out;
  out << "metric,key,value\n";
  for (const auto& [k, v] : report.recall_at) {
    out << "recall_at," << k << ',' << fmt_double(v) << '\n';
  }
  for (const auto& [key, epochs] : report.epochs_to_threshold) {
    out << "epochs_to_threshold," << key.first << '@' << fmt_double(key.second)
        << ',' << (epochs ? std::to_string(*epochs) : std::string("none")) << '\n';
  }
  out << "counter,similarity_evals_total," << report.counters.similarity_evals_total << '\n';
  out << "counter,tuples_considered_total," << report.counters.tuples_considered_total << '\n';
  out << "counter,batches_processed," << report.counters.batches_processed << '\n';
  out << "time,wall_time_seconds," << fmt_double(report.wall_time_seconds) << '\n';
  return out.str();
}

std::string render_report_table(const EvalReport& report) {
  std::ostringstream out;
  char buf[96];
  for (const auto& [k, v] : report.recall_at) {
    std::snprintf(buf, sizeof buf, "Recall@%-4zu %8.4f\n", k, v);
    out << buf;
  }
  for (const auto& [key, epochs] : report.epochs_to_threshold) {
    std::snprintf(buf, sizeof buf, "epochs to %s >= %.3g: %s\n", key.first.c_str(),
                  key.second, epochs ? std::to_string(*epochs).c_str() : "none");
    out << buf;
  }
  out << "similarity evals " << report.counters.similarity_evals_total
      << ", tuples " << report.counters.tuples_considered_total << ", batches "
      << report.counters.batches_processed << '\n';
  return out.str();
}

std::string render_convergence_table(std::span<const ConvergenceEntry> entries,
                                     double threshold) {
  std::ostringstream out;
  char buf[128];
  std::snprintf(buf, sizeof buf, "%-4s %-20s %-18s %s\n", "rank", "method",
                "epochs_to_thresh", "final");
  out << buf;
  std::size_t rank = 1;
  for (const ConvergenceEntry& e : entries) {
    std::snprintf(buf, sizeof buf, "%-4zu %-20s %-18s %.4f\n", rank++,
                  e.method.c_str(),
                  e.epochs_to_threshold ? std::to_string(*e.epochs_to_threshold).c_str()
                                        : "none",
                  e.final_value);
    out << buf;
  }
  std::snprintf(buf, sizeof buf, "threshold %.4g\n", threshold);
  out << buf;
  return out.str();
}

}  // namespace dml
