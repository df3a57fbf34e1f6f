#include "dml/bench.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <thread>

#include "dml/errors.hpp"

namespace dml {

namespace {

// Runs fn(0..count-1) on up to `threads` workers; each index writes only its
// own output slot, so results are independent of scheduling.
template <typename Fn>
void parallel_for(std::size_t count, std::size_t threads, Fn&& fn) {
  threads = std::max<std::size_t>(1, std::min(threads, count));
  if (threads == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> workers;
  for (std::size_t t = 0; t < threads; ++t) {
    workers.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) fn(i);
    });
  }
  for (auto& w : workers) w.join();
}

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct MeanStd {
  double mean = 0.0;
  double stddev = 0.0;
};

// Population standard deviation.
MeanStd mean_std(const std::vector<double>& xs) {
  if (xs.empty()) return {};
  double sum = 0.0;
  for (double x : xs) sum += x;
  const double mean = sum / static_cast<double>(xs.size());
  double sq = 0.0;
  for (double x : xs) sq += (x - mean) * (x - mean);
  return {mean, std::sqrt(sq / static_cast<double>(xs.size()))};
}

double censored_epochs(const RunOutcome& r, std::size_t epochs) {
  return r.epochs_to_threshold ? static_cast<double>(*r.epochs_to_threshold)
                               : static_cast<double>(epochs + 1);
}

}  // namespace

std::string_view to_string(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::batch_size: return "batch_size";
    case SweepAxis::embedding_dim: return "embedding_dim";
    case SweepAxis::alpha: return "alpha";
    case SweepAxis::delta: return "delta";
    case SweepAxis::noise_rate: return "noise_rate";
    case SweepAxis::loss_kind: return "loss_kind";
  }
  return "unknown";
}

SweepAxis parse_sweep_axis(std::string_view name) {
  for (SweepAxis a : {SweepAxis::batch_size, SweepAxis::embedding_dim, SweepAxis::alpha,
                      SweepAxis::delta, SweepAxis::noise_rate, SweepAxis::loss_kind}) {
    if (to_string(a) == name) return a;
  }
  throw InvalidSpecError("unknown sweep axis '" + std::string(name) + "'");
}

RunOutcome run_single(const RunConfig& config, const Dataset& dataset) {
  RunOutcome out;
  try {
    config.validate();
    const TrainResult result =
        train(dataset, config.embedder_spec(), config.train_config());
    out.log = result.log;
    out.sampler = result.sampler;
    out.final_recall1 = result.log.back().recall[0];
    MethodCurve curve;
    for (const MetricsRow& row : result.log) curve.points.emplace_back(row.epoch, row.recall[0]);
    out.epochs_to_threshold = epochs_to_threshold(curve, config.eval.threshold);
    out.counters = result.state.counters;
    out.wall_time_seconds = result.log.back().wall_time_seconds;
    out.ok = true;
  } catch (const Error& e) {
    out.error_category = e.category();
    out.error = e.what();
  }
  return out;
}

void SweepSpec::validate() const {
  if (values.empty()) throw InvalidSpecError("sweep needs at least one value");
  if (repeats == 0) throw InvalidSpecError("sweep repeats must be at least 1");
  // Each value must be accepted by its key and by the section's range checks.
  for (std::size_t i = 0; i < values.size(); ++i) {
    const RunConfig cell = sweep_cell_config(*this, i, 0);
    try {
      cell.validate();
    } catch (const InvalidSpecError& e) {
      throw InvalidSpecError("sweep value '" + values[i] + "' for axis " +
                             std::string(to_string(axis)) + ": " + e.what());
    }
  }
}

RunConfig sweep_cell_config(const SweepSpec& spec, std::size_t value_index,
                            std::size_t repeat) {
  RunConfig cell = spec.base;
  cell.seed = spec.base.seed + repeat;
  const std::string& v = spec.values.at(value_index);
  try {
    switch (spec.axis) {
      case SweepAxis::batch_size: set_config_value(cell, "train.batch_size", v); break;
      case SweepAxis::embedding_dim: set_config_value(cell, "model.output_dim", v); break;
      case SweepAxis::alpha: set_config_value(cell, "train.alpha", v); break;
      case SweepAxis::delta: set_config_value(cell, "train.delta", v); break;
      case SweepAxis::noise_rate: set_config_value(cell, "data.noise_rate", v); break;
      case SweepAxis::loss_kind: set_config_value(cell, "train.loss_kind", v); break;
    }
  } catch (const ConfigTypeError& e) {
    throw InvalidSpecError(e.what());
  }
  return cell;
}

SweepResult run_sweep(const SweepSpec& spec) {
  spec.validate();
  SweepResult result;
  result.spec = spec;
  for (std::size_t v = 0; v < spec.values.size(); ++v) {
    for (std::size_t r = 0; r < spec.repeats; ++r) {
      result.cells.push_back({v, spec.values[v], spec.base.seed + r, {}});
    }
  }
  parallel_for(result.cells.size(), spec.base.threads, [&](std::size_t i) {
    SweepCell& cell = result.cells[i];
    const RunConfig cfg = sweep_cell_config(
        spec, cell.value_index, static_cast<std::size_t>(cell.seed - spec.base.seed));
    Dataset ds;
    try {
      ds = generate_dataset(cfg.dataset_spec());
    } catch (const Error& e) {
      cell.outcome.error_category = e.category();
      cell.outcome.error = e.what();
      return;
    }
    cell.outcome = run_single(cfg, ds);
  });

  for (std::size_t v = 0; v < spec.values.size(); ++v) {
    SweepRow row;
    row.value = spec.values[v];
    std::vector<double> recalls, epochs;
    const std::size_t budget = sweep_cell_config(spec, v, 0).train.epochs;
    for (const SweepCell& cell : result.cells) {
      if (cell.value_index != v) continue;
      ++row.runs;
      if (!cell.outcome.ok) {
        ++row.failed;
        continue;
      }
      if (cell.outcome.epochs_to_threshold) ++row.reached;
      recalls.push_back(cell.outcome.final_recall1);
      epochs.push_back(censored_epochs(cell.outcome, budget));
    }
    const MeanStd r = mean_std(recalls);
    const MeanStd e = mean_std(epochs);
    row.recall1_mean = r.mean;
    row.recall1_std = r.stddev;
    row.epochs_to_threshold_mean = e.mean;
    row.epochs_to_threshold_std = e.stddev;
    result.rows.push_back(row);
  }
  return result;
}

BenchReport run_convergence_benchmark(const BenchSpec& spec) {
  if (spec.methods.empty()) throw InvalidSpecError("benchmark needs at least one method");
  if (spec.repeats == 0) throw InvalidSpecError("benchmark repeats must be at least 1");
  spec.base.validate();

  BenchReport report;
  report.threshold = spec.base.eval.threshold;
  for (std::size_t r = 0; r < spec.repeats; ++r) report.seeds.push_back(spec.base.seed + r);

  // One dataset per seed, shared by every method; the split and evaluation
  // cadence follow from it and from the shared base config.
  std::vector<Dataset> datasets(spec.repeats);
  for (std::size_t r = 0; r < spec.repeats; ++r) {
    RunConfig cfg = spec.base;
    cfg.seed = report.seeds[r];
    datasets[r] = generate_dataset(cfg.dataset_spec());
  }

  const std::size_t cells = spec.methods.size() * spec.repeats;
  std::vector<RunOutcome> outcomes(cells);
  parallel_for(cells, spec.base.threads, [&](std::size_t i) {
    const std::size_t m = i / spec.repeats;
    const std::size_t r = i % spec.repeats;
    RunConfig cfg = spec.base;
    cfg.seed = report.seeds[r];
    cfg.train.loss_kind = spec.methods[m];
    outcomes[i] = run_single(cfg, datasets[r]);
  });

  const std::size_t epochs = spec.base.train.epochs;
  for (std::size_t m = 0; m < spec.methods.size(); ++m) {
    MethodSummary s;
    s.method = spec.methods[m];
    std::vector<double> finals, etts;
    for (std::size_t r = 0; r < spec.repeats; ++r) {
      RunOutcome& o = outcomes[m * spec.repeats + r];
      if (!o.ok) {
        ++s.failed;
      } else {
        s.sampler = o.sampler;
        finals.push_back(o.final_recall1);
        etts.push_back(censored_epochs(o, epochs));
        if (o.epochs_to_threshold) ++s.reached;
        s.wall_time_total += o.wall_time_seconds;
        if (s.similarity_evals_per_epoch == 0) {
          s.similarity_evals_per_epoch = o.counters.similarity_evals_total / epochs;
          s.tuples_per_epoch = o.counters.tuples_considered_total / epochs;
        }
      }
      s.runs.push_back(std::move(o));
    }
    const MeanStd f = mean_std(finals);
    s.final_recall1_mean = f.mean;
    s.final_recall1_std = f.stddev;
    s.epochs_to_threshold_mean = mean_std(etts).mean;

    // Mean curve over successful runs; every run logs the same epochs.
    const RunOutcome* ref = nullptr;
    for (const RunOutcome& o : s.runs) {
      if (!o.ok) continue;
      if (ref == nullptr) {
        ref = &o;
      } else if (o.log.size() != ref->log.size()) {
        throw InvalidSpecError("benchmark runs disagree on evaluation cadence");
      }
    }
    if (ref != nullptr) {
      for (std::size_t p = 0; p < ref->log.size(); ++p) {
        double sum = 0.0;
        for (const RunOutcome& o : s.runs) {
          if (!o.ok) continue;
          if (o.log[p].epoch != ref->log[p].epoch) {
            throw InvalidSpecError("benchmark runs disagree on evaluation cadence");
          }
          sum += o.log[p].recall[0];
        }
        s.mean_curve.emplace_back(ref->log[p].epoch,
                                  sum / static_cast<double>(finals.size()));
      }
    }
    report.methods.push_back(std::move(s));
  }

  for (std::size_t m = 0; m < report.methods.size(); ++m) report.ranking.push_back(m);
  std::stable_sort(report.ranking.begin(), report.ranking.end(),
                   [&](std::size_t a, std::size_t b) {
                     const MethodSummary& x = report.methods[a];
                     const MethodSummary& y = report.methods[b];
                     if ((x.failed == x.runs.size()) != (y.failed == y.runs.size())) {
                       return y.failed == y.runs.size();
                     }
                     if (x.epochs_to_threshold_mean != y.epochs_to_threshold_mean) {
                       return x.epochs_to_threshold_mean < y.epochs_to_threshold_mean;
                     }
                     return x.final_recall1_mean > y.final_recall1_mean;
                   });
  return report;
}

namespace {

void append_curve_rows(std::ostringstream& out, const std::string& series,
                       std::uint64_t seed, const std::vector<MetricsRow>& log) {
  static constexpr const char* kRecallNames[] = {"recall_at_1", "recall_at_2",
                                                 "recall_at_4", "recall_at_8"};
  for (const MetricsRow& row : log) {
    const auto prefix = series + ',' + std::to_string(seed) + ',' + std::to_string(row.epoch) + ',';
    out << prefix << "loss_mean," << fmt_double(row.loss_mean) << '\n';
    for (std::size_t k = 0; k < row.recall.size(); ++k) {
      out << prefix << kRecallNames[k] << ',' << fmt_double(row.recall[k]) << '\n';
    }
    out << prefix << "similarity_evals_total," << row.counters.similarity_evals_total << '\n';
    out << prefix << "tuples_considered_total," << row.counters.tuples_considered_total << '\n';
    out << prefix << "wall_time_seconds," << fmt_double(row.wall_time_seconds) << '\n';
  }
}

std::string csv_safe(std::string s) {
  std::replace(s.begin(), s.end(), ',', ';');
  std::replace(s.begin(), s.end(), '\n', ' ');
  return s;
}

}  // namespace

std::string render_sweep_cells_csv(const SweepResult& result) {
  std::ostringstream out;
  out << "axis,value,seed,status,final_recall_at_1,epochs_to_threshold,"
         "similarity_evals_total,tuples_considered_total,wall_time_seconds,error\n";
  const std::string axis(to_string(result.spec.axis));
  for (const SweepCell& c : result.cells) {
    const RunOutcome& o = c.outcome;
    out << axis << ',' << c.value << ',' << c.seed << ',' << (o.ok ? "ok" : "failed") << ','
        << fmt_double(o.final_recall1) << ','
        << (o.epochs_to_threshold ? std::to_string(*o.epochs_to_threshold) : "none") << ','
        << o.counters.similarity_evals_total << ',' << o.counters.tuples_considered_total
        << ',' << fmt_double(o.wall_time_seconds) << ','
        << (o.ok ? "" : csv_safe(o.error_category + ": " + o.error)) << '\n';
  }
  return out.str();
}

std::string render_sweep_aggregate_csv(const SweepResult& result) {
  std::ostringstream out;
  out << "axis,value,runs,failed,reached,recall_at_1_mean,recall_at_1_std,"
         "epochs_to_threshold_mean,epochs_to_threshold_std\n";
  const std::string axis(to_string(result.spec.axis));
  for (const SweepRow& r : result.rows) {
    out << axis << ',' << r.value << ',' << r.runs << ',' << r.failed << ',' << r.reached
        << ',' << fmt_double(r.recall1_mean) << ',' << fmt_double(r.recall1_std) << ','
        << fmt_double(r.epochs_to_threshold_mean) << ','
        << fmt_double(r.epochs_to_threshold_std) << '\n';
  }
  return out.str();
}

std::string render_sweep_curves_csv(const SweepResult& result) {
  std::ostringstream out;
  out << "series,seed,epoch,metric,value\n";
  for (const SweepCell& c : result.cells) {
    append_curve_rows(out, std::string(to_string(result.spec.axis)) + "=" + c.value,
                      c.seed, c.outcome.log);
  }
  return out.str();
}

std::string render_bench_curves_csv(const BenchReport& report) {
  std::ostringstream out;
  out << "series,seed,epoch,metric,value\n";
  for (const MethodSummary& m : report.methods) {
    for (std::size_t r = 0; r < m.runs.size(); ++r) {
      append_curve_rows(out, std::string(to_string(m.method)), report.seeds[r], m.runs[r].log);
    }
  }
  return out.str();
}

std::string render_bench_runs_csv(const BenchReport& report) {
  std::ostringstream out;
  out << "method,sampler,seed,status,final_recall_at_1,epochs_to_threshold,"
         "similarity_evals_total,tuples_considered_total,wall_time_seconds,error\n";
  for (const MethodSummary& m : report.methods) {
    for (std::size_t r = 0; r < m.runs.size(); ++r) {
      const RunOutcome& o = m.runs[r];
      out << to_string(m.method) << ',' << to_string(o.sampler.kind) << ',' << report.seeds[r]
          << ',' << (o.ok ? "ok" : "failed") << ',' << fmt_double(o.final_recall1) << ','
          << (o.epochs_to_threshold ? std::to_string(*o.epochs_to_threshold) : "none") << ','
          << o.counters.similarity_evals_total << ',' << o.counters.tuples_considered_total
          << ',' << fmt_double(o.wall_time_seconds) << ','
          << (o.ok ? "" : csv_safe(o.error_category + ": " + o.error)) << '\n';
    }
  }
  return out.str();
}

std::string render_bench_ranking_csv(const BenchReport& report) {
  std::ostringstream out;
  out << "rank,method,sampler,runs,failed,reached,epochs_to_threshold_mean,"
         "final_recall_at_1_mean,final_recall_at_1_std,wall_time_seconds_total,"
         "similarity_evals_per_epoch,tuples_per_epoch\n";
  std::size_t rank = 1;
  for (std::size_t idx : report.ranking) {
    const MethodSummary& m = report.methods[idx];
    out << rank++ << ',' << to_string(m.method) << ',' << to_string(m.sampler.kind) << ','
        << m.runs.size() << ',' << m.failed << ',' << m.reached << ','
        << fmt_double(m.epochs_to_threshold_mean) << ',' << fmt_double(m.final_recall1_mean)
        << ',' << fmt_double(m.final_recall1_std) << ',' << fmt_double(m.wall_time_total)
        << ',' << m.similarity_evals_per_epoch << ',' << m.tuples_per_epoch << '\n';
  }
  return out.str();
}

std::string render_bench_ranking_table(const BenchReport& report) {
  std::ostringstream out;
  char buf[192];
  std::snprintf(buf, sizeof buf, "%-4s %-18s %-15s %-9s %-12s %-14s %-14s %s\n", "rank",
                "method", "sampler", "reached", "epochs_mean", "recall1_mean", "evals/epoch",
                "tuples/epoch");
  out << buf;
  std::size_t rank = 1;
  for (std::size_t idx : report.ranking) {
    const MethodSummary& m = report.methods[idx];
    const std::string reached = std::to_string(m.reached) + "/" + std::to_string(m.runs.size());
    std::snprintf(buf, sizeof buf, "%-4zu %-18s %-15s %-9s %-12.2f %-14.4f %-14llu %llu\n",
                  rank++, std::string(to_string(m.method)).c_str(),
                  std::string(to_string(m.sampler.kind)).c_str(), reached.c_str(),
                  m.epochs_to_threshold_mean, m.final_recall1_mean,
                  static_cast<unsigned long long>(m.similarity_evals_per_epoch),
                  static_cast<unsigned long long>(m.tuples_per_epoch));
    out << buf;
  }
  std::snprintf(buf, sizeof buf, "threshold Recall@1 >= %.4g; runs that never reach it count as epochs + 1\n",
                report.threshold);
  out << buf;
  return out.str();
}

}  // namespace dml
