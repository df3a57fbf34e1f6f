#include "dml/commands.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>

#include "dml/bench.hpp"
#include "dml/errors.hpp"
#include "dml/eval.hpp"
#include "dml/gradcheck.hpp"
#include "dml/model.hpp"
#include "dml/trainer.hpp"

namespace dml {

namespace fs = std::filesystem;

namespace {

constexpr double kGradcheckTolerance = 1e-5;

void write_file(const fs::path& path, std::string_view contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << contents;
  if (!out) throw IoError("failed writing " + path.string());
}

fs::path prepare(const RunConfig& config, const fs::path& out_root) {
  const fs::path dir = run_directory(config, out_root);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  write_file(dir / "config.txt", serialize_config(config));
  return dir;
}

int cmd_train(const RunConfig& config, const fs::path& dir, std::ostream& log) {
  const Dataset ds = generate_dataset(config.dataset_spec());
  write_dataset_csv(dir / "dataset.csv", ds);
  const TrainResult result = train(ds, config.embedder_spec(), config.train_config());
  write_file(dir / "metrics.csv", render_metrics_csv(result.log));
  save_checkpoint(dir / "checkpoint.ckpt", result.state.params);
  const MetricsRow& last = result.log.back();
  char buf[160];
  std::snprintf(buf, sizeof buf, "trained %s for %zu epochs: loss %.6g, Recall@1 %.4f\n",
                std::string(to_string(config.train.loss_kind)).c_str(), last.epoch,
                last.loss_mean, last.recall[0]);
  log << buf << "wrote " << dir.string() << '\n';
  return 0;
}

std::vector<MetricsRow> read_metrics_csv(const fs::path& path) {
  std::vector<MetricsRow> rows;
  std::ifstream in(path);
  std::string line;
  if (!std::getline(in, line) || line != metrics_csv_header()) return rows;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (cells.size() != 10) throw IoError("malformed row in " + path.string());
    MetricsRow r;
    r.epoch = std::stoull(cells[0]);
    r.loss_mean = std::stod(cells[1]);
    for (std::size_t k = 0; k < 4; ++k) r.recall[k] = std::stod(cells[2 + k]);
    r.counters.similarity_evals_total = std::stoull(cells[6]);
    r.counters.tuples_considered_total = std::stoull(cells[7]);
    r.counters.batches_processed = std::stoull(cells[8]);
    r.wall_time_seconds = std::stod(cells[9]);
    rows.push_back(r);
  }
  return rows;
}

int cmd_eval(const RunConfig& config, const fs::path& dir, std::ostream& log) {
  if (config.eval.checkpoint.empty()) {
    throw MissingRequiredError("eval requires eval.checkpoint");
  }
  const auto start = std::chrono::steady_clock::now();
  const fs::path ckpt = config.eval.checkpoint;
  const ParamVector params = load_checkpoint(ckpt);
  const Dataset ds = generate_dataset(config.dataset_spec());
  const EmbedderSpec spec = config.embedder_spec();

  ParamLayout expected = model_layout(spec, ds.size());
  expected.append(std::string(kProxySegment), ds.num_classes, spec.output_dim);
  if (!(expected == params.layout)) {
    throw CheckpointFormatError("checkpoint layout does not match the configured model");
  }
  const Split split = make_split(ds, config.split());
  const Matrix emb = forward_embed(spec, params.layout, params.values, ds.features, split.eval);
  std::vector<int> labels;
  for (std::size_t idx : split.eval) labels.push_back(ds.clean_labels[idx]);

  EvalReport report;
  report.recall_at = recall_at_k(emb, emb, labels, labels, config.eval.ks, true);
  const auto history = read_metrics_csv(ckpt.parent_path() / "metrics.csv");
  if (!history.empty()) {
    MethodCurve curve{std::string(to_string(config.train.loss_kind)), {}};
    for (const MetricsRow& r : history) curve.points.emplace_back(r.epoch, r.recall[0]);
    report.epochs_to_threshold[{"recall_at_1", config.eval.threshold}] =
        epochs_to_threshold(curve, config.eval.threshold);
    report.counters = history.back().counters;
  }
  if (config.train.record_timing) {
    report.wall_time_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
  write_file(dir / "report.csv", render_report_csv(report));
  const std::string table = render_report_table(report);
  write_file(dir / "report.txt", table);
  log << table << "wrote " << dir.string() << '\n';
  return 0;
}

int cmd_sweep(const RunConfig& config, const fs::path& dir, std::ostream& log) {
  if (config.sweep.axis.empty()) throw MissingRequiredError("sweep requires sweep.axis");
  if (config.sweep.values.empty()) throw MissingRequiredError("sweep requires sweep.values");
  SweepSpec spec;
  spec.axis = parse_sweep_axis(config.sweep.axis);
  spec.values = config.sweep.values;
  spec.base = config;
  spec.repeats = config.sweep.repeats;
  const SweepResult result = run_sweep(spec);
  write_file(dir / "cells.csv", render_sweep_cells_csv(result));
  write_file(dir / "aggregate.csv", render_sweep_aggregate_csv(result));
  write_file(dir / "curves.csv", render_sweep_curves_csv(result));
  std::size_t failed = 0;
  for (const SweepRow& row : result.rows) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%s=%-10s Recall@1 %.4f +- %.4f  epochs %.2f  (%zu/%zu ok)\n",
                  config.sweep.axis.c_str(), row.value.c_str(), row.recall1_mean,
                  row.recall1_std, row.epochs_to_threshold_mean, row.runs - row.failed,
                  row.runs);
    log << buf;
    failed += row.failed;
  }
  log << "wrote " << dir.string() << '\n';
  return failed == 0 ? 0 : 1;
}

int cmd_bench(const RunConfig& config, const fs::path& dir, std::ostream& log) {
  BenchSpec spec{config.bench.methods, config, config.bench.repeats};
  const BenchReport report = run_convergence_benchmark(spec);
  write_file(dir / "curves.csv", render_bench_curves_csv(report));
  write_file(dir / "runs.csv", render_bench_runs_csv(report));
  write_file(dir / "ranking.csv", render_bench_ranking_csv(report));
  const std::string table = render_bench_ranking_table(report);
  write_file(dir / "ranking.txt", table);
  log << table << "wrote " << dir.string() << '\n';
  std::size_t failed = 0;
  for (const MethodSummary& m : report.methods) failed += m.failed;
  return failed == 0 ? 0 : 1;
}

int cmd_gradcheck(const RunConfig& config, const fs::path& dir, std::ostream& log) {
  const GradcheckSummary summary = run_gradcheck(config.seed);
  std::ostringstream csv;
  csv << "loss,model,n,c,d,instances,rejected,max_rel_error\n";
  for (const GradcheckCase& c : summary.cases) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", c.max_rel_error);
    csv << to_string(c.loss) << ',' << to_string(c.model) << ',' << c.n << ',' << c.c << ','
        << c.d << ',' << c.instances << ',' << c.rejected << ',' << buf << '\n';
  }
  write_file(dir / "gradcheck.csv", csv.str());
  for (const auto& [loss, err] : summary.max_by_loss) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "%-18s max_rel_error %.3e  %s\n",
                  std::string(to_string(loss)).c_str(), err,
                  err <= kGradcheckTolerance ? "ok" : "FAIL");
    log << buf;
  }
  const bool ok = summary.passed(kGradcheckTolerance);
  log << summary.instances << " instances, tolerance " << kGradcheckTolerance << ": "
      << (ok ? "all passed" : "FAILED") << '\n';
  return ok ? 0 : 1;
}

}  // namespace

std::string_view to_string(Command command) {
  switch (command) {
    case Command::train: return "train";
    case Command::eval: return "eval";
    case Command::sweep: return "sweep";
    case Command::bench: return "bench";
    case Command::gradcheck: return "gradcheck";
  }
  return "unknown";
}

Command parse_command(std::string_view name) {
  for (Command c : {Command::train, Command::eval, Command::sweep, Command::bench,
                    Command::gradcheck}) {
    if (to_string(c) == name) return c;
  }
  throw InvalidSpecError("unknown command '" + std::string(name) + "'");
}

fs::path run_directory(const RunConfig& config, const fs::path& out_root) {
  return out_root / (config.tag + "-seed" + std::to_string(config.seed));
}

int dispatch(Command command, const RunConfig& config, const fs::path& out_root,
             std::ostream& log) {
  config.validate();
  const fs::path dir = prepare(config, out_root);
  switch (command) {
    case Command::train: return cmd_train(config, dir, log);
    case Command::eval: return cmd_eval(config, dir, log);
    case Command::sweep: return cmd_sweep(config, dir, log);
    case Command::bench: return cmd_bench(config, dir, log);
    case Command::gradcheck: return cmd_gradcheck(config, dir, log);
  }
  return 1;
}

}  // namespace dml
