#include "dml/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <string>

#include "dml/errors.hpp"

namespace dml {

std::string_view to_string(SamplerChoice choice) {
  switch (choice) {
    case SamplerChoice::automatic: return "auto";
    case SamplerChoice::uniform_random: return "uniform_random";
    case SamplerChoice::class_balanced: return "class_balanced";
  }
  return "unknown";
}

SamplerChoice parse_sampler_choice(std::string_view name) {
  if (name == "auto") return SamplerChoice::automatic;
  if (name == "uniform_random") return SamplerChoice::uniform_random;
  if (name == "class_balanced") return SamplerChoice::class_balanced;
  throw InvalidSpecError("unknown sampler '" + std::string(name) + "'");
}

void TrainConfig::validate() const {
  loss.proxy.validate();
  loss.baseline.validate();
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw InvalidSpecError(std::string(name) + " must be positive");
    }
  };
  positive(base_lr, "base_lr");
  positive(proxy_lr_multiplier, "proxy_lr_multiplier");
  positive(adam_epsilon, "adam_epsilon");
  if (!(weight_decay >= 0.0)) throw InvalidSpecError("weight_decay must be nonnegative");
  if (!(adam_beta1 > 0.0 && adam_beta1 < 1.0) || !(adam_beta2 > 0.0 && adam_beta2 < 1.0)) {
    throw InvalidSpecError("adam betas must lie in (0, 1)");
  }
  if (batch_size == 0) throw InvalidSpecError("batch_size must be positive");
  if (epochs == 0) throw InvalidSpecError("epochs must be at least 1");
  if (eval_every == 0) throw InvalidSpecError("eval_every must be at least 1");
}

void adamw_step(TrainState& state, std::span<const double> grads,
                const TrainConfig& config) {
  auto& params = state.params.values;
  if (grads.size() != params.size()) {
    throw DimensionMismatchError("gradient length " + std::to_string(grads.size()) +
                                 " differs from parameter length " +
                                 std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (!std::isfinite(grads[i])) {
      throw NonFiniteGradientError("gradient entry " + std::to_string(i) +
                                   " is not finite");
    }
  }
  if (state.moment1.size() != params.size()) {
    state.moment1.assign(params.size(), 0.0);
    state.moment2.assign(params.size(), 0.0);
  }
  ++state.step;
  const double b1 = config.adam_beta1;
  const double b2 = config.adam_beta2;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(b1, t);
  const double correction2 = 1.0 - std::pow(b2, t);

  for (const Segment& seg : state.params.layout.segments) {
    const double lr = seg.name == kProxySegment
                          ? config.base_lr * config.proxy_lr_multiplier
                          : config.base_lr;
    const double decay = 1.0 - lr * config.weight_decay;
    for (std::size_t i = seg.offset; i < seg.offset + seg.size(); ++i) {
      const double g = grads[i];
      state.moment1[i] = b1 * state.moment1[i] + (1.0 - b1) * g;
      state.moment2[i] = b2 * state.moment2[i] + (1.0 - b2) * g * g;
      const double m_hat = state.moment1[i] / correction1;
      const double v_hat = state.moment2[i] / correction2;
      params[i] = params[i] * decay - lr * m_hat / (std::sqrt(v_hat) + config.adam_epsilon);
    }
  }
}

Trainer::Trainer(const Dataset& dataset, EmbedderSpec spec, TrainConfig config)
    : dataset_(dataset), spec_(std::move(spec)), config_(std::move(config)) {
  config_.validate();
  spec_.validate();
  if (spec_.kind == EmbedderKind::table && config_.split != SplitMode::train) {
    throw InvalidSpecError(
        "the table model cannot embed held-out samples; use split 'train'");
  }
  if (spec_.kind == EmbedderKind::mlp && spec_.input_dim != dataset_.features.cols) {
    throw DimensionMismatchError("mlp input_dim " + std::to_string(spec_.input_dim) +
                                 " differs from feature dim " +
                                 std::to_string(dataset_.features.cols));
  }
  split_ = make_split(dataset_, config_.split);
  if (config_.batch_size > split_.train.size()) {
    throw InvalidBatchSpecError("batch_size " + std::to_string(config_.batch_size) +
                                " exceeds the " + std::to_string(split_.train.size()) +
                                " training samples");
  }
  const bool balanced =
      config_.sampler == SamplerChoice::class_balanced ||
      (config_.sampler == SamplerChoice::automatic && !is_proxy_loss(config_.loss_kind));
  sampler_.kind = balanced ? SamplerKind::class_balanced : SamplerKind::uniform_random;
  if (balanced) {
    sampler_.m_per_class = config_.m_per_class != 0
                               ? config_.m_per_class
                               : auto_m_per_class(dataset_, split_.train, config_.batch_size);
  }

  num_proxies_ = dataset_.num_classes;
  const ParamVector model = init_model(spec_, dataset_.size());
  const ProxySet proxies =
      init_proxies(num_proxies_, spec_.output_dim, derive_seed(config_.seed, 1));
  state_.params = combine_params(model, proxies);
  state_.moment1.assign(state_.params.values.size(), 0.0);
  state_.moment2.assign(state_.params.values.size(), 0.0);
  state_.rng.seed(derive_seed(config_.seed, 2));
}

double Trainer::train_step(std::span<const std::size_t> batch) {
  const ParamVector& params = state_.params;
  EmbeddingBatch eb;
  eb.embeddings = forward_embed(spec_, params.layout, params.values,
                                dataset_.features, batch);
  eb.labels.reserve(batch.size());
  for (std::size_t idx : batch) eb.labels.push_back(dataset_.observed_labels[idx]);
  const ProxySet proxies = extract_proxies(params);

  const LossResult r = evaluate_loss(config_.loss_kind, eb, proxies, config_.loss);
  std::vector<double> grads = backward_embed(spec_, params.layout, params.values,
                                             dataset_.features, batch,
                                             r.grad_embeddings);
  grads.insert(grads.end(), r.grad_proxies.data.begin(), r.grad_proxies.data.end());
  adamw_step(state_, grads, config_);

  state_.counters.similarity_evals_total += r.similarity_evals;
  state_.counters.tuples_considered_total += r.tuples_considered;
  ++state_.counters.batches_processed;
  return r.value;
}

double Trainer::run_epoch() {
  const auto batches = epoch_batches(dataset_, split_.train, config_.batch_size,
                                     sampler_, state_.rng);
  double total = 0.0;
  for (std::size_t b = 0; b < batches.size(); ++b) {
    try {
      total += train_step(batches[b]);
    } catch (const Error& e) {
      e.rethrow_with_context("epoch " + std::to_string(state_.epoch + 1) +
                             " batch " + std::to_string(b) + " (step " +
                             std::to_string(state_.step + 1) + "): ");
    }
  }
  ++state_.epoch;
  return total / static_cast<double>(batches.size());
}

Matrix Trainer::eval_embeddings() const {
  return forward_embed(spec_, state_.params.layout, state_.params.values,
                       dataset_.features, split_.eval);
}

std::array<double, kLoggedKs.size()> Trainer::evaluate() const {
  const Matrix emb = eval_embeddings();
  std::vector<int> labels;
  labels.reserve(split_.eval.size());
  for (std::size_t idx : split_.eval) labels.push_back(dataset_.clean_labels[idx]);
  const auto recall = recall_at_k(emb, emb, labels, labels, kLoggedKs, true);
  std::array<double, kLoggedKs.size()> out{};
  for (std::size_t i = 0; i < kLoggedKs.size(); ++i) out[i] = recall.at(kLoggedKs[i]);
  return out;
}

TrainResult train(const Dataset& dataset, const EmbedderSpec& spec,
                  const TrainConfig& config) {
  Trainer trainer(dataset, spec, config);
  TrainResult result;
  result.split = trainer.split().mode;
  result.sampler = trainer.sampler();
  const auto start = std::chrono::steady_clock::now();
  double loss_since_log = 0.0;
  std::size_t epochs_since_log = 0;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const double loss = trainer.run_epoch();
    result.epoch_losses.push_back(loss);
    loss_since_log += loss;
    ++epochs_since_log;
    if (epoch % config.eval_every != 0 && epoch != config.epochs) continue;
    MetricsRow row;
    row.epoch = epoch;
    row.loss_mean = loss_since_log / static_cast<double>(epochs_since_log);
    try {
      row.recall = trainer.evaluate();
    } catch (const Error& e) {
      e.rethrow_with_context("evaluation after epoch " + std::to_string(epoch) + ": ");
    }
    row.counters = trainer.state().counters;
    if (config.record_timing) {
      row.wall_time_seconds =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
    result.log.push_back(row);
    loss_since_log = 0.0;
    epochs_since_log = 0;
  }
  result.state = trainer.state();
  return result;
}

namespace {

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::string metrics_csv_header() {
  return "epoch,loss_mean,recall_at_1,recall_at_2,recall_at_4,recall_at_8,"
         "similarity_evals_total,tuples_considered_total,batches_processed_total,wall_time_seconds";
}

std::string metrics_csv_row(const MetricsRow& row) {
  std::ostringstream out;
  out << row.epoch << ',' << fmt_double(row.loss_mean);
  for (double r : row.recall) out << ',' << fmt_double(r);
  out << ',' << row.counters.similarity_evals_total << ','
      << row.counters.tuples_considered_total << ','
      << row.counters.batches_processed << ','
      << fmt_double(row.wall_time_seconds);
  return out.str();
}

std::string render_metrics_csv(std::span<const MetricsRow> rows) {
  std::string out = metrics_csv_header() + "\n";
  for (const MetricsRow& r : rows) out += metrics_csv_row(r) + "\n";
  return out;
}

ComplexityMeasurement measure_complexity(LossKind loss_kind,
                                         std::size_t num_samples,
                                         std::size_t num_classes,
                                         std::size_t batch_size,
                                         std::uint64_t seed) {
  if (num_classes < 2 || num_samples < 2 * num_classes) {
    throw InvalidSpecError("measure_complexity needs C >= 2 and M >= 2C");
  }
  SyntheticDatasetSpec ds_spec;
  ds_spec.num_classes = num_classes;
  ds_spec.samples_per_class = (num_samples + num_classes - 1) / num_classes;
  ds_spec.feature_dim = 4;
  ds_spec.seed = derive_seed(seed, 10);
  const Dataset full = generate_dataset(ds_spec);
  // Round-robin over classes so every class is present whatever M is.
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; keep.size() < num_samples; ++i) {
    for (std::size_t c = 0; c < num_classes && keep.size() < num_samples; ++c) {
      keep.push_back(c * ds_spec.samples_per_class + i);
    }
  }
  const Dataset ds = subset(full, keep);

  EmbedderSpec spec;
  spec.kind = EmbedderKind::table;
  spec.output_dim = 8;
  spec.init_seed = derive_seed(seed, 11);
  TrainConfig cfg;
  cfg.loss_kind = loss_kind;
  cfg.batch_size = batch_size;
  cfg.epochs = 1;
  cfg.seed = seed;
  cfg.split = SplitMode::train;
  cfg.record_timing = false;

  Trainer trainer(ds, spec, cfg);
  trainer.run_epoch();

  ComplexityMeasurement m;
  m.loss_kind = loss_kind;
  m.num_samples = num_samples;
  m.num_classes = num_classes;
  m.batch_size = batch_size;
  m.sampler = trainer.sampler();
  m.batches = trainer.state().counters.batches_processed;
  m.measured_similarity_evals = trainer.state().counters.similarity_evals_total;
  m.measured_tuples = trainer.state().counters.tuples_considered_total;
  const std::uint64_t batches = m.batches;
  if (is_proxy_loss(loss_kind)) {
    m.predicted_similarity_evals = static_cast<std::uint64_t>(num_samples) * num_classes;
    m.predicted_tuples = m.predicted_similarity_evals;
  } else {
    const std::uint64_t b = batch_size;
    m.predicted_similarity_evals = batches * (b * (b - 1) / 2);
    if (loss_kind != LossKind::multi_similarity) {
      const std::uint64_t per_class = m.sampler.m_per_class;
      m.predicted_tuples =
          batches * predicted_batch_tuples(loss_kind, b / per_class, per_class);
    }
  }
  return m;
}

}  // namespace dml
