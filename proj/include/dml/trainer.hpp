#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dml/data.hpp"
#include "dml/eval.hpp"
#include "dml/losses.hpp"
#include "dml/model.hpp"
#include "dml/rng.hpp"

namespace dml {

enum class SamplerChoice { automatic, uniform_random, class_balanced };

std::string_view to_string(SamplerChoice choice);
SamplerChoice parse_sampler_choice(std::string_view name);

struct TrainConfig {
  LossKind loss_kind = LossKind::proxy_anchor;
  LossConfig loss;
  double base_lr = 1e-4;
  double proxy_lr_multiplier = 100.0;
  double weight_decay = 1e-4;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  std::size_t batch_size = 50;
  std::size_t epochs = 40;
  std::uint64_t seed = 0;
  std::size_t eval_every = 1;
  /// automatic: uniform_random for proxy losses, class_balanced otherwise.
  SamplerChoice sampler = SamplerChoice::automatic;
  /// class_balanced samples per class; 0 picks auto_m_per_class.
  std::size_t m_per_class = 0;
  SplitMode split = SplitMode::holdout;
  bool record_timing = true;

  void validate() const;
};

/// Columns of the metrics log, in CSV order.
inline constexpr std::array<std::size_t, 4> kLoggedKs{1, 2, 4, 8};

struct MetricsRow {
  std::size_t epoch = 0;
  double loss_mean = 0.0;
  std::array<double, kLoggedKs.size()> recall{};  // Recall@1,2,4,8
  ComplexityCounter counters;
  double wall_time_seconds = 0.0;
};

struct TrainState {
  ParamVector params;
  std::vector<double> moment1;
  std::vector<double> moment2;
  std::uint64_t step = 0;
  std::size_t epoch = 0;
  Rng rng;
  ComplexityCounter counters;
};

/// One AdamW update: Adam moments with bias correction plus decoupled weight
/// decay, p <- p (1 - lr wd) - lr m_hat / (sqrt(v_hat) + eps). The proxy
/// segment uses lr = base_lr * proxy_lr_multiplier. Throws
/// NonFiniteGradientError without touching the state.
void adamw_step(TrainState& state, std::span<const double> grads,
                const TrainConfig& config);

/// Drives training of one (dataset, model, loss) combination.
class Trainer {
 public:
  Trainer(const Dataset& dataset, EmbedderSpec spec, TrainConfig config);

  /// One pass over the training split. Returns the mean batch loss.
  double run_epoch();

  /// Recall@{1,2,4,8} on the evaluation split with clean labels, computed
  /// from a fresh forward pass.
  std::array<double, kLoggedKs.size()> evaluate() const;

  /// Embeddings of the evaluation split under the current parameters.
  Matrix eval_embeddings() const;

  const TrainState& state() const { return state_; }
  const Split& split() const { return split_; }
  const SamplerSpec& sampler() const { return sampler_; }
  const EmbedderSpec& spec() const { return spec_; }
  const TrainConfig& config() const { return config_; }
  std::size_t num_proxies() const { return num_proxies_; }

 private:
  double train_step(std::span<const std::size_t> batch);

  const Dataset& dataset_;
  EmbedderSpec spec_;
  TrainConfig config_;
  Split split_;
  SamplerSpec sampler_;
  std::size_t num_proxies_ = 0;
  TrainState state_;
};

struct TrainResult {
  TrainState state;
  std::vector<MetricsRow> log;
  std::vector<double> epoch_losses;
  SplitMode split = SplitMode::holdout;
  SamplerSpec sampler;
};

/// Runs config.epochs epochs; logs a metrics row every eval_every epochs and
/// after the last epoch. Errors are rethrown with epoch context.
TrainResult train(const Dataset& dataset, const EmbedderSpec& spec,
                  const TrainConfig& config);

std::string metrics_csv_header();
std::string metrics_csv_row(const MetricsRow& row);
std::string render_metrics_csv(std::span<const MetricsRow> rows);

struct ComplexityMeasurement {
  LossKind loss_kind;
  std::size_t num_samples = 0;
  std::size_t num_classes = 0;
  std::size_t batch_size = 0;
  std::size_t batches = 0;
  SamplerSpec sampler;
  std::uint64_t predicted_similarity_evals = 0;
  std::uint64_t measured_similarity_evals = 0;
  std::optional<std::uint64_t> predicted_tuples;  // none for multi_similarity
  std::uint64_t measured_tuples = 0;
};

/// Runs one epoch of `loss_kind` on an M-sample, C-class synthetic set with a
/// table model and compares the counters with the closed-form counts.
ComplexityMeasurement measure_complexity(LossKind loss_kind,
                                         std::size_t num_samples,
                                         std::size_t num_classes,
                                         std::size_t batch_size,
                                         std::uint64_t seed = 0);

}  // namespace dml
