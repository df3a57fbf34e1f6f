#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dml/data.hpp"
#include "dml/losses.hpp"
#include "dml/model.hpp"
#include "dml/trainer.hpp"

namespace dml {

struct EvalSettings {
  std::vector<std::size_t> ks{1, 2, 4, 8};
  double threshold = 0.9;
  std::optional<SplitMode> split;  // unset: train for the table model, holdout otherwise
  std::string checkpoint;  // required by the eval command
};

struct SweepSettings {
  std::string axis;  // required by the sweep command
  std::vector<std::string> values;
  std::size_t repeats = 1;
};

struct BenchSettings {
  std::vector<LossKind> methods{LossKind::proxy_anchor, LossKind::proxy_nca,
                                LossKind::triplet_semihard};
  std::size_t repeats = 5;
};

/// Everything a command needs. Seeds of the dataset, model and trainer are all
/// derived from `seed`; the seed fields inside `data`, `model` and `train` are
/// ignored in favour of the accessors below, as is `train.split`.
struct RunConfig {
  std::string tag = "run";
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  SyntheticDatasetSpec data;
  EmbedderSpec model;
  TrainConfig train;
  EvalSettings eval;
  SweepSettings sweep;
  BenchSettings bench;

  SyntheticDatasetSpec dataset_spec() const;
  EmbedderSpec embedder_spec() const;
  TrainConfig train_config() const;
  SplitMode split() const;

  /// Range checks of every section. Throws InvalidSpecError.
  void validate() const;
};

/// Fully-qualified names of every accepted key, in serialization order.
std::vector<std::string> config_keys();

/// Applies one `key = value` assignment. Throws UnknownKeyError (with the
/// nearest valid key) or ConfigTypeError.
void set_config_value(RunConfig& config, std::string_view key,
                      std::string_view value);
std::string get_config_value(const RunConfig& config, std::string_view key);

/// Defaults, then the file's assignments, then each `key=value` override.
/// Lines are `key = value`; `#` starts a comment.
RunConfig parse_config(std::string_view file_contents,
                       std::span<const std::string> overrides = {});

/// Every key, one `key = value` line each; parse_config of the result
/// reproduces `config` exactly.
std::string serialize_config(const RunConfig& config);

bool same_config(const RunConfig& a, const RunConfig& b);

}  // namespace dml
