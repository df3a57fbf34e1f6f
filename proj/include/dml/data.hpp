#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

#include "dml/matrix.hpp"
#include "dml/rng.hpp"

namespace dml {

struct SyntheticDatasetSpec {
  std::size_t num_classes = 20;
  std::size_t samples_per_class = 50;
  std::size_t feature_dim = 32;
  double cluster_spread = 0.5;      // within-class standard deviation
  double center_separation = 2.0;   // standard deviation of class centers
  double noise_rate = 0.0;          // fraction of labels moved to a wrong class
  std::uint64_t seed = 0;

  void validate() const;
};

/// Samples are stored class-major: class 0's samples first, then class 1's.
struct Dataset {
  Matrix features;
  std::vector<int> clean_labels;
  std::vector<int> observed_labels;
  std::size_t num_classes = 0;

  std::size_t size() const { return clean_labels.size(); }
};

/// Class centers ~ N(0, separation^2 I), samples ~ N(center, spread^2 I).
/// Exactly round(noise_rate * M) observed labels are reassigned uniformly to a
/// different class.
Dataset generate_dataset(const SyntheticDatasetSpec& spec);

/// Keeps the listed samples, in order.
Dataset subset(const Dataset& ds, std::span<const std::size_t> indices);

enum class SamplerKind { uniform_random, class_balanced };

std::string_view to_string(SamplerKind kind);

struct SamplerSpec {
  SamplerKind kind = SamplerKind::uniform_random;
  std::size_t m_per_class = 2;  // class_balanced only
};

/// Draws one batch from `pool` (dataset indices). uniform_random samples
/// without replacement; class_balanced picks batch_size / m classes (by
/// observed label) and m distinct samples of each. Throws
/// InvalidBatchSpecError.
std::vector<std::size_t> sample_batch(const Dataset& ds,
                                      std::span<const std::size_t> pool,
                                      std::size_t batch_size,
                                      const SamplerSpec& sampler, Rng& rng);

/// Same as above over every sample of the dataset.
std::vector<std::size_t> sample_batch(const Dataset& ds, std::size_t batch_size,
                                      const SamplerSpec& sampler, Rng& rng);

/// The batches of one epoch: ceil(|pool| / batch_size) of them. uniform_random
/// shuffles the pool and cuts it into consecutive chunks, so every sample is
/// visited once; class_balanced draws each batch independently.
std::vector<std::vector<std::size_t>> epoch_batches(
    const Dataset& ds, std::span<const std::size_t> pool,
    std::size_t batch_size, const SamplerSpec& sampler, Rng& rng);

/// Smallest m >= 2 dividing batch_size such that batch_size / m classes of
/// `pool` have at least m samples each. Throws InvalidBatchSpecError.
std::size_t auto_m_per_class(const Dataset& ds,
                             std::span<const std::size_t> pool,
                             std::size_t batch_size);

enum class SplitMode { holdout, unseen_classes, train };

std::string_view to_string(SplitMode mode);
SplitMode parse_split_mode(std::string_view name);

/// holdout: last 25% of each class (by clean label) is evaluated, the rest
/// trained. unseen_classes: the last 25% of classes are held out entirely.
/// train: every sample is both trained and evaluated.
struct Split {
  SplitMode mode = SplitMode::holdout;
  std::vector<std::size_t> train;
  std::vector<std::size_t> eval;
};

Split make_split(const Dataset& ds, SplitMode mode);

/// CSV columns feature_0..feature_{d-1}, clean_label, observed_label.
void write_dataset_csv(const std::filesystem::path& path, const Dataset& ds);
Dataset read_dataset_csv(const std::filesystem::path& path);

}  // namespace dml
