#include "dml/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "dml/errors.hpp"

namespace dml {

void SyntheticDatasetSpec::validate() const {
  if (num_classes < 2) throw InvalidSpecError("num_classes must be at least 2");
  if (samples_per_class < 2) {
    throw InvalidSpecError("samples_per_class must be at least 2");
  }
  if (feature_dim < 2) throw InvalidSpecError("feature_dim must be at least 2");
  if (!(cluster_spread >= 0.0)) {
    throw InvalidSpecError("cluster_spread must be nonnegative");
  }
  if (!(center_separation > 0.0)) {
    throw InvalidSpecError("center_separation must be positive");
  }
  if (!(noise_rate >= 0.0 && noise_rate < 1.0)) {
    throw InvalidSpecError("noise_rate must lie in [0, 1)");
  }
}

Dataset generate_dataset(const SyntheticDatasetSpec& spec) {
  spec.validate();
  const std::size_t m = spec.num_classes * spec.samples_per_class;
  Dataset ds;
  ds.num_classes = spec.num_classes;
  ds.features = Matrix(m, spec.feature_dim);
  ds.clean_labels.resize(m);

  Rng rng(spec.seed);
  std::normal_distribution<double> unit(0.0, 1.0);
  Matrix centers(spec.num_classes, spec.feature_dim);
  for (double& v : centers.data) v = spec.center_separation * unit(rng);

  std::size_t k = 0;
  for (std::size_t c = 0; c < spec.num_classes; ++c) {
    for (std::size_t i = 0; i < spec.samples_per_class; ++i, ++k) {
      ds.clean_labels[k] = static_cast<int>(c);
      for (std::size_t j = 0; j < spec.feature_dim; ++j) {
        ds.features(k, j) = centers(c, j) + spec.cluster_spread * unit(rng);
      }
    }
  }

  ds.observed_labels = ds.clean_labels;
  const auto flips = static_cast<std::size_t>(
      std::llround(spec.noise_rate * static_cast<double>(m)));
  if (flips > 0) {
    std::vector<std::size_t> order(m);
    for (std::size_t i = 0; i < m; ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), rng);
    std::uniform_int_distribution<int> offset(
        1, static_cast<int>(spec.num_classes) - 1);
    const int c = static_cast<int>(spec.num_classes);
    for (std::size_t f = 0; f < flips; ++f) {
      const std::size_t idx = order[f];
      ds.observed_labels[idx] = (ds.clean_labels[idx] + offset(rng)) % c;
    }
  }
  return ds;
}

Dataset subset(const Dataset& ds, std::span<const std::size_t> indices) {
  Dataset out;
  out.num_classes = ds.num_classes;
  out.features = Matrix(indices.size(), ds.features.cols);
  for (std::size_t r = 0; r < indices.size(); ++r) {
    if (indices[r] >= ds.size()) {
      throw IndexOutOfRangeError("subset index out of range");
    }
    const auto src = ds.features.row(indices[r]);
    std::copy(src.begin(), src.end(), out.features.row(r).begin());
    out.clean_labels.push_back(ds.clean_labels[indices[r]]);
    out.observed_labels.push_back(ds.observed_labels[indices[r]]);
  }
  return out;
}

std::string_view to_string(SamplerKind kind) {
  return kind == SamplerKind::uniform_random ? "uniform_random"
                                             : "class_balanced";
}

namespace {

// Pool members grouped by observed label, in pool order; classes ascending.
std::map<int, std::vector<std::size_t>> group_by_label(
    const Dataset& ds, std::span<const std::size_t> pool) {
  std::map<int, std::vector<std::size_t>> groups;
  for (std::size_t idx : pool) groups[ds.observed_labels.at(idx)].push_back(idx);
  return groups;
}

}  // namespace

std::vector<std::size_t> sample_batch(const Dataset& ds,
                                      std::span<const std::size_t> pool,
                                      std::size_t batch_size,
                                      const SamplerSpec& sampler, Rng& rng) {
  if (batch_size == 0 || batch_size > pool.size()) {
    throw InvalidBatchSpecError("batch_size " + std::to_string(batch_size) +
                                " must lie in [1, " +
                                std::to_string(pool.size()) + "]");
  }
  if (sampler.kind == SamplerKind::uniform_random) {
    std::vector<std::size_t> all(pool.begin(), pool.end());
    std::shuffle(all.begin(), all.end(), rng);
    all.resize(batch_size);
    return all;
  }

  const std::size_t m = sampler.m_per_class;
  if (m < 1 || batch_size % m != 0) {
    throw InvalidBatchSpecError("class_balanced needs batch_size divisible by m_per_class");
  }
  const std::size_t num_classes = batch_size / m;
  std::vector<std::vector<std::size_t>> eligible;
  for (auto& [label, members] : group_by_label(ds, pool)) {
    if (members.size() >= m) eligible.push_back(std::move(members));
  }
  if (eligible.size() < num_classes) {
    throw InvalidBatchSpecError(
        "class_balanced needs " + std::to_string(num_classes) +
        " classes with at least " + std::to_string(m) + " samples, found " +
        std::to_string(eligible.size()));
  }
  std::shuffle(eligible.begin(), eligible.end(), rng);
  std::vector<std::size_t> batch;
  batch.reserve(batch_size);
  for (std::size_t c = 0; c < num_classes; ++c) {
    auto& members = eligible[c];
    std::shuffle(members.begin(), members.end(), rng);
    batch.insert(batch.end(), members.begin(),
                 members.begin() + static_cast<std::ptrdiff_t>(m));
  }
  return batch;
}

std::vector<std::size_t> sample_batch(const Dataset& ds, std::size_t batch_size,
                                      const SamplerSpec& sampler, Rng& rng) {
  std::vector<std::size_t> all(ds.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return sample_batch(ds, all, batch_size, sampler, rng);
}

std::vector<std::vector<std::size_t>> epoch_batches(
    const Dataset& ds, std::span<const std::size_t> pool,
    std::size_t batch_size, const SamplerSpec& sampler, Rng& rng) {
  if (batch_size == 0 || batch_size > pool.size()) {
    throw InvalidBatchSpecError("batch_size " + std::to_string(batch_size) +
                                " must lie in [1, " +
                                std::to_string(pool.size()) + "]");
  }
  const std::size_t count = (pool.size() + batch_size - 1) / batch_size;
  std::vector<std::vector<std::size_t>> batches;
  batches.reserve(count);
  if (sampler.kind == SamplerKind::uniform_random) {
    std::vector<std::size_t> order(pool.begin(), pool.end());
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += batch_size) {
      const std::size_t end = std::min(order.size(), start + batch_size);
      batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                           order.begin() + static_cast<std::ptrdiff_t>(end));
    }
    return batches;
  }
  for (std::size_t b = 0; b < count; ++b) {
    batches.push_back(sample_batch(ds, pool, batch_size, sampler, rng));
  }
  return batches;
}

std::size_t auto_m_per_class(const Dataset& ds,
                             std::span<const std::size_t> pool,
                             std::size_t batch_size) {
  const auto groups = group_by_label(ds, pool);
  for (std::size_t m = 2; m <= batch_size; ++m) {
    if (batch_size % m != 0) continue;
    std::size_t eligible = 0;
    for (const auto& [label, members] : groups) {
      if (members.size() >= m) ++eligible;
    }
    if (batch_size / m >= 2 && eligible >= batch_size / m) return m;
  }
  throw InvalidBatchSpecError("no m_per_class fits batch_size " +
                              std::to_string(batch_size) +
                              " with at least two classes per batch");
}

std::string_view to_string(SplitMode mode) {
  switch (mode) {
    case SplitMode::holdout: return "holdout";
    case SplitMode::unseen_classes: return "unseen_classes";
    case SplitMode::train: return "train";
  }
  return "unknown";
}

SplitMode parse_split_mode(std::string_view name) {
  if (name == "holdout") return SplitMode::holdout;
  if (name == "unseen_classes") return SplitMode::unseen_classes;
  if (name == "train") return SplitMode::train;
  throw InvalidSpecError("unknown split mode '" + std::string(name) + "'");
}

Split make_split(const Dataset& ds, SplitMode mode) {
  Split split;
  split.mode = mode;
  std::vector<std::vector<std::size_t>> by_class(ds.num_classes);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    by_class.at(static_cast<std::size_t>(ds.clean_labels[i])).push_back(i);
  }
  switch (mode) {
    case SplitMode::train:
      for (std::size_t i = 0; i < ds.size(); ++i) split.train.push_back(i);
      split.eval = split.train;
      break;
    case SplitMode::holdout:
      for (const auto& members : by_class) {
        const std::size_t held = std::max<std::size_t>(1, members.size() / 4);
        const std::size_t kept = members.size() - held;
        split.train.insert(split.train.end(), members.begin(),
                           members.begin() + static_cast<std::ptrdiff_t>(kept));
        split.eval.insert(split.eval.end(),
                          members.begin() + static_cast<std::ptrdiff_t>(kept),
                          members.end());
      }
      break;
    case SplitMode::unseen_classes: {
      const std::size_t held = std::max<std::size_t>(1, ds.num_classes / 4);
      const std::size_t kept = ds.num_classes - held;
      for (std::size_t c = 0; c < ds.num_classes; ++c) {
        auto& dst = c < kept ? split.train : split.eval;
        dst.insert(dst.end(), by_class[c].begin(), by_class[c].end());
      }
      break;
    }
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.eval.begin(), split.eval.end());
  return split;
}

void write_dataset_csv(const std::filesystem::path& path, const Dataset& ds) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  for (std::size_t j = 0; j < ds.features.cols; ++j) out << "feature_" << j << ',';
  out << "clean_label,observed_label\n";
  char buf[32];
  for (std::size_t i = 0; i < ds.size(); ++i) {
    for (std::size_t j = 0; j < ds.features.cols; ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", ds.features(i, j));
      out << buf << ',';
    }
    out << ds.clean_labels[i] << ',' << ds.observed_labels[i] << '\n';
  }
}

Dataset read_dataset_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw IoError(path.string() + " is empty");
  const auto columns = static_cast<std::size_t>(std::count(line.begin(), line.end(), ',')) + 1;
  if (columns < 3 || !line.ends_with("clean_label,observed_label")) {
    throw IoError(path.string() + " has an unexpected header");
  }
  const std::size_t dim = columns - 2;
  Dataset ds;
  std::vector<double> values;
  int max_label = -1;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string cell;
    std::size_t col = 0;
    while (std::getline(ls, cell, ',')) {
      try {
        if (col < dim) {
          values.push_back(std::stod(cell));
        } else if (col == dim) {
          ds.clean_labels.push_back(std::stoi(cell));
        } else {
          ds.observed_labels.push_back(std::stoi(cell));
        }
      } catch (const std::exception&) {
        throw IoError("unparsable cell '" + cell + "' in " + path.string());
      }
      ++col;
    }
    if (col != columns) throw IoError("ragged row in " + path.string());
    max_label = std::max({max_label, ds.clean_labels.back(), ds.observed_labels.back()});
  }
  ds.features = Matrix(ds.clean_labels.size(), dim);
  ds.features.data = std::move(values);
  ds.num_classes = static_cast<std::size_t>(max_label + 1);
  return ds;
}

}  // namespace dml
