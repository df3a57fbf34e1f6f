#include <algorithm>
#include <filesystem>
#include <map>
#include <fstream>
#include <numeric>
#include <set>

#include "doctest.h"
#include "dml/data.hpp"
#include "dml/errors.hpp"

using namespace dml;

namespace {

SyntheticDatasetSpec small_spec(double noise = 0.0, std::uint64_t seed = 4) {
  SyntheticDatasetSpec s;
  s.num_classes = 5;
  s.samples_per_class = 8;
  s.feature_dim = 4;
  s.noise_rate = noise;
  s.seed = seed;
  return s;
}

}  // namespace

TEST_CASE("dataset spec validation") {
  auto s = small_spec();
  s.num_classes = 1;
  CHECK_THROWS_AS(s.validate(), InvalidSpecError);
  s = small_spec(1.0);
  CHECK_THROWS_AS(s.validate(), InvalidSpecError);
  s = small_spec();
  s.cluster_spread = -1;
  CHECK_THROWS_AS(s.validate(), InvalidSpecError);
  s = small_spec();
  s.samples_per_class = 1;
  CHECK_THROWS_AS(s.validate(), InvalidSpecError);
}

TEST_CASE("generation is deterministic and class-major") {
  const Dataset a = generate_dataset(small_spec()), b = generate_dataset(small_spec());
  CHECK(a.features == b.features);
  CHECK(a.clean_labels == b.clean_labels);
  CHECK(a.size() == 40);
  CHECK(a.features.cols == 4);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a.clean_labels[i] == static_cast<int>(i / 8));
  CHECK(a.observed_labels == a.clean_labels);
  CHECK(generate_dataset(small_spec(0, 5)).features != a.features);
}

TEST_CASE("label noise flips exactly round(rate * M) labels, never to themselves") {
  for (double rate : {0.05, 0.2, 0.5, 0.9}) {
    const Dataset d = generate_dataset(small_spec(rate));
    std::size_t flipped = 0;
    for (std::size_t i = 0; i < d.size(); ++i) {
      if (d.observed_labels[i] != d.clean_labels[i]) ++flipped;
      CHECK(d.observed_labels[i] >= 0);
      CHECK(d.observed_labels[i] < 5);
    }
    CHECK(flipped == static_cast<std::size_t>(std::llround(rate * 40)));
    CHECK(d.features == generate_dataset(small_spec()).features);
  }
}

TEST_CASE("zero spread puts every sample on its center") {
  auto s = small_spec();
  s.cluster_spread = 0;
  const Dataset d = generate_dataset(s);
  for (std::size_t i = 0; i < d.size(); ++i) {
    const std::size_t first = (i / 8) * 8;
    for (std::size_t c = 0; c < 4; ++c) CHECK(d.features(i, c) == d.features(first, c));
  }
}

TEST_CASE("well separated clusters are classified perfectly by their nearest center") {
  SyntheticDatasetSpec s;
  s.num_classes = 3;
  s.samples_per_class = 20;
  s.feature_dim = 8;
  s.cluster_spread = 0.1;
  s.center_separation = 3.0;
  s.seed = 12;
  const Dataset d = generate_dataset(s);
  // Empirical centers from the class means.
  Matrix centers(3, 8);
  for (std::size_t i = 0; i < d.size(); ++i) {
    for (std::size_t c = 0; c < 8; ++c) centers(d.clean_labels[i], c) += d.features(i, c) / 20;
  }
  std::size_t correct = 0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    double best = 1e300;
    int arg = -1;
    for (int k = 0; k < 3; ++k) {
      double dist = 0;
      for (std::size_t c = 0; c < 8; ++c) dist += std::pow(d.features(i, c) - centers(k, c), 2);
      if (dist < best) best = dist, arg = k;
    }
    correct += arg == d.clean_labels[i];
  }
  CHECK(correct == d.size());
}

TEST_CASE("uniform sampler draws without replacement") {
  const Dataset d = generate_dataset(small_spec());
  Rng rng(1);
  auto all = sample_batch(d, 40, {SamplerKind::uniform_random, 2}, rng);
  std::sort(all.begin(), all.end());
  for (std::size_t i = 0; i < 40; ++i) CHECK(all[i] == i);
  const auto b = sample_batch(d, 13, {SamplerKind::uniform_random, 2}, rng);
  CHECK(std::set<std::size_t>(b.begin(), b.end()).size() == 13);
  CHECK_THROWS_AS(sample_batch(d, 41, {SamplerKind::uniform_random, 2}, rng), InvalidBatchSpecError);
  CHECK_THROWS_AS(sample_batch(d, 0, {SamplerKind::uniform_random, 2}, rng), InvalidBatchSpecError);
}

TEST_CASE("class-balanced sampler structure") {
  const Dataset d = generate_dataset(small_spec());
  Rng rng(2);
  for (int t = 0; t < 20; ++t) {
    const auto b = sample_batch(d, 6, {SamplerKind::class_balanced, 2}, rng);
    CHECK(std::set<std::size_t>(b.begin(), b.end()).size() == 6);
    std::map<int, int> per_class;
    for (std::size_t i : b) ++per_class[d.observed_labels[i]];
    CHECK(per_class.size() == 3);
    for (const auto& [label, count] : per_class) CHECK(count == 2);
  }
  CHECK_THROWS_AS(sample_batch(d, 7, {SamplerKind::class_balanced, 2}, rng), InvalidBatchSpecError);
  CHECK_THROWS_AS(sample_batch(d, 12, {SamplerKind::class_balanced, 2}, rng), InvalidBatchSpecError);
  CHECK_THROWS_AS(sample_batch(d, 18, {SamplerKind::class_balanced, 9}, rng), InvalidBatchSpecError);
}

TEST_CASE("fixed rng seed gives the same batches") {
  const Dataset d = generate_dataset(small_spec());
  for (SamplerKind k : {SamplerKind::uniform_random, SamplerKind::class_balanced}) {
    Rng a(77), b(77);
    CHECK(sample_batch(d, 8, {k, 2}, a) == sample_batch(d, 8, {k, 2}, b));
  }
}

TEST_CASE("uniform epochs visit every sample once") {
  const Dataset d = generate_dataset(small_spec());
  std::vector<std::size_t> pool(40);
  std::iota(pool.begin(), pool.end(), 0);
  Rng rng(3);
  const auto batches = epoch_batches(d, pool, 12, {SamplerKind::uniform_random, 2}, rng);
  CHECK(batches.size() == 4);
  CHECK(batches.back().size() == 4);
  std::vector<std::size_t> seen;
  for (const auto& b : batches) seen.insert(seen.end(), b.begin(), b.end());
  std::sort(seen.begin(), seen.end());
  CHECK(seen == pool);
  const auto balanced = epoch_batches(d, pool, 12, {SamplerKind::class_balanced, 3}, rng);
  CHECK(balanced.size() == 4);
  for (const auto& b : balanced) CHECK(b.size() == 12);
}

TEST_CASE("auto m_per_class") {
  const Dataset d = generate_dataset(small_spec());
  std::vector<std::size_t> pool(40);
  std::iota(pool.begin(), pool.end(), 0);
  CHECK(auto_m_per_class(d, pool, 10) == 2);
  CHECK(auto_m_per_class(d, pool, 15) == 3);
  CHECK(auto_m_per_class(d, pool, 40) == 8);
  CHECK_THROWS_AS(auto_m_per_class(d, pool, 7), InvalidBatchSpecError);
}

TEST_CASE("splits") {
  const Dataset d = generate_dataset(small_spec());
  const Split h = make_split(d, SplitMode::holdout);
  CHECK(h.train.size() == 30);
  CHECK(h.eval.size() == 10);
  for (std::size_t i : h.eval) CHECK(i % 8 >= 6);

  const Split u = make_split(d, SplitMode::unseen_classes);
  std::set<int> train_classes, eval_classes;
  for (std::size_t i : u.train) train_classes.insert(d.clean_labels[i]);
  for (std::size_t i : u.eval) eval_classes.insert(d.clean_labels[i]);
  CHECK(eval_classes == std::set<int>{4});
  CHECK(train_classes.count(4) == 0);
  CHECK(u.train.size() + u.eval.size() == 40);

  const Split t = make_split(d, SplitMode::train);
  CHECK(t.train == t.eval);
  CHECK(t.train.size() == 40);

  CHECK(parse_split_mode("unseen_classes") == SplitMode::unseen_classes);
  CHECK_THROWS_AS(parse_split_mode("zero_shot"), InvalidSpecError);
}

TEST_CASE("subset keeps rows and labels") {
  const Dataset d = generate_dataset(small_spec(0.3));
  const std::vector<std::size_t> idx{3, 17, 39};
  const Dataset s = subset(d, idx);
  CHECK(s.size() == 3);
  CHECK(s.num_classes == 5);
  for (std::size_t r = 0; r < 3; ++r) {
    CHECK(s.observed_labels[r] == d.observed_labels[idx[r]]);
    for (std::size_t c = 0; c < 4; ++c) CHECK(s.features(r, c) == d.features(idx[r], c));
  }
}

TEST_CASE("csv export round trips exactly") {
  const auto dir = std::filesystem::temp_directory_path() / "dml_test_data";
  std::filesystem::create_directories(dir);
  const Dataset d = generate_dataset(small_spec(0.25));
  write_dataset_csv(dir / "d.csv", d);
  const Dataset r = read_dataset_csv(dir / "d.csv");
  CHECK(r.features == d.features);
  CHECK(r.clean_labels == d.clean_labels);
  CHECK(r.observed_labels == d.observed_labels);
  std::ifstream in(dir / "d.csv");
  std::string header;
  std::getline(in, header);
  CHECK(header == "feature_0,feature_1,feature_2,feature_3,clean_label,observed_label");
  CHECK_THROWS_AS(read_dataset_csv(dir / "none.csv"), IoError);
  std::filesystem::remove_all(dir);
}
