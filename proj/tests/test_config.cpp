#include <algorithm>
#include <string>
#include <vector>

#include "doctest.h"
#include "dml/config.hpp"
#include "dml/errors.hpp"

using namespace dml;

TEST_CASE("empty input gives the documented defaults") {
  const RunConfig c = parse_config("");
  CHECK(c.tag == "run");
  CHECK(c.data.num_classes == 20);
  CHECK(c.data.samples_per_class == 50);
  CHECK(c.data.feature_dim == 32);
  CHECK(c.data.center_separation == 2.0);
  CHECK(c.data.cluster_spread == 0.5);
  CHECK(c.model.output_dim == 16);
  CHECK(c.model.kind == EmbedderKind::table);
  CHECK(!c.eval.split);
  CHECK(c.split() == SplitMode::train);
  CHECK(c.train.loss_kind == LossKind::proxy_anchor);
  CHECK(c.train.loss.proxy.alpha == 32.0);
  CHECK(c.train.loss.proxy.delta == 0.1);
  CHECK(c.train.base_lr == 1e-4);
  CHECK(c.train.proxy_lr_multiplier == 100.0);
  CHECK(c.train.weight_decay == 1e-4);
  CHECK(c.train.batch_size == 50);
  CHECK(c.train.epochs == 40);
  CHECK(c.eval.threshold == 0.9);
  CHECK(c.bench.repeats == 5);
  CHECK(same_config(c, RunConfig{}));
}

TEST_CASE("flags override the file, which overrides defaults") {
  const std::vector<std::string> flags{"train.alpha=64"};
  const RunConfig c = parse_config("train.alpha = 16\ntrain.delta = 0.2\n", flags);
  CHECK(c.train.loss.proxy.alpha == 64.0);
  CHECK(c.train.loss.proxy.delta == 0.2);
  const std::vector<std::string> twice{"train.epochs=3", "train.epochs=5"};
  CHECK(parse_config("", twice).train.epochs == 5);
}

TEST_CASE("unknown keys name the nearest valid key") {
  try {
    parse_config("train.alhpa = 16\n");
    FAIL("expected UnknownKeyError");
  } catch (const UnknownKeyError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("train.alhpa") != std::string::npos);
    CHECK(msg.find("train.alpha") != std::string::npos);
    CHECK(e.category() == "unknown_key");
  }
  const std::vector<std::string> flags{"data.nosie_rate=0.1"};
  CHECK_THROWS_AS(parse_config("", flags), UnknownKeyError);
}

TEST_CASE("type errors name the key") {
  CHECK_THROWS_AS(parse_config("train.epochs = many\n"), ConfigTypeError);
  CHECK_THROWS_AS(parse_config("train.epochs = -3\n"), ConfigTypeError);
  CHECK_THROWS_AS(parse_config("train.alpha = 3x\n"), ConfigTypeError);
  CHECK_THROWS_AS(parse_config("train.loss_kind = softmax\n"), ConfigTypeError);
  CHECK_THROWS_AS(parse_config("train.record_timing = maybe\n"), ConfigTypeError);
  try {
    parse_config("train.batch_size = 1.5\n");
  } catch (const ConfigTypeError& e) {
    CHECK(std::string(e.what()).find("train.batch_size") != std::string::npos);
  }
}

TEST_CASE("syntax errors") {
  CHECK_THROWS_AS(parse_config("train.alpha 16\n"), ConfigSyntaxError);
  CHECK_THROWS_AS(parse_config("= 16\n"), ConfigSyntaxError);
  const std::vector<std::string> flags{"novalue"};
  CHECK_THROWS_AS(parse_config("", flags), ConfigSyntaxError);
}

TEST_CASE("comments, blank lines and whitespace are ignored") {
  const RunConfig c = parse_config("# header\n\n  train.alpha=8   # trailing\r\nrun.tag = x\n");
  CHECK(c.train.loss.proxy.alpha == 8.0);
  CHECK(c.tag == "x");
}

TEST_CASE("list values") {
  const RunConfig c = parse_config(
      "model.hidden_dims = 32, 16\neval.ks = 1,5\nsweep.values = 4, 8,16\n"
      "bench.methods = proxy_anchor, npair\n");
  CHECK(c.model.hidden_dims == std::vector<std::size_t>{32, 16});
  CHECK(c.eval.ks == std::vector<std::size_t>{1, 5});
  CHECK(c.sweep.values == std::vector<std::string>{"4", "8", "16"});
  CHECK(c.bench.methods == std::vector<LossKind>{LossKind::proxy_anchor, LossKind::npair});
  CHECK(parse_config("model.hidden_dims =\n").model.hidden_dims.empty());
}

TEST_CASE("serialization round trips every key") {
  RunConfig c;
  c.tag = "trip";
  c.seed = 123456789012345ULL;
  c.train.loss.proxy.alpha = 0.1 + 0.2;  // not exactly representable in short form
  c.train.base_lr = 3e-5;
  c.data.noise_rate = 1.0 / 3.0;
  c.model.hidden_dims = {7, 5};
  c.sweep.axis = "alpha";
  c.sweep.values = {"16", "32"};
  c.eval.checkpoint = "runs/x/checkpoint.ckpt";
  const RunConfig back = parse_config(serialize_config(c));
  CHECK(same_config(back, c));
  CHECK(serialize_config(back) == serialize_config(c));
  for (const std::string& key : config_keys()) {
    CHECK(get_config_value(back, key) == get_config_value(c, key));
  }
}

TEST_CASE("every key has one home section") {
  const auto keys = config_keys();
  for (const std::string& k : keys) {
    const auto dot = k.find('.');
    REQUIRE(dot != std::string::npos);
    const std::string section = k.substr(0, dot);
    CHECK((section == "run" || section == "data" || section == "model" || section == "train" ||
           section == "eval" || section == "sweep" || section == "bench"));
  }
  std::vector<std::string> sorted = keys;
  std::sort(sorted.begin(), sorted.end());
  CHECK(std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end());
}

TEST_CASE("derived seeds differ per component and follow run.seed") {
  RunConfig a, b;
  b.seed = 1;
  CHECK(a.dataset_spec().seed != a.embedder_spec().init_seed);
  CHECK(a.embedder_spec().init_seed != a.train_config().seed);
  CHECK(a.dataset_spec().seed != b.dataset_spec().seed);
  CHECK(a.embedder_spec().input_dim == a.data.feature_dim);
}

TEST_CASE("validation of the combined config") {
  RunConfig c;
  CHECK_NOTHROW(c.validate());
  c.eval.split = SplitMode::holdout;
  CHECK_THROWS_AS(c.validate(), InvalidSpecError);
  c.eval.split = SplitMode::train;
  CHECK_NOTHROW(c.validate());
  c.eval.split.reset();
  c.model.kind = EmbedderKind::mlp;
  CHECK(c.split() == SplitMode::holdout);
  CHECK(c.train_config().split == SplitMode::holdout);
  CHECK_NOTHROW(c.validate());
  c = {};
  c.train.loss.proxy.alpha = -1;
  CHECK_THROWS_AS(c.validate(), InvalidSpecError);
}

TEST_CASE("eval.split accepts auto and round-trips") {
  CHECK(get_config_value(RunConfig{}, "eval.split") == "auto");
  const RunConfig c = parse_config("eval.split = unseen_classes\nmodel.kind = mlp\n");
  CHECK(c.split() == SplitMode::unseen_classes);
  CHECK(same_config(parse_config(serialize_config(c)), c));
  CHECK(!parse_config("eval.split = auto\n", std::vector<std::string>{}).eval.split);
}
