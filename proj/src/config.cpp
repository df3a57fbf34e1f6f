#include "dml/config.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <sstream>

#include "dml/errors.hpp"
#include "dml/rng.hpp"

namespace dml {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split_list(std::string_view s) {
  std::vector<std::string_view> items;
  s = trim(s);
  if (s.empty()) return items;
  std::size_t start = 0;
  while (true) {
    const auto comma = s.find(',', start);
    items.push_back(trim(s.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return items;
}

[[noreturn]] void type_error(std::string_view key, std::string_view expected,
                             std::string_view value) {
  throw ConfigTypeError(std::string(key) + " expects " + std::string(expected) +
                        ", got '" + std::string(value) + "'");
}

std::uint64_t parse_uint(std::string_view key, std::string_view v) {
  std::uint64_t out = 0;
  const auto* end = v.data() + v.size();
  auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (v.empty() || ec != std::errc() || ptr != end) {
    type_error(key, "a nonnegative integer", v);
  }
  return out;
}

double parse_double(std::string_view key, std::string_view v) {
  const std::string s(v);
  char* end = nullptr;
  const double out = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size()) type_error(key, "a real number", v);
  return out;
}

bool parse_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  type_error(key, "true or false", v);
}

template <typename Fn>
auto parse_enum(std::string_view key, std::string_view v, std::string_view expected,
                Fn&& fn) {
  try {
    return fn(v);
  } catch (const InvalidSpecError&) {
    type_error(key, expected, v);
  }
}

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

template <typename T, typename Fmt>
std::string join(const std::vector<T>& items, Fmt&& fmt) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i > 0) out += ',';
    out += fmt(items[i]);
  }
  return out;
}

struct KeyDef {
  std::string name;
  std::function<void(RunConfig&, std::string_view key, std::string_view value)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <typename Member>
KeyDef uint_key(std::string name, Member member) {
  return {std::move(name),
          [member](RunConfig& c, std::string_view k, std::string_view v) {
            std::invoke(member, c) =
                static_cast<std::remove_reference_t<decltype(std::invoke(member, c))>>(
                    parse_uint(k, v));
          },
          [member](const RunConfig& c) {
            return std::to_string(std::invoke(member, const_cast<RunConfig&>(c)));
          }};
}

template <typename Member>
KeyDef double_key(std::string name, Member member) {
  return {std::move(name),
          [member](RunConfig& c, std::string_view k, std::string_view v) {
            std::invoke(member, c) = parse_double(k, v);
          },
          [member](const RunConfig& c) {
            return fmt_double(std::invoke(member, const_cast<RunConfig&>(c)));
          }};
}

const std::vector<KeyDef>& registry() {
  static const std::vector<KeyDef> keys = [] {
    std::vector<KeyDef> k;
    k.push_back({"run.tag",
                 [](RunConfig& c, std::string_view key, std::string_view v) {
                   if (v.empty() || v.find_first_of("/\\ ") != std::string_view::npos) {
                     type_error(key, "a nonempty tag without slashes or spaces", v);
                   }
                   c.tag = std::string(v);
                 },
                 [](const RunConfig& c) { return c.tag; }});
    k.push_back(uint_key("run.seed", [](RunConfig& c) -> auto& { return c.seed; }));
    k.push_back(uint_key("run.threads", [](RunConfig& c) -> auto& { return c.threads; }));

    k.push_back(uint_key("data.num_classes", [](RunConfig& c) -> auto& { return c.data.num_classes; }));
    k.push_back(uint_key("data.samples_per_class", [](RunConfig& c) -> auto& { return c.data.samples_per_class; }));
    k.push_back(uint_key("data.feature_dim", [](RunConfig& c) -> auto& { return c.data.feature_dim; }));
    k.push_back(double_key("data.cluster_spread", [](RunConfig& c) -> auto& { return c.data.cluster_spread; }));
    k.push_back(double_key("data.center_separation", [](RunConfig& c) -> auto& { return c.data.center_separation; }));
    k.push_back(double_key("data.noise_rate", [](RunConfig& c) -> auto& { return c.data.noise_rate; }));

    k.push_back({"model.kind",
                 [](RunConfig& c, std::string_view key, std::string_view v) {
                   c.model.kind = parse_enum(key, v, "table or mlp", parse_embedder_kind);
                 },
                 [](const RunConfig& c) { return std::string(to_string(c.model.kind)); }});
    k.push_back({"model.hidden_dims",
                 [](RunConfig& c, std::string_view key, std::string_view v) {
                   std::vector<std::size_t> dims;
                   for (auto item : split_list(v)) dims.push_back(parse_uint(key, item));
                   c.model.hidden_dims = std::move(dims);
                 },
                 [](const RunConfig& c) {
                   return join(c.model.hidden_dims, [](std::size_t d) { return std::to_string(d); });
                 }});
    k.push_back(uint_key("model.output_dim", [](RunConfig& c) -> auto& { return c.model.output_dim; }));

    k.push_back({"train.loss_kind",
                 [](RunConfig& c, std::string_view key, std::string_view v) {
                   c.train.loss_kind = parse_enum(key, v, "a loss kind", parse_loss_kind);
                 },
                 [](const RunConfig& c) { return std::string(to_string(c.train.loss_kind)); }});
    k.push_back(double_key("train.alpha", [](RunConfig& c) -> auto& { return c.train.loss.proxy.alpha; }));
    k.push_back(double_key("train.delta", [](RunConfig& c) -> auto& { return c.train.loss.proxy.delta; }));
    k.push_back(double_key("train.margin", [](RunConfig& c) -> auto& { return c.train.loss.baseline.margin; }));
    k.push_back(double_key("train.lifted_margin", [](RunConfig& c) -> auto& { return c.train.loss.baseline.lifted_margin; }));
    k.push_back(double_key("train.ms_alpha", [](RunConfig& c) -> auto& { return c.train.loss.baseline.ms_alpha; }));
    k.push_back(double_key("train.ms_beta", [](RunConfig& c) -> auto& { return c.train.loss.baseline.ms_beta; }));
    k.push_back(double_key("train.ms_base", [](RunConfig& c) -> auto& { return c.train.loss.baseline.ms_base; }));
    k.push_back(double_key("train.ms_epsilon", [](RunConfig& c) -> auto& { return c.train.loss.baseline.ms_epsilon; }));
    k.push_back(double_key("train.base_lr", [](RunConfig& c) -> auto& { return c.train.base_lr; }));
    k.push_back(double_key("train.proxy_lr_multiplier", [](RunConfig& c) -> auto& { return c.train.proxy_lr_multiplier; }));
    k.push_back(double_key("train.weight_decay", [](RunConfig& c) -> auto& { return c.train.weight_decay; }));
    k.push_back(double_key("train.adam_beta1", [](RunConfig& c) -> auto& { return c.train.adam_beta1; }));
    k.push_back(double_key("train.adam_beta2", [](RunConfig& c) -> auto& { return c.train.adam_beta2; }));
    k.push_back(double_key("train.adam_epsilon", [](RunConfig& c) -> auto& { return c.train.adam_epsilon; }));
    k.push_back(uint_key("train.batch_size", [](RunConfig& c) -> auto& { return c.train.batch_size; }));
    k.push_back(uint_key("train.epochs", [](RunConfig& c) -> auto& { return c.train.epochs; }));
    k.push_back(uint_key("train.eval_every", [](RunConfig& c) -> auto& { return c.train.eval_every; }));
    k.push_back({"train.sampler",
                 [](RunConfig& c, std::string_view key, std::string_view v) {
                   c.train.sampler = parse_enum(key, v, "auto, uniform_random or class_balanced",
                                                parse_sampler_choice);
                 },
                 [](const RunConfig& c) { return std::string(to_string(c.train.sampler)); }});
    k.push_back(uint_key("train.m_per_class", [](RunConfig& c) -> auto& { return c.train.m_per_class; }));
    k.push_back({"train.record_timing",
                 [](RunConfig& c, std::string_view key, std::string_view v) {
                   c.train.record_timing = parse_bool(key, v);
                 },
                 [](const RunConfig& c) { return std::string(c.train.record_timing ? "true" : "false"); }});

    k.push_back({"eval.split",
                 [](RunConfig& c, std::string_view key, std::string_view v) {
                   if (v == "auto") {
                     c.eval.split.reset();
                   } else {
                     c.eval.split = parse_enum(key, v, "auto, holdout, unseen_classes or train",
                                               parse_split_mode);
                   }
                 },
                 [](const RunConfig& c) {
                   return c.eval.split ? std::string(to_string(*c.eval.split)) : std::string("auto");
                 }});
    k.push_back({"eval.ks",
                 [](RunConfig& c, std::string_view key, std::string_view v) {
                   std::vector<std::size_t> ks;
                   for (auto item : split_list(v)) ks.push_back(parse_uint(key, item));
                   c.eval.ks = std::move(ks);
                 },
                 [](const RunConfig& c) {
                   return join(c.eval.ks, [](std::size_t d) { return std::to_string(d); });
                 }});
    k.push_back(double_key("eval.threshold", [](RunConfig& c) -> auto& { return c.eval.threshold; }));
    k.push_back({"eval.checkpoint",
                 [](RunConfig& c, std::string_view, std::string_view v) { c.eval.checkpoint = std::string(v); },
                 [](const RunConfig& c) { return c.eval.checkpoint; }});

    k.push_back({"sweep.axis",
                 [](RunConfig& c, std::string_view, std::string_view v) { c.sweep.axis = std::string(v); },
                 [](const RunConfig& c) { return c.sweep.axis; }});
    k.push_back({"sweep.values",
                 [](RunConfig& c, std::string_view, std::string_view v) {
                   c.sweep.values.clear();
                   for (auto item : split_list(v)) c.sweep.values.emplace_back(item);
                 },
                 [](const RunConfig& c) {
                   return join(c.sweep.values, [](const std::string& s) { return s; });
                 }});
    k.push_back(uint_key("sweep.repeats", [](RunConfig& c) -> auto& { return c.sweep.repeats; }));

    k.push_back({"bench.methods",
                 [](RunConfig& c, std::string_view key, std::string_view v) {
                   std::vector<LossKind> methods;
                   for (auto item : split_list(v)) {
                     methods.push_back(parse_enum(key, item, "a list of loss kinds", parse_loss_kind));
                   }
                   c.bench.methods = std::move(methods);
                 },
                 [](const RunConfig& c) {
                   return join(c.bench.methods, [](LossKind k) { return std::string(to_string(k)); });
                 }});
    k.push_back(uint_key("bench.repeats", [](RunConfig& c) -> auto& { return c.bench.repeats; }));
    return k;
  }();
  return keys;
}

std::size_t edit_distance(std::string_view a, std::string_view b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

const KeyDef& find_key(std::string_view key) {
  const auto& keys = registry();
  for (const KeyDef& k : keys) {
    if (k.name == key) return k;
  }
  const KeyDef* nearest = &keys.front();
  std::size_t best = edit_distance(key, nearest->name);
  for (const KeyDef& k : keys) {
    const std::size_t d = edit_distance(key, k.name);
    if (d < best) {
      best = d;
      nearest = &k;
    }
  }
  throw UnknownKeyError("unknown key '" + std::string(key) + "' (did you mean '" +
                        nearest->name + "'?)");
}

void apply_assignment(RunConfig& config, std::string_view line,
                      std::string_view origin) {
  const auto eq = line.find('=');
  if (eq == std::string_view::npos || trim(line.substr(0, eq)).empty()) {
    throw ConfigSyntaxError(std::string(origin) + ": expected 'key = value', got '" +
                            std::string(line) + "'");
  }
  set_config_value(config, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
}

}  // namespace

SyntheticDatasetSpec RunConfig::dataset_spec() const {
  SyntheticDatasetSpec s = data;
  s.seed = derive_seed(seed, 100);
  return s;
}

EmbedderSpec RunConfig::embedder_spec() const {
  EmbedderSpec s = model;
  s.input_dim = data.feature_dim;
  s.init_seed = derive_seed(seed, 200);
  return s;
}

TrainConfig RunConfig::train_config() const {
  TrainConfig t = train;
  t.seed = derive_seed(seed, 300);
  t.split = split();
  return t;
}

SplitMode RunConfig::split() const {
  if (eval.split) return *eval.split;
  return model.kind == EmbedderKind::table ? SplitMode::train : SplitMode::holdout;
}

void RunConfig::validate() const {
  dataset_spec().validate();
  embedder_spec().validate();
  train_config().validate();
  if (threads == 0) throw InvalidSpecError("run.threads must be at least 1");
  if (eval.ks.empty()) throw InvalidSpecError("eval.ks must not be empty");
  for (std::size_t k : eval.ks) {
    if (k == 0) throw InvalidSpecError("eval.ks entries must be at least 1");
  }
  if (sweep.repeats == 0) throw InvalidSpecError("sweep.repeats must be at least 1");
  if (bench.repeats == 0) throw InvalidSpecError("bench.repeats must be at least 1");
  if (model.kind == EmbedderKind::table && split() != SplitMode::train) {
    throw InvalidSpecError("model.kind = table requires eval.split = train");
  }
}

std::vector<std::string> config_keys() {
  std::vector<std::string> names;
  for (const KeyDef& k : registry()) names.push_back(k.name);
  return names;
}

void set_config_value(RunConfig& config, std::string_view key,
                      std::string_view value) {
  const KeyDef& def = find_key(key);
  def.set(config, def.name, value);
}

std::string get_config_value(const RunConfig& config, std::string_view key) {
  return find_key(key).get(config);
}

RunConfig parse_config(std::string_view file_contents,
                       std::span<const std::string> overrides) {
  RunConfig config;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= file_contents.size()) {
    const auto nl = file_contents.find('\n', start);
    std::string_view line = file_contents.substr(
        start, nl == std::string_view::npos ? std::string_view::npos : nl - start);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    line = trim(line);
    if (!line.empty()) {
      apply_assignment(config, line, "line " + std::to_string(line_no));
    }
    if (nl == std::string_view::npos) break;
    start = nl + 1;
  }
  for (const std::string& o : overrides) apply_assignment(config, o, "--set");
  return config;
}

std::string serialize_config(const RunConfig& config) {
  std::string out;
  for (const KeyDef& k : registry()) {
    out += k.name;
    out += " = ";
    out += k.get(config);
    out += '\n';
  }
  return out;
}

bool same_config(const RunConfig& a, const RunConfig& b) {
  return serialize_config(a) == serialize_config(b);
}

}  // namespace dml
