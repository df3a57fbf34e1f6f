#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "doctest.h"
#include "dml/errors.hpp"
#include "dml/losses.hpp"
#include "dml/model.hpp"
#include "oracles.hpp"

using namespace dml;

namespace {

EmbedderSpec mlp_spec(std::size_t in, std::vector<std::size_t> hidden, std::size_t out,
                      std::uint64_t seed = 1) {
  EmbedderSpec s;
  s.kind = EmbedderKind::mlp;
  s.input_dim = in;
  s.hidden_dims = std::move(hidden);
  s.output_dim = out;
  s.init_seed = seed;
  return s;
}

EmbedderSpec table_spec(std::size_t out, std::uint64_t seed = 1) {
  EmbedderSpec s;
  s.kind = EmbedderKind::table;
  s.output_dim = out;
  s.init_seed = seed;
  return s;
}

// Dense forward written directly from the layer equations.
Matrix dense_forward(const EmbedderSpec& spec, const ParamVector& p, const Matrix& x) {
  Matrix cur = x;
  const std::size_t layers = spec.hidden_dims.size() + 1;
  for (std::size_t l = 0; l < layers; ++l) {
    const auto w = p.segment("layer" + std::to_string(l) + ".weight");
    const auto b = p.segment("layer" + std::to_string(l) + ".bias");
    const std::size_t out = b.size(), in = cur.cols;
    Matrix next(cur.rows, out);
    for (std::size_t r = 0; r < cur.rows; ++r) {
      for (std::size_t o = 0; o < out; ++o) {
        long double acc = b[o];
        for (std::size_t i = 0; i < in; ++i) acc += static_cast<long double>(w[o * in + i]) * cur(r, i);
        double v = static_cast<double>(acc);
        if (l + 1 < layers) v = std::max(0.0, v);
        next(r, o) = v;
      }
    }
    cur = next;
  }
  return cur;
}

}  // namespace

TEST_CASE("spec validation") {
  EmbedderSpec s = mlp_spec(8, {16}, 1);
  CHECK_THROWS_AS(s.validate(), InvalidSpecError);
  s = mlp_spec(0, {16}, 4);
  CHECK_THROWS_AS(s.validate(), InvalidSpecError);
  s = mlp_spec(8, {0}, 4);
  CHECK_THROWS_AS(s.validate(), InvalidSpecError);
  CHECK(parse_embedder_kind("table") == EmbedderKind::table);
  CHECK_THROWS_AS(parse_embedder_kind("cnn"), InvalidSpecError);
}

TEST_CASE("init_model is deterministic and sized by the layout") {
  const auto s = mlp_spec(8, {16}, 4, 99);
  const ParamVector a = init_model(s, 0), b = init_model(s, 0);
  CHECK(a == b);
  // 8*16 + 16 + 16*4 + 4
  CHECK(a.values.size() == 212);
  CHECK(a.layout.total() == 212);
  CHECK(a.layout.is_contiguous());
  CHECK(init_model(mlp_spec(8, {16}, 4, 100), 0).values != a.values);

  const ParamVector t = init_model(table_spec(3), 4);
  CHECK(t.values.size() == 12);
  CHECK(t.layout.segments.size() == 1);
  CHECK(t.layout.segments[0].rows == 4);
  CHECK(t.layout.segments[0].cols == 3);
}

TEST_CASE("mlp init: zero biases and weight scale sqrt(2 / fan_in)") {
  const auto s = mlp_spec(200, {300}, 8, 5);
  const ParamVector p = init_model(s, 0);
  for (double b : p.segment("layer0.bias")) CHECK(b == 0.0);
  const auto w = p.segment("layer0.weight");
  double sq = 0;
  for (double v : w) sq += v * v;
  const double stdev = std::sqrt(sq / static_cast<double>(w.size()));
  CHECK(stdev == doctest::Approx(std::sqrt(2.0 / 200)).epsilon(0.02));
}

TEST_CASE("init_proxies") {
  CHECK(init_proxies(5, 3, 8).proxies == init_proxies(5, 3, 8).proxies);
  CHECK(init_proxies(5, 3, 8).proxies != init_proxies(5, 3, 9).proxies);

  const ProxySet big = init_proxies(1000, 64, 1);
  double total = 0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < 1000; i += 3) {
    for (std::size_t j = i + 1; j < 1000; j += 7) {
      total += std::abs(static_cast<double>(oracle::sim(big.proxies, i, big.proxies, j)));
      ++pairs;
    }
  }
  CHECK(total / static_cast<double>(pairs) < 0.2);

  // Regression fixture; depends on libstdc++'s normal_distribution.
  const ProxySet p = init_proxies(2, 2, 2024);
  CHECK(p.proxies.data == std::vector<double>{1.267525262480713, 0.48463767039496708,
                                              -0.86029753861470992, -1.2166635819871594});
}

TEST_CASE("combine and extract proxies") {
  const ParamVector m = init_model(table_spec(3), 4);
  const ProxySet p = init_proxies(2, 3, 1);
  const ParamVector all = combine_params(m, p);
  CHECK(all.values.size() == 18);
  CHECK(all.layout.find(kProxySegment) != nullptr);
  CHECK(extract_proxies(all).proxies == p.proxies);
}

TEST_CASE("table forward is an identity lookup") {
  const auto s = table_spec(3);
  const ParamVector p = init_model(s, 5);
  const std::vector<std::size_t> idx{4, 0, 2};
  const Matrix e = forward_embed(s, p.layout, p.values, Matrix{}, idx);
  for (std::size_t r = 0; r < idx.size(); ++r) {
    for (std::size_t c = 0; c < 3; ++c) CHECK(e(r, c) == p.values[idx[r] * 3 + c]);
  }
  const std::vector<std::size_t> bad{5};
  CHECK_THROWS_AS(forward_embed(s, p.layout, p.values, Matrix{}, bad), IndexOutOfRangeError);
}

TEST_CASE("mlp forward matches a direct dense evaluation") {
  std::mt19937_64 rng(3);
  const auto s = mlp_spec(6, {10, 7}, 4, 3);
  ParamVector p = init_model(s, 0);
  std::normal_distribution<double> n(0, 0.3);
  for (double& v : p.values) v += n(rng);  // nonzero biases too
  const Matrix x = oracle::random_matrix(9, 6, rng);
  std::vector<std::size_t> idx{0, 3, 8, 3};
  const Matrix e = forward_embed(s, p.layout, p.values, x, idx);
  Matrix picked(idx.size(), 6);
  for (std::size_t r = 0; r < idx.size(); ++r) {
    for (std::size_t c = 0; c < 6; ++c) picked(r, c) = x(idx[r], c);
  }
  const Matrix ref = dense_forward(s, p, picked);
  for (std::size_t i = 0; i < e.data.size(); ++i) CHECK(std::abs(e.data[i] - ref.data[i]) <= 1e-13);

  const Matrix narrow = oracle::random_matrix(9, 5, rng);
  CHECK_THROWS_AS(forward_embed(s, p.layout, p.values, narrow, idx), DimensionMismatchError);
}

TEST_CASE("all-zero mlp yields zero embeddings that the loss rejects") {
  const auto s = mlp_spec(4, {5}, 3);
  ParamVector p = init_model(s, 0);
  std::fill(p.values.begin(), p.values.end(), 0.0);
  std::mt19937_64 rng(1);
  const Matrix x = oracle::random_matrix(3, 4, rng);
  const std::vector<std::size_t> idx{0, 1, 2};
  const Matrix e = forward_embed(s, p.layout, p.values, x, idx);
  for (double v : e.data) CHECK(v == 0.0);
  EmbeddingBatch b{e, {0, 1, 0}};
  CHECK_THROWS_AS(proxy_anchor_forward(b, init_proxies(2, 3, 1), {}), ZeroNormError);
}

TEST_CASE("table backward: identity rows and accumulation on duplicates") {
  const auto s = table_spec(2);
  const ParamVector p = init_model(s, 3);
  const std::vector<std::size_t> idx{2, 0, 2};
  Matrix g(3, 2);
  g.data = {1, 2, 3, 4, 5, 6};
  const auto grad = backward_embed(s, p.layout, p.values, Matrix{}, idx, g);
  CHECK(grad == std::vector<double>{3, 4, 0, 0, 6, 8});
}

TEST_CASE("loss through the mlp matches central differences") {
  std::mt19937_64 rng(21);
  const auto s = mlp_spec(5, {7}, 4, 21);
  ParamVector model = init_model(s, 0);
  std::normal_distribution<double> n(0, 0.1);
  for (double& v : model.values) v += n(rng);
  const ParamVector all = combine_params(model, init_proxies(3, 4, 2));
  const Matrix x = oracle::random_matrix(8, 5, rng);
  const std::vector<std::size_t> idx{0, 1, 2, 3, 4, 5, 6, 7};
  const std::vector<int> labels{0, 1, 2, 0, 1, 2, 0, 1};

  auto loss = [&](const std::vector<double>& v) {
    ParamVector q = all;
    q.values = v;
    EmbeddingBatch b{forward_embed(s, q.layout, q.values, x, idx), labels};
    return evaluate_loss(LossKind::proxy_anchor, b, extract_proxies(q), {});
  };
  const LossResult r = loss(all.values);
  std::vector<double> grad = backward_embed(s, all.layout, all.values, x, idx, r.grad_embeddings);
  grad.insert(grad.end(), r.grad_proxies.data.begin(), r.grad_proxies.data.end());
  const auto fd = oracle::central_difference(
      [&](std::vector<double>& v) { return loss(v).value; }, all.values);
  CHECK(oracle::max_relative_error(grad, fd) <= 1e-5);
}

TEST_CASE("checkpoint round trip") {
  const auto dir = std::filesystem::temp_directory_path() / "dml_test_model";
  std::filesystem::create_directories(dir);
  const ParamVector p = combine_params(init_model(mlp_spec(4, {6}, 3), 0), init_proxies(5, 3, 7));
  save_checkpoint(dir / "a.ckpt", p);
  CHECK(load_checkpoint(dir / "a.ckpt") == p);

  std::ofstream(dir / "bad.ckpt") << "not a checkpoint\n";
  CHECK_THROWS_AS(load_checkpoint(dir / "bad.ckpt"), CheckpointFormatError);
  CHECK_THROWS_AS(load_checkpoint(dir / "missing.ckpt"), IoError);

  // Truncated payload.
  std::ifstream in(dir / "a.ckpt", std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(in)), {});
  std::ofstream(dir / "short.ckpt", std::ios::binary) << bytes.substr(0, bytes.size() - 8);
  CHECK_THROWS_AS(load_checkpoint(dir / "short.ckpt"), CheckpointFormatError);
  std::filesystem::remove_all(dir);
}
