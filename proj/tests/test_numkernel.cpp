#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "dml/errors.hpp"
#include "dml/numkernel.hpp"
#include "oracles.hpp"

using dml::cosine_similarity;
using V = std::vector<double>;

TEST_CASE("cosine similarity of a vector with itself is one") {
  const V a{0.3, -1.7, 2.2, 5.0};
  CHECK(cosine_similarity(a, a) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("orthogonal vectors have zero similarity") {
  CHECK(cosine_similarity(V{1, 0}, V{0, 1}) == 0.0);
}

TEST_CASE("cosine similarity matches extended precision evaluation") {
  const V a{1, 2, 3}, b{4, 5, 6};
  const double expected = static_cast<double>(oracle::cosine(a.data(), b.data(), 3));
  CHECK(std::abs(cosine_similarity(a, b) - expected) <= 1e-15);
}

TEST_CASE("cosine similarity stays within [-1, 1] for parallel vectors") {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> n;
  for (int t = 0; t < 200; ++t) {
    V a(9);
    for (double& v : a) v = n(rng);
    V b = a, c = a;
    for (double& v : b) v *= 3.5;
    for (double& v : c) v *= -0.25;
    CHECK(cosine_similarity(a, b) <= 1.0);
    CHECK(cosine_similarity(a, c) >= -1.0);
  }
}

TEST_CASE("zero norm and mismatched dimensions are rejected") {
  CHECK_THROWS_AS(cosine_similarity(V{0, 0}, V{1, 0}), dml::ZeroNormError);
  CHECK_THROWS_AS(cosine_similarity(V{1, 0}, V{1e-13, 0}), dml::ZeroNormError);
  CHECK_THROWS_AS(cosine_similarity(V{1, 0}, V{1, 0, 0}), dml::DimensionMismatchError);
  CHECK_THROWS_AS(dml::l2_normalize(V{0, 0, 0}), dml::ZeroNormError);
  CHECK_THROWS_AS(dml::cosine_similarity_grad(V{0, 0}, V{1, 1}), dml::ZeroNormError);
}

TEST_CASE("l2_normalize yields a unit vector in the same direction") {
  const V u = dml::l2_normalize(V{3, 4});
  CHECK(u[0] == doctest::Approx(0.6));
  CHECK(u[1] == doctest::Approx(0.8));
  CHECK(dml::l2_norm(u) == doctest::Approx(1.0));
}

TEST_CASE("cosine gradient vanishes at a == b") {
  const V a{0.6, 0.8};
  const auto [ga, gb] = dml::cosine_similarity_grad(a, a);
  for (double v : ga) CHECK(std::abs(v) < 1e-15);
  for (double v : gb) CHECK(std::abs(v) < 1e-15);
}

TEST_CASE("cosine gradient for orthogonal unit vectors") {
  const auto [ga, gb] = dml::cosine_similarity_grad(V{1, 0}, V{0, 1});
  CHECK(ga == V{0, 1});
  CHECK(gb == V{1, 0});
}

TEST_CASE("cosine gradient matches central differences") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> n;
  for (int t = 0; t < 50; ++t) {
    V a(5), b(5);
    for (double& v : a) v = n(rng);
    for (double& v : b) v = n(rng);
    const auto [ga, gb] = dml::cosine_similarity_grad(a, b);
    const auto fa = oracle::central_difference([&](V& x) { return cosine_similarity(x, b); }, a);
    const auto fb = oracle::central_difference([&](V& x) { return cosine_similarity(a, x); }, b);
    CHECK(oracle::max_relative_error(ga, fa) <= 1e-5);
    CHECK(oracle::max_relative_error(gb, fb) <= 1e-5);
  }
}

TEST_CASE("accumulate_cosine_grad adds scaled gradients") {
  const V a{1, 2, -1}, b{0.5, -1, 3};
  V ga{1, 1, 1}, gb{0, 0, 0};
  dml::accumulate_cosine_grad(a, b, -2.0, ga, gb);
  const auto [ea, eb] = dml::cosine_similarity_grad(a, b);
  for (int i = 0; i < 3; ++i) {
    CHECK(ga[i] == doctest::Approx(1 - 2 * ea[i]));
    CHECK(gb[i] == doctest::Approx(-2 * eb[i]));
  }
}

TEST_CASE("log_sum_exp") {
  CHECK(dml::log_sum_exp(V{-4.25}) == -4.25);
  CHECK(dml::log_sum_exp(V{1000, 1000}) == doctest::Approx(1000 + std::log(2.0)).epsilon(1e-15));
  const long double direct = std::log(std::exp(1.0L) + std::exp(2.0L) + std::exp(3.0L));
  CHECK(std::abs(dml::log_sum_exp(V{1, 2, 3}) - static_cast<double>(direct)) <= 1e-15);
  CHECK_THROWS_AS(dml::log_sum_exp(V{}), dml::EmptyInputError);
  CHECK(std::isfinite(dml::log_sum_exp(V{-1000, -1001})));
}

TEST_CASE("log1p_sum_exp") {
  CHECK(dml::log1p_sum_exp(V{}) == 0.0);
  CHECK(dml::log1p_sum_exp(V{0}) == doctest::Approx(std::log(2.0)));
  CHECK(dml::log1p_sum_exp(V{800, 800}) == doctest::Approx(800 + std::log(2.0)).epsilon(1e-15));
  const long double direct = std::log1p(std::exp(-3.0L) + std::exp(0.5L));
  CHECK(std::abs(dml::log1p_sum_exp(V{-3, 0.5}) - static_cast<double>(direct)) <= 1e-15);
  CHECK(dml::log1p_sum_exp(V{-700}) > 0.0);
  CHECK(dml::log1p_sum_exp(V{-800}) == 0.0);  // below the smallest subnormal
}

TEST_CASE("softplus") {
  CHECK(dml::softplus(0) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(std::abs(dml::softplus(1000) - 1000) <= 1e-12);
  const double expected = static_cast<double>(std::log1p(std::exp(-3.2L)));
  CHECK(std::abs(dml::softplus(-3.2) - expected) <= 1e-16);
  CHECK(dml::softplus(-1000) >= 0.0);
}

TEST_CASE("sigmoid is symmetric and saturates without overflow") {
  CHECK(dml::sigmoid(0) == 0.5);
  CHECK(dml::sigmoid(2.5) + dml::sigmoid(-2.5) == doctest::Approx(1.0));
  CHECK(dml::sigmoid(800) == 1.0);
  CHECK(dml::sigmoid(-800) >= 0.0);
}
