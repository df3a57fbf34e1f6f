#include "dml/numkernel.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dml/errors.hpp"

namespace dml {

namespace {

void require_same_dim(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw DimensionMismatchError("vector dimensions differ: " +
                                 std::to_string(a.size()) + " vs " +
                                 std::to_string(b.size()));
  }
  if (a.empty()) throw EmptyInputError("zero-dimensional vector");
}

double checked_norm(std::span<const double> a) {
  const double n = l2_norm(a);
  if (!(n >= kNormFloor)) {
    throw ZeroNormError("vector norm " + std::to_string(n) +
                        " is below the floor 1e-12");
  }
  return n;
}

}  // namespace

double dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

double l2_norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

std::vector<double> l2_normalize(std::span<const double> a) {
  const double n = checked_norm(a);
  std::vector<double> out(a.begin(), a.end());
  for (double& v : out) v /= n;
  return out;
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  require_same_dim(a, b);
  const double na = checked_norm(a);
  const double nb = checked_norm(b);
  // Product of norms is commutative in IEEE arithmetic, so s(a,b) == s(b,a).
  const double s = dot(a, b) / (na * nb);
  return std::clamp(s, -1.0, 1.0);
}

std::pair<std::vector<double>, std::vector<double>> cosine_similarity_grad(
    std::span<const double> a, std::span<const double> b) {
  std::vector<double> ga(a.size(), 0.0);
  std::vector<double> gb(b.size(), 0.0);
  accumulate_cosine_grad(a, b, 1.0, ga, gb);
  return {std::move(ga), std::move(gb)};
}

void accumulate_cosine_grad(std::span<const double> a,
                            std::span<const double> b, double scale,
                            std::span<double> grad_a,
                            std::span<double> grad_b) {
  require_same_dim(a, b);
  const double na = checked_norm(a);
  const double nb = checked_norm(b);
  const double inv = 1.0 / (na * nb);
  const double s = dot(a, b) * inv;
  const double ka = s / (na * na);
  const double kb = s / (nb * nb);
  for (std::size_t i = 0; i < a.size(); ++i) {
    grad_a[i] += scale * (b[i] * inv - ka * a[i]);
    grad_b[i] += scale * (a[i] * inv - kb * b[i]);
  }
}

double log_sum_exp(std::span<const double> values) {
  if (values.empty()) throw EmptyInputError("log_sum_exp of an empty sequence");
  const double m = *std::max_element(values.begin(), values.end());
  double acc = 0.0;
  for (double v : values) acc += std::exp(v - m);
  return m + std::log(acc);
}

double log1p_sum_exp(std::span<const double> values) {
  if (values.empty()) return 0.0;
  const double m = *std::max_element(values.begin(), values.end());
  if (m <= 0.0) {
    double acc = 0.0;
    for (double v : values) acc += std::exp(v);
    return std::log1p(acc);
  }
  double acc = std::exp(-m);
  for (double v : values) acc += std::exp(v - m);
  return m + std::log(acc);
}

double softplus(double z) {
  if (z > 0.0) return z + std::log1p(std::exp(-z));
  return std::log1p(std::exp(z));
}

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace dml
