#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "dml/data.hpp"
#include "dml/losses.hpp"
#include "dml/model.hpp"
#include "dml/rng.hpp"

namespace dml {

/// A random (model, batch, proxies) problem whose loss is a function of one
/// flat ParamVector.
struct GradcheckInstance {
  LossKind loss = LossKind::proxy_anchor;
  EmbedderSpec spec;
  ParamVector params;  // model segments + proxies
  Matrix features;     // mlp inputs (empty for the table kind)
  std::vector<std::size_t> indices;
  std::vector<int> labels;
  LossConfig config;
};

/// Draws an instance of `loss` with N samples, C classes, embedding dim D.
/// Pair losses get every class at least twice where N allows. Returns nullopt
/// when the loss cannot be formed at this N (pair losses that need both
/// positives and negatives at N < 3).
std::optional<GradcheckInstance> make_gradcheck_instance(LossKind loss,
                                                         EmbedderKind model,
                                                         std::size_t n,
                                                         std::size_t c,
                                                         std::size_t d, Rng& rng);

/// Loss value as a function of the flat parameters.
double instance_loss(const GradcheckInstance& inst, std::span<const double> params);

/// Analytic d(loss)/d(params): loss backward composed with backward_embed.
std::vector<double> instance_gradient(const GradcheckInstance& inst);

/// max_i |a_i - b_i| / max(max_i |a_i|, max_i |b_i|). Zero when both vanish.
double gradient_relative_error(std::span<const double> a, std::span<const double> b);

struct GradcheckCase {
  LossKind loss;
  EmbedderKind model;
  std::size_t n, c, d;
  double max_rel_error = 0.0;
  std::size_t instances = 0;
  std::size_t rejected = 0;  // central differences at h and h/2 disagreed
};

struct GradcheckSummary {
  std::vector<GradcheckCase> cases;
  std::map<LossKind, double> max_by_loss;
  std::size_t instances = 0;

  bool passed(double tolerance) const;
};

/// Every loss x {table, mlp} x N in {2, 8, 32} x C in {2, 5} x D in {2, 16},
/// `per_cell` instances each, central differences with step `step`.
GradcheckSummary run_gradcheck(std::uint64_t seed, std::size_t per_cell = 1,
                               double step = 1e-5);

}  // namespace dml
