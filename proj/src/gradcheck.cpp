#include "dml/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "dml/errors.hpp"

namespace dml {

namespace {

constexpr std::size_t kMlpInputDim = 6;
constexpr std::size_t kMlpHidden = 8;
constexpr std::size_t kMaxAttempts = 200;

bool needs_tuples(LossKind kind) {
  return kind == LossKind::triplet_semihard || kind == LossKind::npair ||
         kind == LossKind::lifted_structure || kind == LossKind::multi_similarity;
}

std::vector<double> central_differences(const GradcheckInstance& inst, double h) {
  std::vector<double> theta = inst.params.values;
  std::vector<double> out(theta.size());
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double saved = theta[i];
    theta[i] = saved + h;
    const double up = instance_loss(inst, theta);
    theta[i] = saved - h;
    const double down = instance_loss(inst, theta);
    theta[i] = saved;
    out[i] = (up - down) / (2.0 * h);
  }
  return out;
}

}  // namespace

std::optional<GradcheckInstance> make_gradcheck_instance(LossKind loss,
                                                         EmbedderKind model,
                                                         std::size_t n,
                                                         std::size_t c,
                                                         std::size_t d, Rng& rng) {
  if (needs_tuples(loss) && n < 3) return std::nullopt;
  GradcheckInstance inst;
  inst.loss = loss;
  inst.spec.kind = model;
  inst.spec.output_dim = d;
  inst.spec.input_dim = kMlpInputDim;
  inst.spec.hidden_dims = {kMlpHidden};
  inst.spec.init_seed = rng();

  // Pair losses: round-robin over min(C, N/2) classes so that every class
  // present has a positive. Proxy losses: uniform labels over C.
  if (is_proxy_loss(loss)) {
    std::uniform_int_distribution<int> pick(0, static_cast<int>(c) - 1);
    for (std::size_t i = 0; i < n; ++i) inst.labels.push_back(pick(rng));
  } else {
    const std::size_t classes = std::max<std::size_t>(2, std::min(c, n / 2));
    for (std::size_t i = 0; i < n; ++i) inst.labels.push_back(static_cast<int>(i % classes));
    std::shuffle(inst.labels.begin(), inst.labels.end(), rng);
  }

  const ParamVector m = init_model(inst.spec, n);
  inst.params = combine_params(m, init_proxies(c, d, rng()));
  for (std::size_t i = 0; i < n; ++i) inst.indices.push_back(i);
  if (model == EmbedderKind::mlp) {
    inst.features = Matrix(n, kMlpInputDim);
    std::normal_distribution<double> unit(0.0, 1.0);
    for (double& v : inst.features.data) v = unit(rng);
    // Small random biases keep ReLU units off exact zero.
    for (const Segment& s : inst.params.layout.segments) {
      if (!s.name.ends_with(".bias")) continue;
      for (std::size_t i = 0; i < s.size(); ++i) inst.params.values[s.offset + i] = 0.1 * unit(rng);
    }
  }
  return inst;
}

double instance_loss(const GradcheckInstance& inst, std::span<const double> params) {
  ParamVector p{std::vector<double>(params.begin(), params.end()), inst.params.layout};
  EmbeddingBatch batch{forward_embed(inst.spec, p.layout, p.values, inst.features, inst.indices),
                       inst.labels};
  return evaluate_loss(inst.loss, batch, extract_proxies(p), inst.config).value;
}

std::vector<double> instance_gradient(const GradcheckInstance& inst) {
  const ParamVector& p = inst.params;
  EmbeddingBatch batch{forward_embed(inst.spec, p.layout, p.values, inst.features, inst.indices),
                       inst.labels};
  const LossResult r = evaluate_loss(inst.loss, batch, extract_proxies(p), inst.config);
  std::vector<double> g = backward_embed(inst.spec, p.layout, p.values, inst.features,
                                         inst.indices, r.grad_embeddings);
  g.insert(g.end(), r.grad_proxies.data.begin(), r.grad_proxies.data.end());
  return g;
}

double gradient_relative_error(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionMismatchError("gradient lengths differ");
  double diff = 0.0;
  double scale = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff = std::max(diff, std::abs(a[i] - b[i]));
    scale = std::max({scale, std::abs(a[i]), std::abs(b[i])});
  }
  return scale == 0.0 ? 0.0 : diff / scale;
}

bool GradcheckSummary::passed(double tolerance) const {
  for (const auto& [loss, err] : max_by_loss) {
    if (!(err <= tolerance)) return false;
  }
  return instances > 0;
}

GradcheckSummary run_gradcheck(std::uint64_t seed, std::size_t per_cell, double step) {
  GradcheckSummary summary;
  Rng rng(seed);
  for (LossKind loss : kAllLossKinds) {
    summary.max_by_loss[loss] = 0.0;
    for (EmbedderKind model : {EmbedderKind::table, EmbedderKind::mlp}) {
      for (std::size_t n : {2, 8, 32}) {
        for (std::size_t c : {2, 5}) {
          for (std::size_t d : {2, 16}) {
            GradcheckCase gc{loss, model, n, c, d};
            for (std::size_t k = 0; k < per_cell; ++k) {
              for (std::size_t attempt = 0; attempt < kMaxAttempts; ++attempt) {
                auto inst = make_gradcheck_instance(loss, model, n, c, d, rng);
                if (!inst) break;
                const auto fd = central_differences(*inst, step);
                const auto fd_half = central_differences(*inst, step / 2);
                if (gradient_relative_error(fd, fd_half) > 1e-6) {
                  ++gc.rejected;
                  continue;
                }
                const auto analytic = instance_gradient(*inst);
                gc.max_rel_error = std::max(gc.max_rel_error,
                                            gradient_relative_error(analytic, fd));
                ++gc.instances;
                break;
              }
            }
            if (gc.instances == 0) continue;
            summary.instances += gc.instances;
            summary.max_by_loss[loss] = std::max(summary.max_by_loss[loss], gc.max_rel_error);
            summary.cases.push_back(gc);
          }
        }
      }
    }
  }
  return summary;
}

}  // namespace dml
