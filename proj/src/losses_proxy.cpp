#include <cmath>
#include <string>
#include <vector>

#include "dml/errors.hpp"
#include "dml/losses.hpp"
#include "dml/numkernel.hpp"

namespace dml {

namespace {

void validate_proxy_batch(const EmbeddingBatch& batch,
                          const ProxySet& proxies) {
  if (batch.size() == 0) throw EmptyInputError("empty embedding batch");
  if (batch.labels.size() != batch.size()) {
    throw DimensionMismatchError("batch has " + std::to_string(batch.size()) +
                                 " embeddings but " +
                                 std::to_string(batch.labels.size()) +
                                 " labels");
  }
  if (proxies.num_classes() == 0) throw EmptyInputError("empty proxy set");
  if (batch.dim() != proxies.dim()) {
    throw DimensionMismatchError(
        "embedding dimension " + std::to_string(batch.dim()) +
        " differs from proxy dimension " + std::to_string(proxies.dim()));
  }
  const auto num_classes = static_cast<int>(proxies.num_classes());
  for (int label : batch.labels) {
    if (label < 0 || label >= num_classes) {
      throw IndexOutOfRangeError("label " + std::to_string(label) +
                                 " outside [0, " +
                                 std::to_string(num_classes) + ")");
    }
  }
}

// Exponent arguments of one proxy's positive and negative sums, with the
// batch positions they came from.
struct ProxyTerms {
  std::vector<double> pos_args;
  std::vector<std::size_t> pos_index;
  std::vector<double> neg_args;
  std::vector<std::size_t> neg_index;
};

ProxyTerms proxy_terms(const Matrix& sims, const std::vector<int>& labels,
                       std::size_t proxy, const LossHyperparams& hp) {
  ProxyTerms t;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double s = sims(i, proxy);
    if (static_cast<std::size_t>(labels[i]) == proxy) {
      t.pos_args.push_back(-hp.alpha * (s - hp.delta));
      t.pos_index.push_back(i);
    } else {
      t.neg_args.push_back(hp.alpha * (s + hp.delta));
      t.neg_index.push_back(i);
    }
  }
  return t;
}

LossResult compose_proxy_grad(const EmbeddingBatch& batch,
                              const ProxySet& proxies, const Matrix& sim_grad,
                              double value) {
  LossResult r;
  r.value = value;
  r.grad_embeddings = Matrix(batch.size(), batch.dim());
  r.grad_proxies = Matrix(proxies.num_classes(), proxies.dim());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    for (std::size_t c = 0; c < proxies.num_classes(); ++c) {
      const double g = sim_grad(i, c);
      if (g == 0.0) continue;
      accumulate_cosine_grad(batch.embeddings.row(i), proxies.proxies.row(c), g,
                             r.grad_embeddings.row(i), r.grad_proxies.row(c));
    }
  }
  const auto evals =
      static_cast<std::uint64_t>(batch.size()) * proxies.num_classes();
  r.similarity_evals = evals;
  r.tuples_considered = evals;
  return r;
}

}  // namespace

void LossHyperparams::validate() const {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) {
    throw InvalidSpecError("alpha must be positive, got " +
                           std::to_string(alpha));
  }
  if (!(delta >= 0.0) || !std::isfinite(delta)) {
    throw InvalidSpecError("delta must be nonnegative, got " +
                           std::to_string(delta));
  }
}

Matrix proxy_similarities(const EmbeddingBatch& batch,
                          const ProxySet& proxies) {
  validate_proxy_batch(batch, proxies);
  Matrix sims(batch.size(), proxies.num_classes());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    for (std::size_t c = 0; c < proxies.num_classes(); ++c) {
      sims(i, c) =
          cosine_similarity(batch.embeddings.row(i), proxies.proxies.row(c));
    }
  }
  return sims;
}

double proxy_anchor_forward(const EmbeddingBatch& batch,
                            const ProxySet& proxies,
                            const LossHyperparams& hp) {
  hp.validate();
  const Matrix sims = proxy_similarities(batch, proxies);
  double pos_sum = 0.0;
  double neg_sum = 0.0;
  std::size_t num_pos_proxies = 0;
  for (std::size_t c = 0; c < proxies.num_classes(); ++c) {
    const ProxyTerms t = proxy_terms(sims, batch.labels, c, hp);
    if (!t.pos_args.empty()) {
      ++num_pos_proxies;
      pos_sum += log1p_sum_exp(t.pos_args);
    }
    neg_sum += log1p_sum_exp(t.neg_args);
  }
  return pos_sum / static_cast<double>(num_pos_proxies) +
         neg_sum / static_cast<double>(proxies.num_classes());
}

double proxy_anchor_forward_softplus_form(const EmbeddingBatch& batch,
                                          const ProxySet& proxies,
                                          const LossHyperparams& hp) {
  hp.validate();
  const Matrix sims = proxy_similarities(batch, proxies);
  double pos_sum = 0.0;
  double neg_sum = 0.0;
  std::size_t num_pos_proxies = 0;
  for (std::size_t c = 0; c < proxies.num_classes(); ++c) {
    const ProxyTerms t = proxy_terms(sims, batch.labels, c, hp);
    if (!t.pos_args.empty()) {
      ++num_pos_proxies;
      pos_sum += softplus(log_sum_exp(t.pos_args));
    }
    if (!t.neg_args.empty()) neg_sum += softplus(log_sum_exp(t.neg_args));
  }
  return pos_sum / static_cast<double>(num_pos_proxies) +
         neg_sum / static_cast<double>(proxies.num_classes());
}

Matrix proxy_anchor_similarity_grad(const EmbeddingBatch& batch,
                                    const ProxySet& proxies,
                                    const LossHyperparams& hp) {
  hp.validate();
  const Matrix sims = proxy_similarities(batch, proxies);
  std::size_t num_pos_proxies = 0;
  std::vector<ProxyTerms> terms;
  terms.reserve(proxies.num_classes());
  for (std::size_t c = 0; c < proxies.num_classes(); ++c) {
    terms.push_back(proxy_terms(sims, batch.labels, c, hp));
    if (!terms.back().pos_args.empty()) ++num_pos_proxies;
  }
  const double pos_scale = -hp.alpha / static_cast<double>(num_pos_proxies);
  const double neg_scale = hp.alpha / static_cast<double>(proxies.num_classes());

  // h / (1 + sum h) == exp(arg - log(1 + sum exp(args))).
  Matrix grad(batch.size(), proxies.num_classes());
  for (std::size_t c = 0; c < terms.size(); ++c) {
    const ProxyTerms& t = terms[c];
    const double pos_norm = log1p_sum_exp(t.pos_args);
    for (std::size_t k = 0; k < t.pos_args.size(); ++k) {
      grad(t.pos_index[k], c) = pos_scale * std::exp(t.pos_args[k] - pos_norm);
    }
    const double neg_norm = log1p_sum_exp(t.neg_args);
    for (std::size_t k = 0; k < t.neg_args.size(); ++k) {
      grad(t.neg_index[k], c) = neg_scale * std::exp(t.neg_args[k] - neg_norm);
    }
  }
  return grad;
}

LossResult proxy_anchor_backward(const EmbeddingBatch& batch,
                                 const ProxySet& proxies,
                                 const LossHyperparams& hp) {
  const Matrix sim_grad = proxy_anchor_similarity_grad(batch, proxies, hp);
  return compose_proxy_grad(batch, proxies, sim_grad,
                            proxy_anchor_forward(batch, proxies, hp));
}

HardnessWeights hardness_weights(const EmbeddingBatch& batch,
                                 const ProxySet& proxies,
                                 const LossHyperparams& hp) {
  hp.validate();
  const Matrix sims = proxy_similarities(batch, proxies);
  HardnessWeights w;
  for (std::size_t c = 0; c < proxies.num_classes(); ++c) {
    const ProxyTerms t = proxy_terms(sims, batch.labels, c, hp);
    for (std::size_t k = 0; k < t.pos_args.size(); ++k) {
      w.h_pos.push_back({c, t.pos_index[k], std::exp(t.pos_args[k])});
    }
    for (std::size_t k = 0; k < t.neg_args.size(); ++k) {
      w.h_neg.push_back({c, t.neg_index[k], std::exp(t.neg_args[k])});
    }
  }
  return w;
}

double proxy_nca_forward(const EmbeddingBatch& batch, const ProxySet& proxies) {
  if (proxies.num_classes() < 2) {
    throw SingleClassError("Proxy-NCA needs at least one negative proxy");
  }
  const Matrix sims = proxy_similarities(batch, proxies);
  double total = 0.0;
  std::vector<double> neg;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto pos = static_cast<std::size_t>(batch.labels[i]);
    neg.clear();
    for (std::size_t c = 0; c < proxies.num_classes(); ++c) {
      if (c != pos) neg.push_back(sims(i, c));
    }
    total += -sims(i, pos) + log_sum_exp(neg);
  }
  return total;
}

Matrix proxy_nca_similarity_grad(const EmbeddingBatch& batch,
                                 const ProxySet& proxies) {
  if (proxies.num_classes() < 2) {
    throw SingleClassError("Proxy-NCA needs at least one negative proxy");
  }
  const Matrix sims = proxy_similarities(batch, proxies);
  Matrix grad(batch.size(), proxies.num_classes());
  std::vector<double> neg;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto pos = static_cast<std::size_t>(batch.labels[i]);
    neg.clear();
    for (std::size_t c = 0; c < proxies.num_classes(); ++c) {
      if (c != pos) neg.push_back(sims(i, c));
    }
    const double norm = log_sum_exp(neg);
    for (std::size_t c = 0; c < proxies.num_classes(); ++c) {
      grad(i, c) = c == pos ? -1.0 : std::exp(sims(i, c) - norm);
    }
  }
  return grad;
}

LossResult proxy_nca_backward(const EmbeddingBatch& batch,
                              const ProxySet& proxies) {
  const Matrix sim_grad = proxy_nca_similarity_grad(batch, proxies);
  return compose_proxy_grad(batch, proxies, sim_grad,
                            proxy_nca_forward(batch, proxies));
}

}  // namespace dml
