#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dml/matrix.hpp"

namespace dml {

enum class LossKind {
  proxy_anchor,
  proxy_nca,
  contrastive,
  triplet_semihard,
  npair,
  lifted_structure,
  multi_similarity,
};

inline constexpr LossKind kAllLossKinds[] = {
    LossKind::proxy_anchor,     LossKind::proxy_nca, LossKind::contrastive,
    LossKind::triplet_semihard, LossKind::npair,     LossKind::lifted_structure,
    LossKind::multi_similarity,
};

std::string_view to_string(LossKind kind);
/// Throws InvalidSpecError for unknown names.
LossKind parse_loss_kind(std::string_view name);
bool is_proxy_loss(LossKind kind);

/// N x D embeddings (raw, un-normalized) with one class id per row.
struct EmbeddingBatch {
  Matrix embeddings;
  std::vector<int> labels;

  std::size_t size() const { return embeddings.rows; }
  std::size_t dim() const { return embeddings.cols; }
};

/// One learnable proxy per class, row c is the proxy of class c.
struct ProxySet {
  Matrix proxies;

  std::size_t num_classes() const { return proxies.rows; }
  std::size_t dim() const { return proxies.cols; }
};

struct LossHyperparams {
  double alpha = 32.0;
  double delta = 0.1;

  void validate() const;
};

/// Hyperparameters of the pair-based baselines. Contrastive and triplet
/// margins act on cosine distance 1 - s. Multi-similarity values follow the
/// defaults of its original publication.
struct BaselineConfig {
  double margin = 0.2;
  double lifted_margin = 1.0;
  double ms_alpha = 2.0;
  double ms_beta = 50.0;
  double ms_base = 0.5;
  double ms_epsilon = 0.1;

  void validate() const;
};

struct LossConfig {
  LossHyperparams proxy;
  BaselineConfig baseline;
};

struct LossResult {
  double value = 0.0;
  Matrix grad_embeddings;
  Matrix grad_proxies;  // all zero for pair losses
  std::uint64_t similarity_evals = 0;
  /// Data-proxy associations for proxy losses, mined tuples for pair losses.
  std::uint64_t tuples_considered = 0;
};

struct HardnessEntry {
  std::size_t proxy;
  std::size_t sample;
  double weight;
};

/// h+ for every (proxy, positive) and h- for every (proxy, negative).
struct HardnessWeights {
  std::vector<HardnessEntry> h_pos;
  std::vector<HardnessEntry> h_neg;
};

/// N x C matrix of s(x_i, p_c).
Matrix proxy_similarities(const EmbeddingBatch& batch, const ProxySet& proxies);

// Proxy-Anchor ---------------------------------------------------------------

/// Log(1 + sum exp) form, stable via a max shift that includes the implicit
/// zero exponent.
double proxy_anchor_forward(const EmbeddingBatch& batch,
                            const ProxySet& proxies, const LossHyperparams& hp);

/// Softplus(LSE(.)) form. Empty example sets contribute 0.
double proxy_anchor_forward_softplus_form(const EmbeddingBatch& batch,
                                          const ProxySet& proxies,
                                          const LossHyperparams& hp);

/// N x C matrix of dl/ds(x_i, p_c).
Matrix proxy_anchor_similarity_grad(const EmbeddingBatch& batch,
                                    const ProxySet& proxies,
                                    const LossHyperparams& hp);

LossResult proxy_anchor_backward(const EmbeddingBatch& batch,
                                 const ProxySet& proxies,
                                 const LossHyperparams& hp);

HardnessWeights hardness_weights(const EmbeddingBatch& batch,
                                 const ProxySet& proxies,
                                 const LossHyperparams& hp);

// Proxy-NCA ------------------------------------------------------------------

double proxy_nca_forward(const EmbeddingBatch& batch, const ProxySet& proxies);

/// N x C matrix of dl/ds(x_i, p_c): -1 on the positive proxy, softmax over
/// the negatives elsewhere.
Matrix proxy_nca_similarity_grad(const EmbeddingBatch& batch,
                                 const ProxySet& proxies);

LossResult proxy_nca_backward(const EmbeddingBatch& batch,
                              const ProxySet& proxies);

// Pair-based baselines -------------------------------------------------------

/// Value and embedding gradient of a pair-based loss. `kind` must not be a
/// proxy loss. Throws InsufficientTupleError when the batch cannot form the
/// tuples the loss needs.
LossResult baseline_loss(LossKind kind, const EmbeddingBatch& batch,
                         const BaselineConfig& config);

/// Per-batch tuple count for a class-balanced batch of `classes` classes with
/// `per_class` samples each, under the mining rule of `kind`. Not defined for
/// multi_similarity, whose mined count depends on the similarities.
std::uint64_t predicted_batch_tuples(LossKind kind, std::uint64_t classes,
                                     std::uint64_t per_class);

// Uniform entry point --------------------------------------------------------

/// Dispatches on `kind`. For pair losses `proxies` only fixes the shape of the
/// zero proxy gradient.
LossResult evaluate_loss(LossKind kind, const EmbeddingBatch& batch,
                         const ProxySet& proxies, const LossConfig& config);

}  // namespace dml
