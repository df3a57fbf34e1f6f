#include "dml/losses.hpp"

#include <string>

#include "dml/errors.hpp"

namespace dml {

std::string_view to_string(LossKind kind) {
  switch (kind) {
    case LossKind::proxy_anchor: return "proxy_anchor";
    case LossKind::proxy_nca: return "proxy_nca";
    case LossKind::contrastive: return "contrastive";
    case LossKind::triplet_semihard: return "triplet_semihard";
    case LossKind::npair: return "npair";
    case LossKind::lifted_structure: return "lifted_structure";
    case LossKind::multi_similarity: return "multi_similarity";
  }
  return "unknown";
}

LossKind parse_loss_kind(std::string_view name) {
  for (LossKind k : kAllLossKinds) {
    if (to_string(k) == name) return k;
  }
  throw InvalidSpecError("unknown loss kind '" + std::string(name) + "'");
}

bool is_proxy_loss(LossKind kind) {
  return kind == LossKind::proxy_anchor || kind == LossKind::proxy_nca;
}

LossResult evaluate_loss(LossKind kind, const EmbeddingBatch& batch,
                         const ProxySet& proxies, const LossConfig& config) {
  switch (kind) {
    case LossKind::proxy_anchor:
      return proxy_anchor_backward(batch, proxies, config.proxy);
    case LossKind::proxy_nca:
      return proxy_nca_backward(batch, proxies);
    default: {
      LossResult r = baseline_loss(kind, batch, config.baseline);
      r.grad_proxies = Matrix(proxies.num_classes(), proxies.dim());
      return r;
    }
  }
}

}  // namespace dml
