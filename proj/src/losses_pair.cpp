#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "dml/errors.hpp"
#include "dml/losses.hpp"
#include "dml/numkernel.hpp"

namespace dml {

namespace {

// Symmetric pairwise similarities. Each unordered pair is evaluated once.
struct PairSims {
  Matrix sims;
  std::uint64_t evals = 0;
};

PairSims pair_similarities(const EmbeddingBatch& batch) {
  const std::size_t n = batch.size();
  PairSims out{Matrix(n, n, 1.0), 0};
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double s =
          cosine_similarity(batch.embeddings.row(i), batch.embeddings.row(j));
      out.sims(i, j) = s;
      out.sims(j, i) = s;
      ++out.evals;
    }
  }
  return out;
}

// dL/ds accumulated per ordered index pair; (i,j) and (j,i) refer to the same
// similarity variable and are merged when composing.
LossResult compose_pair_grad(const EmbeddingBatch& batch, const Matrix& sim_grad,
                             double value, std::uint64_t evals,
                             std::uint64_t tuples) {
  LossResult r;
  r.value = value;
  r.grad_embeddings = Matrix(batch.size(), batch.dim());
  r.similarity_evals = evals;
  r.tuples_considered = tuples;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    for (std::size_t j = i + 1; j < batch.size(); ++j) {
      const double g = sim_grad(i, j) + sim_grad(j, i);
      if (g == 0.0) continue;
      accumulate_cosine_grad(batch.embeddings.row(i), batch.embeddings.row(j),
                             g, r.grad_embeddings.row(i),
                             r.grad_embeddings.row(j));
    }
  }
  return r;
}

struct LabelStats {
  std::uint64_t positive_pairs = 0;  // unordered
  std::size_t distinct = 0;
};

LabelStats label_stats(const std::vector<int>& labels) {
  LabelStats st;
  std::vector<int> sorted = labels;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < sorted.size();) {
    std::size_t j = i;
    while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
    const std::uint64_t k = j - i;
    st.positive_pairs += k * (k - 1) / 2;
    ++st.distinct;
    i = j;
  }
  return st;
}

void require_tuples(std::string_view loss, const LabelStats& st) {
  if (st.positive_pairs == 0) {
    throw InsufficientTupleError(std::string(loss) +
                                 " needs at least one positive pair");
  }
  if (st.distinct < 2) {
    throw InsufficientTupleError(std::string(loss) +
                                 " needs at least two classes in the batch");
  }
}

LossResult contrastive(const EmbeddingBatch& batch, const BaselineConfig& cfg) {
  const std::size_t n = batch.size();
  if (n < 2) throw InsufficientTupleError("contrastive needs at least 2 samples");
  const PairSims ps = pair_similarities(batch);
  const double pairs = static_cast<double>(ps.evals);
  Matrix g(n, n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double d = 1.0 - ps.sims(i, j);
      if (batch.labels[i] == batch.labels[j]) {
        total += d * d;
        g(i, j) = -2.0 * d / pairs;
      } else if (cfg.margin - d > 0.0) {
        const double h = cfg.margin - d;
        total += h * h;
        g(i, j) = 2.0 * h / pairs;
      }
    }
  }
  return compose_pair_grad(batch, g, total / pairs, ps.evals, ps.evals);
}

LossResult triplet_semihard(const EmbeddingBatch& batch,
                            const BaselineConfig& cfg) {
  require_tuples("triplet_semihard", label_stats(batch.labels));
  const std::size_t n = batch.size();
  const PairSims ps = pair_similarities(batch);
  const Matrix& s = ps.sims;

  struct Triplet {
    std::size_t a, p, neg;
  };
  std::vector<Triplet> triplets;
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t p = 0; p < n; ++p) {
      if (p == a || batch.labels[p] != batch.labels[a]) continue;
      // Hardest semi-hard negative: the closest negative that is still farther
      // than the positive. Falls back to the farthest negative when none is.
      // Distances compare as reversed similarities; ties keep the lower index.
      std::size_t semi = n;
      std::size_t far = n;
      for (std::size_t k = 0; k < n; ++k) {
        if (batch.labels[k] == batch.labels[a]) continue;
        if (s(a, k) < s(a, p) && (semi == n || s(a, k) > s(a, semi))) semi = k;
        if (far == n || s(a, k) < s(a, far)) far = k;
      }
      triplets.push_back({a, p, semi != n ? semi : far});
    }
  }

  const double count = static_cast<double>(triplets.size());
  Matrix g(n, n);
  double total = 0.0;
  for (const Triplet& t : triplets) {
    // d(a,p) - d(a,n) + m with d = 1 - s.
    const double hinge = s(t.a, t.neg) - s(t.a, t.p) + cfg.margin;
    if (hinge > 0.0) {
      total += hinge;
      g(t.a, t.p) -= 1.0 / count;
      g(t.a, t.neg) += 1.0 / count;
    }
  }
  return compose_pair_grad(batch, g, total / count, ps.evals, triplets.size());
}

LossResult npair(const EmbeddingBatch& batch) {
  require_tuples("npair", label_stats(batch.labels));
  const std::size_t n = batch.size();
  const PairSims ps = pair_similarities(batch);
  const Matrix& s = ps.sims;

  std::uint64_t anchors = 0;
  std::uint64_t tuples = 0;
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t p = 0; p < n; ++p) {
      if (p != a && batch.labels[p] == batch.labels[a]) ++anchors;
    }
  }
  const double scale = 1.0 / static_cast<double>(anchors);

  Matrix g(n, n);
  double total = 0.0;
  std::vector<double> args;
  std::vector<std::size_t> negs;
  for (std::size_t a = 0; a < n; ++a) {
    negs.clear();
    for (std::size_t k = 0; k < n; ++k) {
      if (batch.labels[k] != batch.labels[a]) negs.push_back(k);
    }
    for (std::size_t p = 0; p < n; ++p) {
      if (p == a || batch.labels[p] != batch.labels[a]) continue;
      args.clear();
      for (std::size_t k : negs) args.push_back(s(a, k) - s(a, p));
      const double term = log1p_sum_exp(args);
      total += term;
      tuples += negs.size();
      double weight_sum = 0.0;
      for (std::size_t q = 0; q < negs.size(); ++q) {
        const double w = std::exp(args[q] - term);
        g(a, negs[q]) += w * scale;
        weight_sum += w;
      }
      g(a, p) -= weight_sum * scale;
    }
  }
  return compose_pair_grad(batch, g, total * scale, ps.evals, tuples);
}

LossResult lifted_structure(const EmbeddingBatch& batch,
                            const BaselineConfig& cfg) {
  const LabelStats st = label_stats(batch.labels);
  require_tuples("lifted_structure", st);
  const std::size_t n = batch.size();
  const PairSims ps = pair_similarities(batch);
  const Matrix& s = ps.sims;
  const double num_pairs = static_cast<double>(st.positive_pairs);

  Matrix g(n, n);
  double total = 0.0;
  std::uint64_t tuples = 0;
  std::vector<double> args;
  std::vector<std::pair<std::size_t, std::size_t>> owners;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (batch.labels[i] != batch.labels[j]) continue;
      // J = log(sum_k e^{m - d_ik} + sum_l e^{m - d_jl}) + d_ij, d = 1 - s.
      args.clear();
      owners.clear();
      for (std::size_t k = 0; k < n; ++k) {
        if (batch.labels[k] == batch.labels[i]) continue;
        args.push_back(cfg.lifted_margin - 1.0 + s(i, k));
        owners.emplace_back(i, k);
        args.push_back(cfg.lifted_margin - 1.0 + s(j, k));
        owners.emplace_back(j, k);
      }
      tuples += args.size();
      const double lse = log_sum_exp(args);
      const double j_val = lse + 1.0 - s(i, j);
      if (j_val <= 0.0) continue;
      total += j_val * j_val;
      const double outer = j_val / num_pairs;  // d/dJ of J^2 / (2|P|)
      for (std::size_t q = 0; q < args.size(); ++q) {
        g(owners[q].first, owners[q].second) +=
            outer * std::exp(args[q] - lse);
      }
      g(i, j) -= outer;
    }
  }
  return compose_pair_grad(batch, g, total / (2.0 * num_pairs), ps.evals,
                           tuples);
}

LossResult multi_similarity(const EmbeddingBatch& batch,
                            const BaselineConfig& cfg) {
  require_tuples("multi_similarity", label_stats(batch.labels));
  const std::size_t n = batch.size();
  const PairSims ps = pair_similarities(batch);
  const Matrix& s = ps.sims;
  const double scale = 1.0 / static_cast<double>(n);

  Matrix g(n, n);
  double total = 0.0;
  std::uint64_t tuples = 0;
  std::vector<double> pos_args, neg_args;
  std::vector<std::size_t> pos_idx, neg_idx;
  for (std::size_t a = 0; a < n; ++a) {
    double min_pos = 2.0;
    double max_neg = -2.0;
    bool any_pos = false;
    bool any_neg = false;
    for (std::size_t k = 0; k < n; ++k) {
      if (k == a) continue;
      if (batch.labels[k] == batch.labels[a]) {
        min_pos = std::min(min_pos, s(a, k));
        any_pos = true;
      } else {
        max_neg = std::max(max_neg, s(a, k));
        any_neg = true;
      }
    }
    if (!any_pos || !any_neg) continue;

    pos_args.clear();
    neg_args.clear();
    pos_idx.clear();
    neg_idx.clear();
    for (std::size_t k = 0; k < n; ++k) {
      if (k == a) continue;
      if (batch.labels[k] == batch.labels[a]) {
        if (s(a, k) - cfg.ms_epsilon < max_neg) {
          pos_args.push_back(-cfg.ms_alpha * (s(a, k) - cfg.ms_base));
          pos_idx.push_back(k);
        }
      } else if (s(a, k) + cfg.ms_epsilon > min_pos) {
        neg_args.push_back(cfg.ms_beta * (s(a, k) - cfg.ms_base));
        neg_idx.push_back(k);
      }
    }
    tuples += pos_args.size() + neg_args.size();

    const double pos_term = log1p_sum_exp(pos_args);
    const double neg_term = log1p_sum_exp(neg_args);
    total += pos_term / cfg.ms_alpha + neg_term / cfg.ms_beta;
    for (std::size_t q = 0; q < pos_args.size(); ++q) {
      g(a, pos_idx[q]) -= scale * std::exp(pos_args[q] - pos_term);
    }
    for (std::size_t q = 0; q < neg_args.size(); ++q) {
      g(a, neg_idx[q]) += scale * std::exp(neg_args[q] - neg_term);
    }
  }
  return compose_pair_grad(batch, g, total * scale, ps.evals, tuples);
}

}  // namespace

void BaselineConfig::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw InvalidSpecError(std::string(name) + " must be positive");
    }
  };
  if (!(margin >= 0.0)) throw InvalidSpecError("margin must be nonnegative");
  if (!(lifted_margin >= 0.0)) {
    throw InvalidSpecError("lifted_margin must be nonnegative");
  }
  positive(ms_alpha, "ms_alpha");
  positive(ms_beta, "ms_beta");
  if (!(ms_epsilon >= 0.0)) throw InvalidSpecError("ms_epsilon must be nonnegative");
}

LossResult baseline_loss(LossKind kind, const EmbeddingBatch& batch,
                         const BaselineConfig& config) {
  config.validate();
  if (batch.size() == 0) throw EmptyInputError("empty embedding batch");
  if (batch.labels.size() != batch.size()) {
    throw DimensionMismatchError("label count differs from batch size");
  }
  switch (kind) {
    case LossKind::contrastive:
      return contrastive(batch, config);
    case LossKind::triplet_semihard:
      return triplet_semihard(batch, config);
    case LossKind::npair:
      return npair(batch);
    case LossKind::lifted_structure:
      return lifted_structure(batch, config);
    case LossKind::multi_similarity:
      return multi_similarity(batch, config);
    default:
      throw InvalidSpecError(std::string(to_string(kind)) +
                             " is not a pair-based loss");
  }
}

std::uint64_t predicted_batch_tuples(LossKind kind, std::uint64_t classes,
                                     std::uint64_t per_class) {
  const std::uint64_t b = classes * per_class;
  const std::uint64_t ordered_pos = classes * per_class * (per_class - 1);
  switch (kind) {
    case LossKind::contrastive:
      return b * (b - 1) / 2;
    case LossKind::triplet_semihard:
      return ordered_pos;  // one mined negative per (anchor, positive)
    case LossKind::npair:
      return ordered_pos * (b - per_class);
    case LossKind::lifted_structure:
      // Each unordered positive pair scans the negatives of both members.
      return (ordered_pos / 2) * 2 * (b - per_class);
    default:
      throw InvalidSpecError("no closed-form tuple count for " +
                             std::string(to_string(kind)));
  }
}

}  // namespace dml
