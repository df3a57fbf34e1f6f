// Independent reference implementations used only by the tests: extended
// precision direct formulas, central differences, and brute-force ranking.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <vector>

#include "dml/losses.hpp"
#include "dml/matrix.hpp"

namespace oracle {

using ld = long double;

inline dml::Matrix random_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& rng,
                                 double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  dml::Matrix m(rows, cols);
  for (double& v : m.data) v = n(rng);
  return m;
}

inline std::vector<int> random_labels(std::size_t n, std::size_t classes, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> u(0, static_cast<int>(classes) - 1);
  std::vector<int> out(n);
  for (int& l : out) l = u(rng);
  return out;
}

inline ld cosine(const double* a, const double* b, std::size_t d) {
  ld ab = 0, aa = 0, bb = 0;
  for (std::size_t i = 0; i < d; ++i) {
    ab += static_cast<ld>(a[i]) * b[i];
    aa += static_cast<ld>(a[i]) * a[i];
    bb += static_cast<ld>(b[i]) * b[i];
  }
  return ab / std::sqrt(aa * bb);
}

inline ld sim(const dml::Matrix& a, std::size_t i, const dml::Matrix& b, std::size_t j) {
  return cosine(&a.data[i * a.cols], &b.data[j * b.cols], a.cols);
}

// Proxy-Anchor written as the plain double sum, no max shift. The positive
// part averages over proxies present in the batch, the negative part over all
// proxies.
inline ld proxy_anchor(const dml::EmbeddingBatch& batch, const dml::ProxySet& proxies,
                       ld alpha, ld delta) {
  const std::size_t c_count = proxies.num_classes();
  ld pos = 0, neg = 0;
  std::size_t present = 0;
  for (std::size_t c = 0; c < c_count; ++c) {
    ld sp = 0, sn = 0;
    bool has_pos = false;
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const ld s = sim(batch.embeddings, i, proxies.proxies, c);
      if (batch.labels[i] == static_cast<int>(c)) {
        sp += std::exp(-alpha * (s - delta));
        has_pos = true;
      } else {
        sn += std::exp(alpha * (s + delta));
      }
    }
    if (has_pos) {
      ++present;
      pos += std::log1p(sp);
    }
    neg += std::log1p(sn);
  }
  return pos / static_cast<ld>(present) + neg / static_cast<ld>(c_count);
}

// Proxy-NCA as the summed negative log softmax over {p+} and the negatives
// excluding p+ from the denominator.
inline ld proxy_nca(const dml::EmbeddingBatch& batch, const dml::ProxySet& proxies) {
  ld total = 0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const std::size_t y = static_cast<std::size_t>(batch.labels[i]);
    ld denom = 0;
    for (std::size_t c = 0; c < proxies.num_classes(); ++c) {
      if (c != y) denom += std::exp(sim(batch.embeddings, i, proxies.proxies, c));
    }
    total += -std::log(std::exp(sim(batch.embeddings, i, proxies.proxies, y)) / denom);
  }
  return total;
}

// Semi-hard triplet loss by exhaustive enumeration over every (a, p, n).
// Per ordered positive pair, the chosen negative is the most similar one among
// those less similar than the positive; if none, the least similar negative.
inline ld triplet_semihard(const dml::EmbeddingBatch& batch, ld margin) {
  const std::size_t n = batch.size();
  ld total = 0;
  std::size_t pairs = 0;
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t p = 0; p < n; ++p) {
      if (p == a || batch.labels[p] != batch.labels[a]) continue;
      const ld sap = sim(batch.embeddings, a, batch.embeddings, p);
      ld best_semi = -1e30L, least = 1e30L;
      bool found = false;
      for (std::size_t k = 0; k < n; ++k) {
        if (batch.labels[k] == batch.labels[a]) continue;
        const ld san = sim(batch.embeddings, a, batch.embeddings, k);
        least = std::min(least, san);
        if (san < sap) {
          best_semi = std::max(best_semi, san);
          found = true;
        }
      }
      const ld san = found ? best_semi : least;
      total += std::max<ld>(0, san - sap + margin);
      ++pairs;
    }
  }
  return total / static_cast<ld>(pairs);
}

// Central difference of f along every coordinate of x.
inline std::vector<double> central_difference(const std::function<double(std::vector<double>&)>& f,
                                              std::vector<double> x, double h = 1e-5) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    x[i] = keep + h;
    const double up = f(x);
    x[i] = keep - h;
    const double down = f(x);
    x[i] = keep;
    g[i] = (up - down) / (2 * h);
  }
  return g;
}

inline double max_relative_error(const std::vector<double>& a, const std::vector<double>& b) {
  double diff = 0, scale = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff = std::max(diff, std::abs(a[i] - b[i]));
    scale = std::max({scale, std::abs(a[i]), std::abs(b[i])});
  }
  return scale == 0 ? diff : diff / scale;
}

// Recall@K by fully sorting every gallery item per query: similarity
// descending, gallery index ascending on ties.
inline double recall_full_sort(const dml::Matrix& q, const dml::Matrix& g,
                               const std::vector<int>& ql, const std::vector<int>& gl,
                               std::size_t k, bool self_excluded) {
  std::size_t hits = 0;
  for (std::size_t i = 0; i < q.rows; ++i) {
    std::vector<std::pair<double, std::size_t>> ranked;
    for (std::size_t j = 0; j < g.rows; ++j) {
      if (self_excluded && i == j) continue;
      const double s = static_cast<double>(sim(q, i, g, j));
      ranked.emplace_back(s, j);
    }
    std::sort(ranked.begin(), ranked.end(), [](const auto& x, const auto& y) {
      return x.first != y.first ? x.first > y.first : x.second < y.second;
    });
    for (std::size_t r = 0; r < std::min(k, ranked.size()); ++r) {
      if (gl[ranked[r].second] == ql[i]) {
        ++hits;
        break;
      }
    }
  }
  return static_cast<double>(hits) / static_cast<double>(q.rows);
}

}  // namespace oracle
