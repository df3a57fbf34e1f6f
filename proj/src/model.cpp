#include "dml/model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dml/errors.hpp"
#include "dml/rng.hpp"

namespace dml {

namespace {

std::string layer_name(std::size_t l, const char* what) {
  return "layer" + std::to_string(l) + "." + what;
}

// Layer widths including input and output.
std::vector<std::size_t> widths(const EmbedderSpec& spec) {
  std::vector<std::size_t> w{spec.input_dim};
  w.insert(w.end(), spec.hidden_dims.begin(), spec.hidden_dims.end());
  w.push_back(spec.output_dim);
  return w;
}

void check_indices(std::span<const std::size_t> indices, std::size_t limit) {
  for (std::size_t idx : indices) {
    if (idx >= limit) {
      throw IndexOutOfRangeError("sample index " + std::to_string(idx) +
                                 " out of range [0, " + std::to_string(limit) +
                                 ")");
    }
  }
}

struct DenseView {
  std::span<const double> weight;  // out x in, row-major
  std::span<const double> bias;
  std::size_t in;
  std::size_t out;
};

std::vector<DenseView> dense_views(const EmbedderSpec& spec,
                                   const ParamLayout& layout,
                                   std::span<const double> params) {
  const auto w = widths(spec);
  std::vector<DenseView> views;
  for (std::size_t l = 0; l + 1 < w.size(); ++l) {
    const Segment* ws = layout.find(layer_name(l, "weight"));
    const Segment* bs = layout.find(layer_name(l, "bias"));
    if (ws == nullptr || bs == nullptr || ws->rows != w[l + 1] ||
        ws->cols != w[l] || bs->rows != w[l + 1]) {
      throw DimensionMismatchError("parameter layout does not match the mlp spec");
    }
    views.push_back({params.subspan(ws->offset, ws->size()),
                     params.subspan(bs->offset, bs->size()), w[l], w[l + 1]});
  }
  return views;
}

// Activations of every layer for one batch: acts[0] is the input, acts[L] the
// output. Hidden layers store post-ReLU values.
std::vector<Matrix> mlp_forward(const std::vector<DenseView>& layers,
                                const Matrix& features,
                                std::span<const std::size_t> indices) {
  std::vector<Matrix> acts;
  Matrix input(indices.size(), layers.front().in);
  for (std::size_t r = 0; r < indices.size(); ++r) {
    const auto src = features.row(indices[r]);
    std::copy(src.begin(), src.end(), input.row(r).begin());
  }
  acts.push_back(std::move(input));
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const DenseView& L = layers[l];
    const Matrix& x = acts.back();
    Matrix y(x.rows, L.out);
    const bool hidden = l + 1 < layers.size();
    for (std::size_t r = 0; r < x.rows; ++r) {
      const auto xr = x.row(r);
      for (std::size_t o = 0; o < L.out; ++o) {
        double acc = L.bias[o];
        const double* wrow = L.weight.data() + o * L.in;
        for (std::size_t i = 0; i < L.in; ++i) acc += wrow[i] * xr[i];
        y(r, o) = hidden ? std::max(acc, 0.0) : acc;
      }
    }
    acts.push_back(std::move(y));
  }
  return acts;
}

// Length of the model part of a layout whose proxy segment, if any, is last.
std::size_t model_layout_size(const ParamLayout& layout) {
  const Segment* proxies = layout.find(kProxySegment);
  return proxies == nullptr ? layout.total() : proxies->offset;
}

}  // namespace

std::string_view to_string(EmbedderKind kind) {
  return kind == EmbedderKind::table ? "table" : "mlp";
}

EmbedderKind parse_embedder_kind(std::string_view name) {
  if (name == "table") return EmbedderKind::table;
  if (name == "mlp") return EmbedderKind::mlp;
  throw InvalidSpecError("unknown model kind '" + std::string(name) + "'");
}

void EmbedderSpec::validate() const {
  if (output_dim < 2) throw InvalidSpecError("output_dim must be at least 2");
  if (kind == EmbedderKind::mlp) {
    if (input_dim == 0) throw InvalidSpecError("mlp input_dim must be positive");
    for (std::size_t h : hidden_dims) {
      if (h == 0) throw InvalidSpecError("mlp hidden dims must be positive");
    }
  }
}

std::size_t ParamLayout::total() const {
  std::size_t n = 0;
  for (const auto& s : segments) n += s.size();
  return n;
}

bool ParamLayout::is_contiguous() const {
  std::size_t expected = 0;
  for (const auto& s : segments) {
    if (s.offset != expected) return false;
    expected += s.size();
  }
  return true;
}

const Segment* ParamLayout::find(std::string_view name) const {
  for (const auto& s : segments) {
    if (s.name == name) return &s;
  }
  return nullptr;
}

void ParamLayout::append(std::string name, std::size_t rows, std::size_t cols) {
  segments.push_back({std::move(name), total(), rows, cols});
}

std::span<double> ParamVector::segment(std::string_view name) {
  const Segment* s = layout.find(name);
  if (s == nullptr) throw InvalidSpecError("no segment named " + std::string(name));
  return std::span<double>(values).subspan(s->offset, s->size());
}

std::span<const double> ParamVector::segment(std::string_view name) const {
  const Segment* s = layout.find(name);
  if (s == nullptr) throw InvalidSpecError("no segment named " + std::string(name));
  return std::span<const double>(values).subspan(s->offset, s->size());
}

ParamLayout model_layout(const EmbedderSpec& spec, std::size_t table_rows) {
  spec.validate();
  ParamLayout layout;
  if (spec.kind == EmbedderKind::table) {
    if (table_rows == 0) throw InvalidSpecError("table needs at least one row");
    layout.append("table", table_rows, spec.output_dim);
    return layout;
  }
  const auto w = widths(spec);
  for (std::size_t l = 0; l + 1 < w.size(); ++l) {
    layout.append(layer_name(l, "weight"), w[l + 1], w[l]);
    layout.append(layer_name(l, "bias"), w[l + 1], 1);
  }
  return layout;
}

ParamVector init_model(const EmbedderSpec& spec, std::size_t table_rows) {
  ParamVector p;
  p.layout = model_layout(spec, table_rows);
  p.values.assign(p.layout.total(), 0.0);
  Rng rng(spec.init_seed);
  if (spec.kind == EmbedderKind::table) {
    std::normal_distribution<double> unit(0.0, 1.0);
    for (double& v : p.values) v = unit(rng);
    return p;
  }
  for (const Segment& s : p.layout.segments) {
    if (s.name.ends_with(".bias")) continue;
    std::normal_distribution<double> he(0.0, std::sqrt(2.0 / static_cast<double>(s.cols)));
    for (std::size_t i = 0; i < s.size(); ++i) p.values[s.offset + i] = he(rng);
  }
  return p;
}

ProxySet init_proxies(std::size_t num_classes, std::size_t dim,
                      std::uint64_t seed) {
  if (num_classes == 0 || dim == 0) {
    throw InvalidSpecError("proxy set needs positive class count and dimension");
  }
  ProxySet ps{Matrix(num_classes, dim)};
  Rng rng(seed);
  std::normal_distribution<double> unit(0.0, 1.0);
  for (double& v : ps.proxies.data) v = unit(rng);
  return ps;
}

ParamVector combine_params(const ParamVector& model, const ProxySet& proxies) {
  ParamVector out = model;
  out.layout.append(std::string(kProxySegment), proxies.num_classes(),
                    proxies.dim());
  out.values.insert(out.values.end(), proxies.proxies.data.begin(),
                    proxies.proxies.data.end());
  return out;
}

ProxySet extract_proxies(const ParamVector& params) {
  const Segment* s = params.layout.find(kProxySegment);
  if (s == nullptr) throw InvalidSpecError("parameters have no proxy segment");
  ProxySet ps{Matrix(s->rows, s->cols)};
  std::copy_n(params.values.begin() + static_cast<std::ptrdiff_t>(s->offset),
              s->size(), ps.proxies.data.begin());
  return ps;
}

Matrix forward_embed(const EmbedderSpec& spec, const ParamLayout& layout,
                     std::span<const double> model_params,
                     const Matrix& features,
                     std::span<const std::size_t> indices) {
  if (spec.kind == EmbedderKind::table) {
    const Segment* t = layout.find("table");
    if (t == nullptr || t->cols != spec.output_dim) {
      throw DimensionMismatchError("parameter layout does not match the table spec");
    }
    check_indices(indices, t->rows);
    Matrix out(indices.size(), t->cols);
    for (std::size_t r = 0; r < indices.size(); ++r) {
      const auto src = model_params.subspan(t->offset + indices[r] * t->cols, t->cols);
      std::copy(src.begin(), src.end(), out.row(r).begin());
    }
    return out;
  }
  if (features.cols != spec.input_dim) {
    throw DimensionMismatchError("feature dim " + std::to_string(features.cols) +
                                 " differs from mlp input_dim " +
                                 std::to_string(spec.input_dim));
  }
  check_indices(indices, features.rows);
  auto acts = mlp_forward(dense_views(spec, layout, model_params), features, indices);
  return std::move(acts.back());
}

std::vector<double> backward_embed(const EmbedderSpec& spec,
                                   const ParamLayout& layout,
                                   std::span<const double> model_params,
                                   const Matrix& features,
                                   std::span<const std::size_t> indices,
                                   const Matrix& grad_embeddings) {
  if (grad_embeddings.rows != indices.size() ||
      grad_embeddings.cols != spec.output_dim) {
    throw DimensionMismatchError("embedding gradient must be N x output_dim");
  }
  std::vector<double> grad(model_layout_size(layout), 0.0);
  if (spec.kind == EmbedderKind::table) {
    const Segment* t = layout.find("table");
    if (t == nullptr) throw DimensionMismatchError("parameter layout has no table");
    check_indices(indices, t->rows);
    for (std::size_t r = 0; r < indices.size(); ++r) {
      const auto g = grad_embeddings.row(r);
      double* dst = grad.data() + t->offset + indices[r] * t->cols;
      for (std::size_t j = 0; j < t->cols; ++j) dst[j] += g[j];
    }
    return grad;
  }
  if (features.cols != spec.input_dim) {
    throw DimensionMismatchError("feature dim differs from mlp input_dim");
  }
  check_indices(indices, features.rows);
  const auto layers = dense_views(spec, layout, model_params);
  const auto acts = mlp_forward(layers, features, indices);

  Matrix delta = grad_embeddings;  // dL/d(pre-activation) of the current layer
  for (std::size_t l = layers.size(); l-- > 0;) {
    const DenseView& L = layers[l];
    const Matrix& x = acts[l];
    const Segment* ws = layout.find(layer_name(l, "weight"));
    const Segment* bs = layout.find(layer_name(l, "bias"));
    double* gw = grad.data() + ws->offset;
    double* gb = grad.data() + bs->offset;
    for (std::size_t r = 0; r < x.rows; ++r) {
      const auto xr = x.row(r);
      for (std::size_t o = 0; o < L.out; ++o) {
        const double d = delta(r, o);
        if (d == 0.0) continue;
        gb[o] += d;
        double* gwrow = gw + o * L.in;
        for (std::size_t i = 0; i < L.in; ++i) gwrow[i] += d * xr[i];
      }
    }
    if (l == 0) break;
    // Propagate through W and the ReLU of the layer below; a stored post-ReLU
    // activation of zero means the unit was inactive.
    Matrix below(x.rows, L.in);
    for (std::size_t r = 0; r < x.rows; ++r) {
      for (std::size_t o = 0; o < L.out; ++o) {
        const double d = delta(r, o);
        if (d == 0.0) continue;
        const double* wrow = L.weight.data() + o * L.in;
        for (std::size_t i = 0; i < L.in; ++i) below(r, i) += d * wrow[i];
      }
      for (std::size_t i = 0; i < L.in; ++i) {
        if (x(r, i) <= 0.0) below(r, i) = 0.0;
      }
    }
    delta = std::move(below);
  }
  return grad;
}

}  // namespace dml
