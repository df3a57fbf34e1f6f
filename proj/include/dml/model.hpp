#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dml/losses.hpp"
#include "dml/matrix.hpp"

namespace dml {

enum class EmbedderKind { table, mlp };

std::string_view to_string(EmbedderKind kind);
EmbedderKind parse_embedder_kind(std::string_view name);

/// Either a free embedding table (one learnable row per sample) or a dense
/// ReLU network from raw features to the embedding space.
struct EmbedderSpec {
  EmbedderKind kind = EmbedderKind::table;
  std::size_t input_dim = 32;               // mlp only
  std::vector<std::size_t> hidden_dims{64};  // mlp only
  std::size_t output_dim = 16;
  std::uint64_t init_seed = 0;

  /// Throws InvalidSpecError.
  void validate() const;
};

struct Segment {
  std::string name;
  std::size_t offset = 0;
  std::size_t rows = 0;
  std::size_t cols = 0;

  std::size_t size() const { return rows * cols; }
  bool operator==(const Segment&) const = default;
};

struct ParamLayout {
  std::vector<Segment> segments;

  std::size_t total() const;
  /// Offsets contiguous, non-overlapping, starting at zero.
  bool is_contiguous() const;
  const Segment* find(std::string_view name) const;
  void append(std::string name, std::size_t rows, std::size_t cols);

  bool operator==(const ParamLayout&) const = default;
};

inline constexpr std::string_view kProxySegment = "proxies";

/// Flat learnable parameters: model segments followed by the proxy segment.
struct ParamVector {
  std::vector<double> values;
  ParamLayout layout;

  std::span<double> segment(std::string_view name);
  std::span<const double> segment(std::string_view name) const;

  bool operator==(const ParamVector&) const = default;
};

/// Segments of the model (proxies excluded). `table_rows` is only used
/// by the table kind.
ParamLayout model_layout(const EmbedderSpec& spec, std::size_t table_rows);

/// Deterministic in `spec.init_seed`. Table rows ~ N(0, 1); dense weights
/// ~ N(0, 2 / fan_in); biases zero.
ParamVector init_model(const EmbedderSpec& spec, std::size_t table_rows);

/// C x D proxies, each entry ~ N(0, 1).
ProxySet init_proxies(std::size_t num_classes, std::size_t dim,
                      std::uint64_t seed);

/// Appends the proxy segment to the model parameters.
ParamVector combine_params(const ParamVector& model, const ProxySet& proxies);
/// Copies the proxy segment out of a combined ParamVector.
ProxySet extract_proxies(const ParamVector& params);

/// Embeds the samples named by `indices`. The table kind looks rows up by
/// index; the mlp kind reads `features` rows and ignores the table.
/// `model_params` is the model part of the flat vector (any trailing proxy
/// segment is ignored).
Matrix forward_embed(const EmbedderSpec& spec, const ParamLayout& layout,
                     std::span<const double> model_params,
                     const Matrix& features,
                     std::span<const std::size_t> indices);

/// Reverse-mode gradient of the model segment given dL/d(embeddings).
/// Table rows accumulate over duplicate indices.
std::vector<double> backward_embed(const EmbedderSpec& spec,
                                   const ParamLayout& layout,
                                   std::span<const double> model_params,
                                   const Matrix& features,
                                   std::span<const std::size_t> indices,
                                   const Matrix& grad_embeddings);

/// Checkpoint: plain-text layout header followed by the raw little-endian
/// 64-bit values.
void save_checkpoint(const std::filesystem::path& path,
                     const ParamVector& params);
ParamVector load_checkpoint(const std::filesystem::path& path);

}  // namespace dml
