#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "osb/embedding.hpp"
#include "osb/matrix.hpp"
#include "osb/rng.hpp"

namespace osb {

struct DenseLayer {
  Matrix weight;  ///< out x in
  std::vector<double> bias;

  friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

/// Intermediate values of one forward pass, kept for backward().
struct ForwardCache {
  std::vector<Feature> inputs;  ///< input of every layer
  Feature pre_norm;             ///< last affine output
  Feature output;
};

/// One or two affine maps with tanh between them, optionally followed by
/// L2 normalisation of the output.
class EmbedModel {
 public:
  EmbedModel() = default;
  /// Throws UsageError for zero or mismatched layer sizes, more than two
  /// layers; NumericError for non-finite weights.
  EmbedModel(std::vector<DenseLayer> layers, bool normalize_output);

  /// Weights ~ N(0, 1/fan_in), zero biases. hidden_dim == 0 gives a single
  /// layer.
  static EmbedModel random(std::size_t input_dim, std::size_t hidden_dim, std::size_t output_dim,
                           bool normalize_output, Rng& rng);

  std::size_t input_dim() const noexcept;
  std::size_t output_dim() const noexcept;
  const std::vector<DenseLayer>& layers() const noexcept { return layers_; }
  bool normalize_output() const noexcept { return normalize_; }

  Feature forward(std::span<const double> x) const;
  Feature forward(std::span<const double> x, ForwardCache& cache) const;

  /// Adds d loss / d parameters into `grad` (laid out as parameters()).
  void backward(const ForwardCache& cache, std::span<const double> d_output,
                std::span<double> grad) const;

  /// Weights then bias of each layer, row-major.
  std::vector<double> parameters() const;
  void set_parameters(std::span<const double> flat);
  std::size_t parameter_count() const noexcept;
  bool finite() const noexcept;

  /// Maps every row of `set` through forward(), keeping ids.
  EmbeddingSet embed(const EmbeddingSet& set) const;

  friend bool operator==(const EmbedModel&, const EmbedModel&) = default;

 private:
  std::vector<DenseLayer> layers_;
  bool normalize_ = false;
};

}  // namespace osb
