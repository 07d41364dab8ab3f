#include "osb/model.hpp"

#include <cmath>

#include "osb/error.hpp"

namespace osb {

EmbedModel::EmbedModel(std::vector<DenseLayer> layers, bool normalize_output)
    : layers_(std::move(layers)), normalize_(normalize_output) {
  if (layers_.empty() || layers_.size() > 2) throw UsageError("model needs one or two layers");
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& layer = layers_[l];
    if (layer.weight.empty()) throw UsageError("model layer has zero size");
    if (layer.bias.size() != layer.weight.rows()) throw UsageError("bias size differs from layer width");
    if (l > 0 && layer.weight.cols() != layers_[l - 1].weight.rows()) {
      throw UsageError("layer input size differs from previous layer output");
    }
  }
  if (!finite()) throw NumericError("model weights are not finite");
}

EmbedModel EmbedModel::random(std::size_t input_dim, std::size_t hidden_dim,
                              std::size_t output_dim, bool normalize_output, Rng& rng) {
  if (input_dim == 0 || output_dim == 0) throw UsageError("model dimensions must be positive");
  std::vector<std::size_t> sizes{input_dim};
  if (hidden_dim > 0) sizes.push_back(hidden_dim);
  sizes.push_back(output_dim);
  std::vector<DenseLayer> layers;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    DenseLayer layer{Matrix(sizes[l + 1], sizes[l]), std::vector<double>(sizes[l + 1], 0.0)};
    const double scale = 1.0 / std::sqrt(static_cast<double>(sizes[l]));
    for (double& w : layer.weight.data()) w = scale * rng.normal();
    layers.push_back(std::move(layer));
  }
  return EmbedModel(std::move(layers), normalize_output);
}

std::size_t EmbedModel::input_dim() const noexcept {
  return layers_.empty() ? 0 : layers_.front().weight.cols();
}

std::size_t EmbedModel::output_dim() const noexcept {
  return layers_.empty() ? 0 : layers_.back().weight.rows();
}

Feature EmbedModel::forward(std::span<const double> x) const {
  ForwardCache cache;
  return forward(x, cache);
}

Feature EmbedModel::forward(std::span<const double> x, ForwardCache& cache) const {
  if (x.size() != input_dim()) {
    throw UsageError("model input has dimension " + std::to_string(x.size()) + ", expected " +
                     std::to_string(input_dim()));
  }
  cache.inputs.clear();
  Feature h(x.begin(), x.end());
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& layer = layers_[l];
    cache.inputs.push_back(h);
    Feature z(layer.bias);
    for (std::size_t o = 0; o < z.size(); ++o) {
      const auto w = layer.weight.row(o);
      for (std::size_t i = 0; i < h.size(); ++i) z[o] += w[i] * h[i];
    }
    if (l + 1 < layers_.size()) {
      for (double& v : z) v = std::tanh(v);
    }
    h = std::move(z);
  }
  cache.pre_norm = h;
  if (normalize_) {
    double norm = 0.0;
    for (double v : h) norm += v * v;
    norm = std::sqrt(norm);
    if (norm == 0.0) throw NumericError("model output has zero norm");
    for (double& v : h) v /= norm;
  }
  cache.output = h;
  return h;
}

void EmbedModel::backward(const ForwardCache& cache, std::span<const double> d_output,
                          std::span<double> grad) const {
  if (grad.size() != parameter_count()) throw UsageError("gradient buffer has the wrong size");
  if (d_output.size() != output_dim()) throw UsageError("output gradient has the wrong size");

  Feature delta(d_output.begin(), d_output.end());
  if (normalize_) {
    // y = z / |z|: dz = (dy - y (y . dy)) / |z|
    double norm = 0.0;
    for (double v : cache.pre_norm) norm += v * v;
    norm = std::sqrt(norm);
    double dot = 0.0;
    for (std::size_t i = 0; i < delta.size(); ++i) dot += cache.output[i] * delta[i];
    for (std::size_t i = 0; i < delta.size(); ++i) {
      delta[i] = (delta[i] - cache.output[i] * dot) / norm;
    }
  }

  std::vector<std::size_t> offsets;
  std::size_t offset = 0;
  for (const auto& layer : layers_) {
    offsets.push_back(offset);
    offset += layer.weight.rows() * layer.weight.cols() + layer.bias.size();
  }

  for (std::size_t l = layers_.size(); l-- > 0;) {
    const auto& layer = layers_[l];
    const auto& in = cache.inputs[l];
    const std::size_t rows = layer.weight.rows();
    const std::size_t cols = layer.weight.cols();
    double* gw = grad.data() + offsets[l];
    double* gb = gw + rows * cols;
    for (std::size_t o = 0; o < rows; ++o) {
      for (std::size_t i = 0; i < cols; ++i) gw[o * cols + i] += delta[o] * in[i];
      gb[o] += delta[o];
    }
    if (l == 0) break;
    // The input of layer l is tanh of the previous pre-activation.
    Feature prev(cols, 0.0);
    for (std::size_t o = 0; o < rows; ++o) {
      const auto w = layer.weight.row(o);
      for (std::size_t i = 0; i < cols; ++i) prev[i] += w[i] * delta[o];
    }
    for (std::size_t i = 0; i < cols; ++i) prev[i] *= 1.0 - in[i] * in[i];
    delta = std::move(prev);
  }
}

std::vector<double> EmbedModel::parameters() const {
  std::vector<double> flat;
  flat.reserve(parameter_count());
  for (const auto& layer : layers_) {
    const auto w = layer.weight.data();
    flat.insert(flat.end(), w.begin(), w.end());
    flat.insert(flat.end(), layer.bias.begin(), layer.bias.end());
  }
  return flat;
}

void EmbedModel::set_parameters(std::span<const double> flat) {
  if (flat.size() != parameter_count()) throw UsageError("parameter vector has the wrong size");
  std::size_t k = 0;
  for (auto& layer : layers_) {
    for (double& w : layer.weight.data()) w = flat[k++];
    for (double& b : layer.bias) b = flat[k++];
  }
}

std::size_t EmbedModel::parameter_count() const noexcept {
  std::size_t n = 0;
  for (const auto& layer : layers_) n += layer.weight.rows() * layer.weight.cols() + layer.bias.size();
  return n;
}

bool EmbedModel::finite() const noexcept {
  for (const auto& layer : layers_) {
    for (double w : layer.weight.data()) {
      if (!std::isfinite(w)) return false;
    }
    for (double b : layer.bias) {
      if (!std::isfinite(b)) return false;
    }
  }
  return true;
}

EmbeddingSet EmbedModel::embed(const EmbeddingSet& set) const {
  std::vector<Embedding> out;
  out.reserve(set.size());
  for (const auto& e : set) out.push_back({e.subject_id, e.sample_id, forward(e.feature)});
  return EmbeddingSet(std::move(out), output_dim(), set.metric());
}

}  // namespace osb
