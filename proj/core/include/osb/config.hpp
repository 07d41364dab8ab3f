#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "osb/embedding.hpp"

namespace osb {

struct SimilarityConfig {
  Metric metric = Metric::Euclidean;
};

/// How a gallery subject with several templates is reduced to one feature.
enum class GalleryAggregation { MeanFeature, RandomTemplate };

std::string_view to_string(GalleryAggregation mode) noexcept;
GalleryAggregation parse_aggregation(std::string_view text);

/// Reduction used by relative threshold minimisation.
///   PerProbe: one softmax-weighted average per non-mated probe over its
///             gallery scores, then the mean over non-mated probes.
///   Joint:    a single softmax-weighted average over every non-mated score
///             in the episode, which couples non-mated probes to each other.
enum class RtmPooling { PerProbe, Joint };

std::string_view to_string(RtmPooling pooling) noexcept;
RtmPooling parse_pooling(std::string_view text);

/// Temperatures and weights of the open-set losses. Defaults are the values
/// used for the face/gait/re-id backbones (alpha = gamma = 6, beta = 0.2,
/// lambda = 4, 25% of batch subjects non-mated).
struct LossHyperparams {
  double alpha = 6.0;   ///< detection sigmoid temperature
  double beta = 0.2;    ///< identification sigmoid temperature
  double gamma = 6.0;   ///< softrank sigmoid temperature
  double lambda = 4.0;  ///< RTM weight
  double p_mated = 0.75;

  bool softrank_include_self = true;
  bool detach_threshold = false;
  RtmPooling rtm_pooling = RtmPooling::PerProbe;

  /// Throws UsageError on non-positive temperatures, negative lambda, or
  /// p_mated outside (0, 1).
  void validate() const;
};

struct EvalConfig {
  std::vector<double> fpir_targets{0.001, 0.01};
  std::size_t rank_R = 20;
  std::size_t num_splits = 50;
  double q_nonmated = 0.215;
  std::uint64_t seed = 0;
  GalleryAggregation gallery_aggregation = GalleryAggregation::MeanFeature;
  /// When set, one gallery of this many subjects is drawn once and reused by
  /// every split; only the non-mated subjects and mated probes vary.
  std::optional<std::size_t> fixed_gallery;

  void validate() const;
};

}  // namespace osb
