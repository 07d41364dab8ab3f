#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "osb/embedding.hpp"

namespace osb {

inline constexpr std::size_t kNoIndex = std::numeric_limits<std::size_t>::max();

struct GalleryEntry {
  std::string subject_id;
  Feature feature;
  /// Rows of the source batch averaged into `feature` (empty for hand-built
  /// episodes).
  std::vector<std::size_t> members;

  friend bool operator==(const GalleryEntry&, const GalleryEntry&) = default;
};

struct ProbeEntry {
  std::string subject_id;
  Feature feature;
  std::size_t source = kNoIndex;         ///< row in the source batch
  std::size_t gallery_index = kNoIndex;  ///< mate in the episode gallery (mated probes only)

  friend bool operator==(const ProbeEntry&, const ProbeEntry&) = default;
};

/// A training batch split into gallery G', mated probes P'_K and non-mated
/// probes P'_U.
struct EpisodeBatch {
  std::vector<GalleryEntry> gallery;
  std::vector<ProbeEntry> mated_probes;
  std::vector<ProbeEntry> nonmated_probes;
  Metric metric = Metric::Euclidean;

  std::size_t dim() const noexcept {
    return gallery.empty() ? 0 : gallery.front().feature.size();
  }

  /// Checks the episode invariants: distinct gallery subjects, each mated
  /// probe pointing at its own subject's gallery entry, non-mated subjects
  /// absent from the gallery, and one common dimension. Throws DataError.
  void validate() const;

  friend bool operator==(const EpisodeBatch&, const EpisodeBatch&) = default;
};

/// Builds an episode from a batch: round(p_mated * S) subjects (ties up) are
/// drawn as mated among those with at least two samples. A mated subject's
/// samples are shuffled; the first floor(n/2) are averaged into its gallery
/// entry and the remainder become mated probes. Every sample of a non-mated
/// subject becomes a non-mated probe.
///
/// Throws UsageError when no subject would be mated or non-mated, or when too
/// few subjects have two samples.
EpisodeBatch sample_episode(const EmbeddingSet& batch, double p_mated, std::uint64_t seed);

}  // namespace osb
