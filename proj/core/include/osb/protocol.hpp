#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "osb/config.hpp"
#include "osb/embedding.hpp"

namespace osb {

/// One randomised open-set partition of a test set. All lists are kept
/// sorted lexicographically so the JSON form is byte-stable.
struct OpenSetSplit {
  std::uint64_t seed = 0;
  std::vector<std::string> gallery_subjects;
  std::vector<SampleKey> mated_probes;
  std::vector<SampleKey> nonmated_probes;

  friend bool operator==(const OpenSetSplit&, const OpenSetSplit&) = default;
};

/// round(fraction * n), ties rounded up.
std::size_t round_half_up_count(double fraction, std::size_t n);

/// Non-mated subjects per split: round(q * subjects), ties up.
inline std::size_t nonmated_subject_count(double q, std::size_t subjects) {
  return round_half_up_count(q, subjects);
}

/// Builds cfg.num_splits splits; split k draws from substream derive_seed(cfg.seed, k).
///
/// Mated subjects keep all but one uniformly chosen sample as gallery
/// templates; that sample is their single probe. Non-mated subjects contribute
/// every sample as a probe. Subjects with one sample can only be non-mated.
/// With cfg.fixed_gallery set, the gallery is drawn once and the non-mated
/// count is chosen so that non-mated subjects make up q of all probe subjects.
///
/// Throws UsageError for fewer than 2 subjects or when q cannot be honoured
/// (empty gallery, or more single-sample subjects than non-mated slots).
std::vector<OpenSetSplit> generate_splits(const EmbeddingSet& test_set, const EvalConfig& cfg);

struct AppliedSplit {
  EmbeddingSet gallery;
  EmbeddingSet probes;
  std::vector<bool> mated_flags;
};

/// Materialises a split. Gallery and probe rows keep the test set's row
/// order. Throws DataError on references to samples or subjects that are not
/// in `test_set`.
AppliedSplit apply_split(const EmbeddingSet& test_set, const OpenSetSplit& split);

std::string to_json(const OpenSetSplit& split, int indent = -1);
std::string splits_to_json(const std::vector<OpenSetSplit>& splits, int indent = 2);
std::vector<OpenSetSplit> splits_from_json(const std::string& text);

}  // namespace osb
