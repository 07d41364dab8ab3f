#pragma once

#include <compare>
#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace osb {

enum class Metric { Euclidean, Cosine };

std::string_view to_string(Metric metric) noexcept;
/// Accepts "euclidean" / "cosine" (case-insensitive). Throws UsageError.
Metric parse_metric(std::string_view text);

using Feature = std::vector<double>;

/// Identifies one sample: the subject it belongs to and its id within that
/// subject.
struct SampleKey {
  std::string subject_id;
  std::string sample_id;

  friend auto operator<=>(const SampleKey&, const SampleKey&) = default;
  friend bool operator==(const SampleKey&, const SampleKey&) = default;
};

struct Embedding {
  std::string subject_id;
  std::string sample_id;
  Feature feature;

  SampleKey key() const { return {subject_id, sample_id}; }
  friend bool operator==(const Embedding&, const Embedding&) = default;
};

/// Immutable collection of labelled feature vectors.
///
/// Construction validates that every feature has dimension `dim()`, that all
/// components are finite, and that (subject_id, sample_id) pairs are unique.
/// Violations throw DataError naming the 1-based entry index.
class EmbeddingSet {
 public:
  explicit EmbeddingSet(std::size_t dim, Metric metric = Metric::Euclidean);
  EmbeddingSet(std::vector<Embedding> entries, std::size_t dim,
               Metric metric = Metric::Euclidean);

  /// Dimension taken from the first entry. Requires a non-empty list.
  static EmbeddingSet from_entries(std::vector<Embedding> entries,
                                   Metric metric = Metric::Euclidean);

  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }
  std::size_t dim() const noexcept { return dim_; }
  Metric metric() const noexcept { return metric_; }

  const std::vector<Embedding>& entries() const noexcept { return entries_; }
  const Embedding& operator[](std::size_t i) const noexcept { return entries_[i]; }
  auto begin() const noexcept { return entries_.begin(); }
  auto end() const noexcept { return entries_.end(); }

  /// Distinct subject ids in order of first appearance.
  const std::vector<std::string>& subjects() const noexcept { return subjects_; }
  bool has_subject(std::string_view subject_id) const;
  /// Row indices of a subject's samples in row order; empty if unknown.
  std::span<const std::size_t> rows_of(std::string_view subject_id) const;
  /// Row index of a sample, or size() if absent.
  std::size_t find(const SampleKey& key) const;

  EmbeddingSet subset(std::span<const std::size_t> rows) const;
  EmbeddingSet with_metric(Metric metric) const;

  friend bool operator==(const EmbeddingSet& a, const EmbeddingSet& b) {
    return a.dim_ == b.dim_ && a.metric_ == b.metric_ && a.entries_ == b.entries_;
  }

 private:
  void index();

  std::vector<Embedding> entries_;
  std::size_t dim_;
  Metric metric_;
  std::vector<std::string> subjects_;
  std::map<std::string, std::vector<std::size_t>, std::less<>> rows_by_subject_;
  std::map<SampleKey, std::size_t> row_by_key_;
};

}  // namespace osb
