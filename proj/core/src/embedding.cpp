#include "osb/embedding.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "osb/error.hpp"

namespace osb {

std::string_view to_string(Metric metric) noexcept {
  return metric == Metric::Cosine ? "cosine" : "euclidean";
}

Metric parse_metric(std::string_view text) {
  std::string lower(text);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "euclidean") return Metric::Euclidean;
  if (lower == "cosine") return Metric::Cosine;
  throw UsageError("unknown metric '" + std::string(text) + "' (expected euclidean|cosine)");
}

EmbeddingSet::EmbeddingSet(std::size_t dim, Metric metric) : dim_(dim), metric_(metric) {
  if (dim_ == 0) throw DataError("embedding dimension must be at least 1");
}

EmbeddingSet::EmbeddingSet(std::vector<Embedding> entries, std::size_t dim, Metric metric)
    : entries_(std::move(entries)), dim_(dim), metric_(metric) {
  if (dim_ == 0) throw DataError("embedding dimension must be at least 1");
  index();
}

EmbeddingSet EmbeddingSet::from_entries(std::vector<Embedding> entries, Metric metric) {
  if (entries.empty()) throw DataError("cannot infer dimension of an empty embedding list");
  const std::size_t dim = entries.front().feature.size();
  return EmbeddingSet(std::move(entries), dim, metric);
}

void EmbeddingSet::index() {
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const auto& e = entries_[i];
    const std::size_t row = i + 1;
    if (e.feature.size() != dim_) {
      throw DataError("dimension " + std::to_string(e.feature.size()) +
                          " does not match expected " + std::to_string(dim_),
                      row);
    }
    for (double v : e.feature) {
      if (!std::isfinite(v)) throw DataError("non-finite feature value", row);
    }
    auto [it, inserted] = row_by_key_.emplace(e.key(), i);
    if (!inserted) {
      throw DataError("duplicate (subject_id, sample_id) = (" + e.subject_id + ", " +
                          e.sample_id + ")",
                      row);
    }
    auto& rows = rows_by_subject_[e.subject_id];
    if (rows.empty()) subjects_.push_back(e.subject_id);
    rows.push_back(i);
  }
}

bool EmbeddingSet::has_subject(std::string_view subject_id) const {
  return rows_by_subject_.find(subject_id) != rows_by_subject_.end();
}

std::span<const std::size_t> EmbeddingSet::rows_of(std::string_view subject_id) const {
  auto it = rows_by_subject_.find(subject_id);
  if (it == rows_by_subject_.end()) return {};
  return it->second;
}

std::size_t EmbeddingSet::find(const SampleKey& key) const {
  auto it = row_by_key_.find(key);
  return it == row_by_key_.end() ? entries_.size() : it->second;
}

EmbeddingSet EmbeddingSet::subset(std::span<const std::size_t> rows) const {
  std::vector<Embedding> picked;
  picked.reserve(rows.size());
  for (std::size_t r : rows) picked.push_back(entries_.at(r));
  return EmbeddingSet(std::move(picked), dim_, metric_);
}

EmbeddingSet EmbeddingSet::with_metric(Metric metric) const {
  EmbeddingSet copy = *this;
  copy.metric_ = metric;
  return copy;
}

}  // namespace osb
