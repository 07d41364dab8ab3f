#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "osb/config.hpp"
#include "osb/embedding.hpp"
#include "osb/matrix.hpp"

namespace osb {

/// Euclidean: 1 / (1 + ||a - b||), in (0, 1].
/// Cosine: a.b / (||a|| ||b||), clamped to [-1, 1]; zero vectors are rejected.
/// Throws UsageError on dimension mismatch, DataError on a zero cosine vector.
double similarity(std::span<const double> a, std::span<const double> b, Metric metric);

struct SimilarityGrad {
  double value = 0.0;
  Feature d_a;  ///< d similarity / d a
  Feature d_b;  ///< d similarity / d b
};

/// Similarity together with its gradient in both arguments. For Euclidean
/// similarity at a == b the gradient is defined as zero.
SimilarityGrad similarity_grad(std::span<const double> a, std::span<const double> b,
                               Metric metric);

/// One feature for `subject_id`: the component-wise mean of its templates, or
/// one template picked uniformly from a stream keyed by (seed, subject_id).
Feature aggregate_gallery(const EmbeddingSet& set, std::string_view subject_id,
                          GalleryAggregation mode, std::uint64_t seed);

/// Dense probe x gallery-subject score matrix.
class ScoreMatrix {
 public:
  ScoreMatrix() = default;
  /// Throws DataError if shapes disagree, a score is non-finite, or a gallery
  /// subject repeats.
  ScoreMatrix(std::vector<SampleKey> probes, std::vector<std::string> gallery_subjects,
              Matrix scores);

  std::size_t rows() const noexcept { return scores_.rows(); }
  std::size_t cols() const noexcept { return scores_.cols(); }
  const std::vector<SampleKey>& probes() const noexcept { return probes_; }
  const std::vector<std::string>& gallery_subjects() const noexcept { return gallery_; }
  const Matrix& scores() const noexcept { return scores_; }
  double operator()(std::size_t i, std::size_t j) const noexcept { return scores_(i, j); }
  std::span<const double> row(std::size_t i) const noexcept { return scores_.row(i); }

  std::optional<std::size_t> column_of(std::string_view subject_id) const;
  std::vector<std::string> probe_subjects() const;
  /// mated[i] is true when probe i's subject has a gallery column.
  std::vector<bool> mated_flags() const;

  friend bool operator==(const ScoreMatrix&, const ScoreMatrix&) = default;

 private:
  std::vector<SampleKey> probes_;
  std::vector<std::string> gallery_;
  Matrix scores_;
};

/// Entry (i, j) = similarity(probe_i, aggregate_gallery(subject_j)). Columns
/// follow the gallery's first-appearance subject order. Rows are split across
/// `threads` workers; the result does not depend on the thread count.
ScoreMatrix score_matrix(const EmbeddingSet& probes, const EmbeddingSet& gallery,
                         const SimilarityConfig& cfg, GalleryAggregation agg,
                         std::uint64_t seed, unsigned threads = 1);

/// `probe_subject,probe_sample,<gallery_subject_1>,...`; lines starting with
/// '#' are comments.
void write_score_matrix_csv(const ScoreMatrix& m, std::ostream& out,
                            std::string_view comment = {});
ScoreMatrix read_score_matrix_csv(std::istream& in);

}  // namespace osb
