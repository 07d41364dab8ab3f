#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "osb/config.hpp"
#include "osb/embedding.hpp"
#include "osb/protocol.hpp"
#include "osb/similarity.hpp"

namespace osb {

/// Why a mated probe counted as a false negative.
enum class FnCause : std::uint8_t { None, DetectionOnly, IdentificationOnly, Both };

struct OpenSetResult {
  double fpir = 0.0;            ///< requested FPIR
  double empirical_fpir = 0.0;  ///< fraction of non-mated probes accepted at `threshold`
  double threshold = 0.0;
  double fnir = 0.0;
  std::size_t fn_detection_only = 0;
  std::size_t fn_identification_only = 0;
  std::size_t fn_both = 0;
  std::size_t num_mated = 0;
  std::size_t num_nonmated = 0;
  std::size_t rank_R = 0;
  std::uint64_t seed = 0;
  /// Per mated probe, in row order of the score matrix.
  std::vector<FnCause> mated_outcomes;

  std::size_t fn_total() const noexcept { return fn_detection_only + fn_identification_only + fn_both; }
  friend bool operator==(const OpenSetResult&, const OpenSetResult&) = default;
};

struct AggregateResult {
  double fpir = 0.0;
  double median_fnir = 0.0;
  double std_fnir = 0.0;  ///< population standard deviation
  std::vector<OpenSetResult> per_split;

  friend bool operator==(const AggregateResult&, const AggregateResult&) = default;
};

/// Threshold from the per-probe maxima of non-mated scores.
///
/// With the scores sorted descending s(1) >= ... >= s(M) and k = floor(fpir*M),
/// returns (s(k) + s(k+1)) / 2 for k >= 1 and s(1) + max(1e-9, 1e-9|s(1)|)
/// for k = 0. A score is accepted when score >= threshold.
double threshold_at_fpir(std::span<const double> max_nonmated_scores, double fpir);

/// 1 + number of entries in `row` strictly greater than row[genuine_col].
std::size_t genuine_rank(std::span<const double> row, std::size_t genuine_col);

/// FNIR at a given FPIR with rank-R identification, plus the FN breakdown.
/// Throws UsageError when there are no mated or no non-mated probes, and
/// DataError when a mated probe's subject has no gallery column.
OpenSetResult fnir_at_fpir(const ScoreMatrix& scores, const std::vector<bool>& mated_flags,
                           std::span<const std::string> true_subject, double fpir,
                           std::size_t rank_R);

/// Fraction of probes whose genuine rank is <= k. Every probe must be mated.
double cmc_rank_k(const ScoreMatrix& scores, std::span<const std::string> true_subject,
                  std::size_t k);
/// Same, restricted to the rows flagged as mated.
double cmc_rank_k(const ScoreMatrix& scores, std::span<const std::string> true_subject,
                  const std::vector<bool>& mated_flags, std::size_t k);

double median(std::vector<double> values);
double population_std(std::span<const double> values);

AggregateResult aggregate(double fpir, std::vector<OpenSetResult> per_split);

/// Scores of one applied split.
struct SplitScores {
  ScoreMatrix scores;
  std::vector<bool> mated_flags;
  std::vector<std::string> true_subjects;
};

SplitScores score_split(const EmbeddingSet& test_set, const OpenSetSplit& split,
                        const EvalConfig& cfg, const SimilarityConfig& sim);

struct SplitEvaluation {
  std::uint64_t seed = 0;
  std::vector<OpenSetResult> per_fpir;  ///< aligned with EvalConfig::fpir_targets
  double rank1 = 0.0;                   ///< CMC rank-1 over the split's mated probes

  friend bool operator==(const SplitEvaluation&, const SplitEvaluation&) = default;
};

SplitEvaluation evaluate_split(const SplitScores& split_scores, const EvalConfig& cfg,
                               std::uint64_t seed);

struct OpenSetEvaluation {
  EvalConfig config;
  SimilarityConfig similarity;
  std::vector<SplitEvaluation> splits;
  std::vector<AggregateResult> per_fpir;  ///< aligned with config.fpir_targets
  double median_rank1 = 0.0;

  const AggregateResult& at_fpir(double fpir) const;
};

/// Generates the splits, scores each one, and aggregates median/std FNIR per
/// FPIR target. Splits run on up to `threads` workers; results are joined by
/// split index and do not depend on the thread count.
OpenSetEvaluation evaluate_open_set(const EmbeddingSet& test_set, const EvalConfig& cfg,
                                    const SimilarityConfig& sim, unsigned threads = 1);

std::string to_json(const EvalConfig& cfg, const SimilarityConfig& sim, int indent = -1);
void eval_config_from_json(const std::string& text, EvalConfig& cfg, SimilarityConfig& sim);
std::string to_json(const OpenSetEvaluation& eval, int indent = 2);
/// One character per mated probe: '.' none, 'D' detection only,
/// 'I' identification only, 'B' both.
std::string encode_outcomes(const std::vector<FnCause>& outcomes);
std::vector<FnCause> decode_outcomes(std::string_view text);

/// Per-split results at `fpir` from the JSON written by to_json. Throws
/// DataError when the document is malformed or has no such FPIR.
std::vector<OpenSetResult> results_from_json(const std::string& text, double fpir);

void write_results_csv(const OpenSetEvaluation& eval, std::ostream& out,
                       std::string_view comment = {});

}  // namespace osb
