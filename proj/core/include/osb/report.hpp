#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "osb/config.hpp"
#include "osb/metrics.hpp"
#include "osb/similarity.hpp"

namespace osb {

/// Score distributions of one score matrix on a shared min-max normalised
/// axis: every non-mated score, the per-probe maximum non-mated score, and
/// every genuine score. `thresholds` holds (fpir, normalised threshold).
struct HistogramTable {
  std::size_t bins = 0;
  double lo = 0.0;
  double hi = 0.0;
  std::vector<std::size_t> nonmated;
  std::vector<std::size_t> max_nonmated;
  std::vector<std::size_t> genuine;
  std::vector<std::array<double, 2>> thresholds;
};

/// (x - lo) / (hi - lo), or 0 when the range is empty.
double normalize_score(double x, double lo, double hi) noexcept;

/// Throws UsageError for bins < 2 and DataError when a category is empty.
HistogramTable score_histograms(const ScoreMatrix& scores, const std::vector<bool>& mated_flags,
                                std::span<const std::string> true_subject, std::size_t bins,
                                std::span<const double> fpirs = {});

void write_histogram_csv(const HistogramTable& table, std::ostream& out,
                         std::string_view comment = {});
HistogramTable read_histogram_csv(std::istream& in);

/// Mean FN counts per split; in comparison mode also how many FNs the two
/// arms share and how many are exclusive to each.
struct BreakdownTable {
  std::size_t splits = 0;
  double mean_detection_only = 0.0;
  double mean_identification_only = 0.0;
  double mean_both = 0.0;

  struct Comparison {
    double mean_detection_only = 0.0;
    double mean_identification_only = 0.0;
    double mean_both = 0.0;
    double mean_shared = 0.0;      ///< FN in both arms
    double mean_only_first = 0.0;  ///< FN in the first arm only
    double mean_only_second = 0.0;
  };
  std::optional<Comparison> comparison;
};

/// Throws UsageError when the two lists differ in length. Shared/exclusive
/// counts are only filled when every split's mated probes align (same seed and
/// probe count); otherwise they stay zero.
BreakdownTable fn_breakdown(std::span<const OpenSetResult> results,
                            std::optional<std::span<const OpenSetResult>> comparison = std::nullopt);

void write_breakdown_csv(const BreakdownTable& table, std::ostream& out,
                         std::string_view comment = {});

enum class FieldLoss { Softmax, Triplet, Detection, RelativeThreshold };

std::string_view to_string(FieldLoss loss) noexcept;
FieldLoss parse_field_loss(std::string_view text);

/// A 2-D toy configuration. The varying sample is the grid point:
///   Softmax: a sample of class `label`, logits g_c . x over gallery points;
///   Triplet: the positive of anchor gallery[label], negative nonmated[0];
///   Detection: a mated probe of gallery[label], loss -S_det averaged over
///              the non-mated points;
///   RelativeThreshold: non-mated probe nonmated[0] (its stored position is
///              replaced by the grid point), loss RTM under `hp.rtm_pooling`.
struct FieldLayout {
  std::vector<std::array<double, 2>> gallery{{0.0, 0.0}, {2.0, 0.0}};
  std::vector<std::array<double, 2>> nonmated{{1.0, 1.0}};
  std::size_t label = 0;
  double margin = 0.2;
  LossHyperparams hp{};
};

struct GridSpec {
  double x_min = -2.0;
  double x_max = 4.0;
  double y_min = -3.0;
  double y_max = 3.0;
  std::size_t resolution = 25;
};

struct FieldSample {
  double x = 0.0;
  double y = 0.0;
  double du = 0.0;  ///< dL/dx
  double dv = 0.0;  ///< dL/dy
  double magnitude = 0.0;
};

/// Loss gradient at one point of the layout.
FieldSample field_gradient(FieldLoss loss, const FieldLayout& layout, double x, double y);
/// Loss value at one point; paired with field_gradient for checks.
double field_value(FieldLoss loss, const FieldLayout& layout, double x, double y);

/// Row-major grid (y outer, x inner). Throws UsageError for resolution < 2.
std::vector<FieldSample> gradient_field(FieldLoss loss, const FieldLayout& layout,
                                        const GridSpec& grid);

void write_field_csv(std::span<const FieldSample> field, std::ostream& out,
                     std::string_view comment = {});

/// "config=<16 hex digits>" fingerprint of a canonical config string.
std::string fingerprint(std::string_view canonical_config);

}  // namespace osb
