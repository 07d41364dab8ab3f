#include "osb/config.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "osb/error.hpp"

namespace osb {

std::string_view to_string(GalleryAggregation mode) noexcept {
  return mode == GalleryAggregation::RandomTemplate ? "random" : "mean";
}

GalleryAggregation parse_aggregation(std::string_view text) {
  if (text == "mean") return GalleryAggregation::MeanFeature;
  if (text == "random") return GalleryAggregation::RandomTemplate;
  throw UsageError("unknown gallery aggregation '" + std::string(text) +
                   "' (expected mean|random)");
}

std::string_view to_string(RtmPooling pooling) noexcept {
  return pooling == RtmPooling::Joint ? "joint" : "per-probe";
}

RtmPooling parse_pooling(std::string_view text) {
  if (text == "per-probe") return RtmPooling::PerProbe;
  if (text == "joint") return RtmPooling::Joint;
  throw UsageError("unknown RTM pooling '" + std::string(text) + "' (expected per-probe|joint)");
}

void LossHyperparams::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw UsageError(std::string(name) + " must be a positive finite number");
    }
  };
  positive(alpha, "alpha");
  positive(beta, "beta");
  positive(gamma, "gamma");
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    throw UsageError("lambda must be non-negative");
  }
  if (!(p_mated > 0.0 && p_mated < 1.0)) throw UsageError("p_mated must lie in (0, 1)");
}

void EvalConfig::validate() const {
  if (fpir_targets.empty()) throw UsageError("at least one FPIR target is required");
  for (double f : fpir_targets) {
    if (!(f > 0.0 && f < 1.0)) throw UsageError("FPIR targets must lie in (0, 1)");
  }
  if (!std::is_sorted(fpir_targets.begin(), fpir_targets.end())) {
    throw UsageError("FPIR targets must be sorted ascending");
  }
  if (rank_R == 0) throw UsageError("rank R must be at least 1");
  if (num_splits == 0) throw UsageError("number of splits must be at least 1");
  if (!(q_nonmated > 0.0 && q_nonmated < 1.0)) {
    throw UsageError("non-mated fraction q must lie in (0, 1)");
  }
  if (fixed_gallery && *fixed_gallery == 0) {
    throw UsageError("fixed gallery size must be at least 1");
  }
}

}  // namespace osb
