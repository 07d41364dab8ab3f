#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "osb/config.hpp"
#include "osb/metrics.hpp"
#include "osb/report.hpp"
#include "osb/trainer.hpp"

namespace osb {

struct ModelSpec {
  std::size_t hidden_dim = 0;  ///< 0 for a single affine layer
  std::size_t output_dim = 16;
  bool normalize_output = true;
};

struct ArmReport {
  std::string name;
  TrainConfig config;
  std::vector<double> history;
  OpenSetEvaluation evaluation;
  double median_fnir = 0.0;  ///< at ExperimentReport::report_fpir
  double std_fnir = 0.0;
  double median_rank1 = 0.0;
  /// Median over splits of the report-FPIR threshold on the min-max
  /// normalised score axis of that split.
  double normalized_threshold = 0.0;
  HistogramTable histogram;  ///< first split
};

struct ExperimentReport {
  SyntheticDataSpec data;
  ModelSpec model;
  EvalConfig eval;
  double report_fpir = 0.01;
  std::string fingerprint;
  ArmReport baseline;
  ArmReport ours;
  BreakdownTable breakdown;  ///< baseline first, ours second
};

/// Inputs of one experiment run.
struct ExperimentPreset {
  SyntheticDataSpec data;
  ModelSpec model;
  TrainConfig baseline;
  TrainConfig ours;
  EvalConfig eval;
};

/// The shipped overlapping-cluster regime: triplet baseline against
/// triplet + IDL/RTM, every stream keyed by `seed`.
ExperimentPreset default_experiment(std::uint64_t seed = 0);

/// Trains both arms from the same initial model (seeded by each config's
/// seed) on the same synthetic data, then evaluates each on the test
/// subjects. `report_fpir` must be one of eval.fpir_targets.
ExperimentReport run_experiment(const SyntheticDataSpec& data, const TrainConfig& baseline,
                                const TrainConfig& ours, const EvalConfig& eval,
                                const ModelSpec& model = {}, double report_fpir = 0.01,
                                unsigned threads = 1, std::size_t histogram_bins = 50);

/// Canonical JSON of every input of the experiment.
std::string experiment_config_json(const ExperimentReport& report);
std::string to_json(const ExperimentReport& report, int indent = 2);

/// report.json, summary.csv, history.csv, histogram_<arm>.csv,
/// breakdown.csv and eval_<arm>.csv into `dir` (created if missing).
void write_experiment(const ExperimentReport& report, const std::filesystem::path& dir);

}  // namespace osb
