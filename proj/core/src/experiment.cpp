#include "osb/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <thread>

#include "json.hpp"
#include "osb/error.hpp"
#include "osb/io.hpp"
#include "osb/protocol.hpp"
#include "osb/rng.hpp"

namespace osb {

using nlohmann::ordered_json;

namespace {

std::size_t fpir_index(const EvalConfig& eval, double fpir) {
  for (std::size_t i = 0; i < eval.fpir_targets.size(); ++i) {
    if (eval.fpir_targets[i] == fpir) return i;
  }
  throw UsageError("report FPIR " + format_real(fpir) + " is not among the evaluation targets");
}

ArmReport run_arm(const std::string& name, const SyntheticData& data, const TrainConfig& cfg,
                  const EvalConfig& eval, const ModelSpec& spec, double report_fpir,
                  unsigned threads, std::size_t bins) {
  Rng init_rng(derive_seed(cfg.seed, "init"));
  const auto initial = EmbedModel::random(data.train.dim(), spec.hidden_dim, spec.output_dim,
                                          spec.normalize_output, init_rng);
  auto trained = train(initial, data.train, cfg);
  const auto test = trained.model.embed(data.test);

  ArmReport arm;
  arm.name = name;
  arm.config = cfg;
  arm.history = std::move(trained.history);
  const SimilarityConfig sim{data.test.metric()};
  arm.evaluation = evaluate_open_set(test, eval, sim, threads);
  const auto& agg = arm.evaluation.per_fpir[fpir_index(eval, report_fpir)];
  arm.median_fnir = agg.median_fnir;
  arm.std_fnir = agg.std_fnir;
  arm.median_rank1 = arm.evaluation.median_rank1;

  std::vector<double> normalized;
  const auto splits = generate_splits(test, eval);
  const double fpirs[] = {report_fpir};
  for (std::size_t k = 0; k < splits.size(); ++k) {
    const auto s = score_split(test, splits[k], eval, sim);
    auto h = score_histograms(s.scores, s.mated_flags, s.true_subjects, bins, fpirs);
    normalized.push_back(h.thresholds.front()[1]);
    if (k == 0) arm.histogram = std::move(h);
  }
  arm.normalized_threshold = median(normalized);
  return arm;
}

ordered_json model_json(const ModelSpec& m) {
  ordered_json j;
  j["hidden_dim"] = m.hidden_dim;
  j["output_dim"] = m.output_dim;
  j["normalize_output"] = m.normalize_output;
  return j;
}

ordered_json arm_json(const ArmReport& arm) {
  ordered_json j;
  j["name"] = arm.name;
  j["loss"] = std::string(to_string(arm.config.loss));
  j["median_fnir"] = arm.median_fnir;
  j["std_fnir"] = arm.std_fnir;
  j["median_rank1"] = arm.median_rank1;
  j["normalized_threshold"] = arm.normalized_threshold;
  j["final_loss"] = arm.history.empty() ? 0.0 : arm.history.back();
  j["evaluation"] = ordered_json::parse(to_json(arm.evaluation, -1));
  return j;
}

ordered_json breakdown_json(const BreakdownTable& t) {
  ordered_json j;
  j["splits"] = t.splits;
  j["baseline"] = {{"detection_only", t.mean_detection_only},
                   {"identification_only", t.mean_identification_only},
                   {"both", t.mean_both}};
  if (t.comparison) {
    const auto& c = *t.comparison;
    j["ours"] = {{"detection_only", c.mean_detection_only},
                 {"identification_only", c.mean_identification_only},
                 {"both", c.mean_both}};
    j["shared"] = c.mean_shared;
    j["baseline_only"] = c.mean_only_first;
    j["ours_only"] = c.mean_only_second;
  }
  return j;
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  return out;
}

}  // namespace

ExperimentPreset default_experiment(std::uint64_t seed) {
  ExperimentPreset p;
  p.data.seed = seed;
  p.baseline.loss = TrainLoss::Triplet;
  p.baseline.seed = seed;
  p.ours = p.baseline;
  p.ours.loss = TrainLoss::TripletPlusOurs;
  p.eval.seed = seed;
  return p;
}

ExperimentReport run_experiment(const SyntheticDataSpec& data_spec, const TrainConfig& baseline,
                                const TrainConfig& ours, const EvalConfig& eval,
                                const ModelSpec& model, double report_fpir, unsigned threads,
                                std::size_t histogram_bins) {
  eval.validate();
  baseline.validate();
  ours.validate();
  fpir_index(eval, report_fpir);
  const auto data = generate_synthetic(data_spec);

  ExperimentReport report;
  report.data = data_spec;
  report.model = model;
  report.eval = eval;
  report.report_fpir = report_fpir;
  if (threads > 1) {
    // The arms are independent; each keeps its own result slot.
    std::jthread worker([&] {
      report.ours = run_arm("ours", data, ours, eval, model, report_fpir, 1, histogram_bins);
    });
    report.baseline = run_arm("baseline", data, baseline, eval, model, report_fpir, threads - 1,
                              histogram_bins);
  } else {
    report.baseline = run_arm("baseline", data, baseline, eval, model, report_fpir, 1, histogram_bins);
    report.ours = run_arm("ours", data, ours, eval, model, report_fpir, 1, histogram_bins);
  }
  const std::size_t f = fpir_index(eval, report_fpir);
  report.breakdown = fn_breakdown(report.baseline.evaluation.per_fpir[f].per_split,
                                  std::span<const OpenSetResult>(report.ours.evaluation.per_fpir[f].per_split));
  report.fingerprint = fingerprint(experiment_config_json(report));
  return report;
}

std::string experiment_config_json(const ExperimentReport& r) {
  ordered_json j;
  j["data"] = ordered_json::parse(to_json(r.data));
  j["model"] = model_json(r.model);
  j["eval"] = ordered_json::parse(to_json(r.eval, SimilarityConfig{}));
  j["report_fpir"] = r.report_fpir;
  j["baseline"] = ordered_json::parse(to_json(r.baseline.config));
  j["ours"] = ordered_json::parse(to_json(r.ours.config));
  return j.dump();
}

std::string to_json(const ExperimentReport& r, int indent) {
  ordered_json j;
  j["fingerprint"] = r.fingerprint;
  j["config"] = ordered_json::parse(experiment_config_json(r));
  j["baseline"] = arm_json(r.baseline);
  j["ours"] = arm_json(r.ours);
  j["breakdown"] = breakdown_json(r.breakdown);
  return j.dump(indent);
}

void write_experiment(const ExperimentReport& r, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw DataError("cannot create output directory " + dir.string() + ": " + ec.message());
  const std::string comment = "osb experiment " + r.fingerprint;

  open_output(dir / "report.json") << to_json(r) << '\n';

  {
    auto out = open_output(dir / "summary.csv");
    out << "# " << comment << '\n';
    out << "arm,loss,fpir,median_fnir,std_fnir,median_rank1,normalized_threshold,"
           "mean_fn_det,mean_fn_id,mean_fn_both\n";
    const auto& b = r.breakdown;
    const auto row = [&](const ArmReport& arm, double det, double id, double both) {
      out << arm.name << ',' << to_string(arm.config.loss) << ',' << format_exact(r.report_fpir) << ','
          << format_exact(arm.median_fnir) << ',' << format_exact(arm.std_fnir) << ','
          << format_exact(arm.median_rank1) << ',' << format_exact(arm.normalized_threshold) << ','
          << format_exact(det) << ',' << format_exact(id) << ',' << format_exact(both) << '\n';
    };
    row(r.baseline, b.mean_detection_only, b.mean_identification_only, b.mean_both);
    if (b.comparison) {
      row(r.ours, b.comparison->mean_detection_only, b.comparison->mean_identification_only,
          b.comparison->mean_both);
    }
  }
  {
    auto out = open_output(dir / "history.csv");
    out << "# " << comment << '\n' << "step,baseline,ours\n";
    const std::size_t n = std::max(r.baseline.history.size(), r.ours.history.size());
    for (std::size_t s = 0; s < n; ++s) {
      out << s + 1 << ',';
      if (s < r.baseline.history.size()) out << format_exact(r.baseline.history[s]);
      out << ',';
      if (s < r.ours.history.size()) out << format_exact(r.ours.history[s]);
      out << '\n';
    }
  }
  for (const ArmReport* arm : {&r.baseline, &r.ours}) {
    auto h = open_output(dir / ("histogram_" + arm->name + ".csv"));
    write_histogram_csv(arm->histogram, h, comment);
    auto e = open_output(dir / ("eval_" + arm->name + ".csv"));
    write_results_csv(arm->evaluation, e, comment);
  }
  auto out = open_output(dir / "breakdown.csv");
  write_breakdown_csv(r.breakdown, out, comment);
}

}  // namespace osb
