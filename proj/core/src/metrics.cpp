#include "osb/metrics.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <ostream>
#include <thread>

#include "json.hpp"
#include "osb/error.hpp"
#include "osb/io.hpp"

namespace osb {
namespace {

using nlohmann::ordered_json;

std::size_t fpir_rank(double fpir, std::size_t m) {
  // The small offset keeps products such as 0.29 * 100 from flooring to 28.
  return static_cast<std::size_t>(std::floor(fpir * static_cast<double>(m) + 1e-9));
}

}  // namespace

double threshold_at_fpir(std::span<const double> max_nonmated_scores, double fpir) {
  if (max_nonmated_scores.empty()) throw UsageError("threshold needs at least one non-mated score");
  if (!(fpir > 0.0 && fpir < 1.0)) throw UsageError("FPIR must lie in (0, 1)");
  std::vector<double> sorted(max_nonmated_scores.begin(), max_nonmated_scores.end());
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  const std::size_t m = sorted.size();
  const std::size_t k = std::min(fpir_rank(fpir, m), m - 1);
  if (k == 0) {
    const double top = sorted.front();
    return top + std::max(1e-9, 1e-9 * std::abs(top));
  }
  return 0.5 * (sorted[k - 1] + sorted[k]);
}

std::size_t genuine_rank(std::span<const double> row, std::size_t genuine_col) {
  const double g = row[genuine_col];
  std::size_t greater = 0;
  for (double v : row) greater += v > g ? 1 : 0;
  return greater + 1;
}

OpenSetResult fnir_at_fpir(const ScoreMatrix& scores, const std::vector<bool>& mated_flags,
                           std::span<const std::string> true_subject, double fpir,
                           std::size_t rank_R) {
  if (mated_flags.size() != scores.rows() || true_subject.size() != scores.rows()) {
    throw UsageError("mated flags / true subjects must have one entry per probe row");
  }
  if (rank_R == 0) throw UsageError("rank R must be at least 1");

  std::vector<double> maxima;
  for (std::size_t i = 0; i < scores.rows(); ++i) {
    if (mated_flags[i]) continue;
    const auto row = scores.row(i);
    maxima.push_back(row.empty() ? -INFINITY : *std::max_element(row.begin(), row.end()));
  }
  if (maxima.empty()) throw UsageError("FNIR@FPIR needs at least one non-mated probe");

  OpenSetResult r;
  r.fpir = fpir;
  r.rank_R = rank_R;
  r.threshold = threshold_at_fpir(maxima, fpir);
  r.num_nonmated = maxima.size();
  std::size_t accepted = 0;
  for (double v : maxima) accepted += v >= r.threshold ? 1 : 0;
  r.empirical_fpir = static_cast<double>(accepted) / static_cast<double>(maxima.size());

  for (std::size_t i = 0; i < scores.rows(); ++i) {
    if (!mated_flags[i]) continue;
    const auto col = scores.column_of(true_subject[i]);
    if (!col) {
      throw DataError("mated probe's subject '" + true_subject[i] + "' has no gallery column", i + 1);
    }
    const auto row = scores.row(i);
    const bool det_fail = row[*col] < r.threshold;
    const bool id_fail = genuine_rank(row, *col) > rank_R;
    FnCause cause = FnCause::None;
    if (det_fail && id_fail) {
      cause = FnCause::Both;
      ++r.fn_both;
    } else if (det_fail) {
      cause = FnCause::DetectionOnly;
      ++r.fn_detection_only;
    } else if (id_fail) {
      cause = FnCause::IdentificationOnly;
      ++r.fn_identification_only;
    }
    r.mated_outcomes.push_back(cause);
    ++r.num_mated;
  }
  if (r.num_mated == 0) throw UsageError("FNIR is undefined without mated probes");
  r.fnir = static_cast<double>(r.fn_total()) / static_cast<double>(r.num_mated);
  return r;
}

double cmc_rank_k(const ScoreMatrix& scores, std::span<const std::string> true_subject,
                  std::size_t k) {
  return cmc_rank_k(scores, true_subject, std::vector<bool>(scores.rows(), true), k);
}

double cmc_rank_k(const ScoreMatrix& scores, std::span<const std::string> true_subject,
                  const std::vector<bool>& mated_flags, std::size_t k) {
  if (true_subject.size() != scores.rows() || mated_flags.size() != scores.rows()) {
    throw UsageError("true subjects must have one entry per probe row");
  }
  std::size_t hits = 0;
  std::size_t total = 0;
  for (std::size_t i = 0; i < scores.rows(); ++i) {
    if (!mated_flags[i]) continue;
    const auto col = scores.column_of(true_subject[i]);
    if (!col) {
      throw DataError("probe subject '" + true_subject[i] + "' is absent from the gallery", i + 1);
    }
    hits += genuine_rank(scores.row(i), *col) <= k ? 1 : 0;
    ++total;
  }
  if (total == 0) throw UsageError("CMC needs at least one mated probe");
  return static_cast<double>(hits) / static_cast<double>(total);
}

double median(std::vector<double> values) {
  if (values.empty()) throw UsageError("median of an empty list");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

double population_std(std::span<const double> values) {
  if (values.empty()) throw UsageError("standard deviation of an empty list");
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / static_cast<double>(values.size()));
}

AggregateResult aggregate(double fpir, std::vector<OpenSetResult> per_split) {
  std::vector<double> fnirs;
  fnirs.reserve(per_split.size());
  for (const auto& r : per_split) fnirs.push_back(r.fnir);
  AggregateResult out;
  out.fpir = fpir;
  out.median_fnir = median(fnirs);
  out.std_fnir = population_std(fnirs);
  out.per_split = std::move(per_split);
  return out;
}

SplitScores score_split(const EmbeddingSet& test_set, const OpenSetSplit& split,
                        const EvalConfig& cfg, const SimilarityConfig& sim) {
  auto applied = apply_split(test_set, split);
  SplitScores out{score_matrix(applied.probes, applied.gallery, sim, cfg.gallery_aggregation,
                               split.seed),
                  std::move(applied.mated_flags), {}};
  out.true_subjects = out.scores.probe_subjects();
  return out;
}

SplitEvaluation evaluate_split(const SplitScores& s, const EvalConfig& cfg, std::uint64_t seed) {
  SplitEvaluation out;
  out.seed = seed;
  for (double fpir : cfg.fpir_targets) {
    auto r = fnir_at_fpir(s.scores, s.mated_flags, s.true_subjects, fpir, cfg.rank_R);
    r.seed = seed;
    out.per_fpir.push_back(std::move(r));
  }
  out.rank1 = cmc_rank_k(s.scores, s.true_subjects, s.mated_flags, 1);
  return out;
}

const AggregateResult& OpenSetEvaluation::at_fpir(double fpir) const {
  for (const auto& a : per_fpir) {
    if (a.fpir == fpir) return a;
  }
  throw UsageError("FPIR " + std::to_string(fpir) + " was not evaluated");
}

OpenSetEvaluation evaluate_open_set(const EmbeddingSet& test_set, const EvalConfig& cfg,
                                    const SimilarityConfig& sim, unsigned threads) {
  cfg.validate();
  const auto splits = generate_splits(test_set, cfg);
  OpenSetEvaluation out;
  out.config = cfg;
  out.similarity = sim;
  out.splits.resize(splits.size());

  auto run = [&](std::size_t k) {
    out.splits[k] = evaluate_split(score_split(test_set, splits[k], cfg, sim), cfg, splits[k].seed);
  };
  const std::size_t workers = std::clamp<std::size_t>(threads, 1, splits.size());
  if (workers == 1) {
    for (std::size_t k = 0; k < splits.size(); ++k) run(k);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(splits.size());
    {
      std::vector<std::jthread> pool;
      for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
          for (std::size_t k = next++; k < splits.size(); k = next++) {
            try {
              run(k);
            } catch (...) {
              errors[k] = std::current_exception();
            }
          }
        });
      }
    }
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  for (std::size_t t = 0; t < cfg.fpir_targets.size(); ++t) {
    std::vector<OpenSetResult> per_split;
    per_split.reserve(out.splits.size());
    for (const auto& s : out.splits) per_split.push_back(s.per_fpir[t]);
    out.per_fpir.push_back(aggregate(cfg.fpir_targets[t], std::move(per_split)));
  }
  std::vector<double> rank1;
  for (const auto& s : out.splits) rank1.push_back(s.rank1);
  out.median_rank1 = median(rank1);
  return out;
}

namespace {

ordered_json config_json(const EvalConfig& cfg, const SimilarityConfig& sim) {
  ordered_json j;
  j["fpir_targets"] = cfg.fpir_targets;
  j["rank_R"] = cfg.rank_R;
  j["num_splits"] = cfg.num_splits;
  j["q_nonmated"] = cfg.q_nonmated;
  j["seed"] = cfg.seed;
  j["gallery_aggregation"] = std::string(to_string(cfg.gallery_aggregation));
  if (cfg.fixed_gallery) j["fixed_gallery"] = *cfg.fixed_gallery;
  j["metric"] = std::string(to_string(sim.metric));
  return j;
}

}  // namespace

std::string to_json(const EvalConfig& cfg, const SimilarityConfig& sim, int indent) {
  return config_json(cfg, sim).dump(indent);
}

void eval_config_from_json(const std::string& text, EvalConfig& cfg, SimilarityConfig& sim) {
  try {
    const auto j = nlohmann::json::parse(text);
    if (j.contains("fpir_targets")) cfg.fpir_targets = j["fpir_targets"].get<std::vector<double>>();
    if (j.contains("rank_R")) cfg.rank_R = j["rank_R"].get<std::size_t>();
    if (j.contains("num_splits")) cfg.num_splits = j["num_splits"].get<std::size_t>();
    if (j.contains("q_nonmated")) cfg.q_nonmated = j["q_nonmated"].get<double>();
    if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("gallery_aggregation")) {
      cfg.gallery_aggregation = parse_aggregation(j["gallery_aggregation"].get<std::string>());
    }
    if (j.contains("fixed_gallery")) cfg.fixed_gallery = j["fixed_gallery"].get<std::size_t>();
    if (j.contains("metric")) sim.metric = parse_metric(j["metric"].get<std::string>());
  } catch (const nlohmann::json::exception& ex) {
    throw UsageError(std::string("malformed evaluation config: ") + ex.what());
  }
}

std::string encode_outcomes(const std::vector<FnCause>& outcomes) {
  std::string out;
  out.reserve(outcomes.size());
  for (auto c : outcomes) {
    switch (c) {
      case FnCause::None: out += '.'; break;
      case FnCause::DetectionOnly: out += 'D'; break;
      case FnCause::IdentificationOnly: out += 'I'; break;
      case FnCause::Both: out += 'B'; break;
    }
  }
  return out;
}

std::vector<FnCause> decode_outcomes(std::string_view text) {
  std::vector<FnCause> out;
  out.reserve(text.size());
  for (char ch : text) {
    switch (ch) {
      case '.': out.push_back(FnCause::None); break;
      case 'D': out.push_back(FnCause::DetectionOnly); break;
      case 'I': out.push_back(FnCause::IdentificationOnly); break;
      case 'B': out.push_back(FnCause::Both); break;
      default: throw DataError(std::string("unknown outcome code '") + ch + "'");
    }
  }
  return out;
}

std::vector<OpenSetResult> results_from_json(const std::string& text, double fpir) {
  std::vector<OpenSetResult> out;
  try {
    const auto j = nlohmann::json::parse(text);
    if (!j.contains("per_split") || !j["per_split"].is_array()) {
      throw DataError("results JSON has no per_split array");
    }
    std::size_t row = 0;
    for (const auto& e : j["per_split"]) {
      ++row;
      if (e.at("fpir").get<double>() != fpir) continue;
      OpenSetResult r;
      r.fpir = fpir;
      r.seed = e.at("seed").get<std::uint64_t>();
      r.threshold = e.at("threshold").get<double>();
      r.fnir = e.at("fnir").get<double>();
      r.fn_detection_only = e.at("fn_det").get<std::size_t>();
      r.fn_identification_only = e.at("fn_id").get<std::size_t>();
      r.fn_both = e.at("fn_both").get<std::size_t>();
      r.num_mated = e.at("num_mated").get<std::size_t>();
      r.num_nonmated = e.at("num_nonmated").get<std::size_t>();
      r.empirical_fpir = e.value("empirical_fpir", 0.0);
      r.rank_R = e.value("rank_R", std::size_t{0});
      if (e.contains("outcomes")) r.mated_outcomes = decode_outcomes(e["outcomes"].get<std::string>());
      if (r.fn_total() > r.num_mated) throw DataError("split has more FNs than mated probes", row);
      out.push_back(std::move(r));
    }
  } catch (const nlohmann::json::exception& ex) {
    throw DataError(std::string("malformed results JSON: ") + ex.what());
  }
  if (out.empty()) throw DataError("results JSON has no split at FPIR " + format_real(fpir));
  return out;
}

std::string to_json(const OpenSetEvaluation& eval, int indent) {
  ordered_json j;
  j["config"] = config_json(eval.config, eval.similarity);
  ordered_json per_split = ordered_json::array();
  for (const auto& s : eval.splits) {
    for (const auto& r : s.per_fpir) {
      ordered_json e;
      e["seed"] = r.seed;
      e["fpir"] = r.fpir;
      e["threshold"] = r.threshold;
      e["fnir"] = r.fnir;
      e["fn_det"] = r.fn_detection_only;
      e["fn_id"] = r.fn_identification_only;
      e["fn_both"] = r.fn_both;
      e["num_mated"] = r.num_mated;
      e["num_nonmated"] = r.num_nonmated;
      e["empirical_fpir"] = r.empirical_fpir;
      e["rank_R"] = r.rank_R;
      e["rank1"] = s.rank1;
      e["outcomes"] = encode_outcomes(r.mated_outcomes);
      per_split.push_back(std::move(e));
    }
  }
  j["per_split"] = std::move(per_split);
  ordered_json medians = ordered_json::array();
  ordered_json stds = ordered_json::array();
  for (const auto& a : eval.per_fpir) {
    medians.push_back(a.median_fnir);
    stds.push_back(a.std_fnir);
  }
  j["median_fnir"] = std::move(medians);
  j["std_fnir"] = std::move(stds);
  j["median_rank1"] = eval.median_rank1;
  return j.dump(indent);
}

void write_results_csv(const OpenSetEvaluation& eval, std::ostream& out, std::string_view comment) {
  if (!comment.empty()) out << "# " << comment << '\n';
  out << "split,seed,fpir,threshold,fnir,fn_det,fn_id,fn_both,num_mated,num_nonmated,rank1\n";
  for (std::size_t k = 0; k < eval.splits.size(); ++k) {
    const auto& s = eval.splits[k];
    for (const auto& r : s.per_fpir) {
      out << k << ',' << r.seed << ',' << format_exact(r.fpir) << ',' << format_exact(r.threshold)
          << ',' << format_exact(r.fnir) << ',' << r.fn_detection_only << ','
          << r.fn_identification_only << ',' << r.fn_both << ',' << r.num_mated << ','
          << r.num_nonmated << ',' << format_exact(s.rank1) << '\n';
    }
  }
}

}  // namespace osb
