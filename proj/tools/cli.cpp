#include "cli.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "osb/error.hpp"
#include "osb/experiment.hpp"
#include "osb/gradcheck.hpp"
#include "osb/io.hpp"
#include "osb/metrics.hpp"
#include "osb/protocol.hpp"
#include "osb/report.hpp"

namespace osb::cli {

namespace {

using nlohmann::ordered_json;

/// Reads `--config` files as JSON. Top-level keys name long flags of the
/// subcommand being run; nested objects address subcommands explicitly.
class JsonConfig : public CLI::Config {
 public:
  explicit JsonConfig(const CLI::App* root) : root_(root) {}

  std::string to_config(const CLI::App* app, bool default_also, bool, std::string) const override {
    ordered_json j;
    for (const CLI::Option* opt : app->get_options({})) {
      if (opt->get_lnames().empty() || !opt->get_configurable()) continue;
      const std::string name = opt->get_lnames().front();
      if (opt->count() > 0) {
        const auto& res = opt->results();
        j[name] = res.size() == 1 ? ordered_json(res.front()) : ordered_json(res);
      } else if (default_also && !opt->get_default_str().empty()) {
        j[name] = opt->get_default_str();
      }
    }
    return j.dump(2);
  }

  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    nlohmann::json j;
    try {
      input >> j;
    } catch (const nlohmann::json::exception& ex) {
      throw CLI::ConversionError(std::string("config is not valid JSON: ") + ex.what());
    }
    if (!j.is_object()) throw CLI::ConversionError("config must be a JSON object");
    // Config is read after the command line, so the invoked chain is known.
    std::vector<std::string> chain;
    for (const CLI::App* app = root_; !app->get_subcommands().empty();) {
      app = app->get_subcommands().front();
      chain.push_back(app->get_name());
    }
    std::vector<CLI::ConfigItem> items;
    collect(j, {}, chain, items);
    return items;
  }

 private:
  const CLI::App* root_;

  static std::string scalar(const nlohmann::json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    return v.dump();
  }

  // Flat keys belong to the invoked subcommand; nested objects name their
  // subcommand path from the root.
  static void collect(const nlohmann::json& j, const std::vector<std::string>& path,
                      const std::vector<std::string>& chain, std::vector<CLI::ConfigItem>& items) {
    for (auto it = j.begin(); it != j.end(); ++it) {
      if (it.value().is_object()) {
        auto sub = path;
        sub.push_back(it.key());
        collect(it.value(), sub, chain, items);
        continue;
      }
      CLI::ConfigItem item;
      item.parents = path.empty() ? chain : path;
      item.name = it.key();
      if (it.value().is_array()) {
        for (const auto& v : it.value()) item.inputs.push_back(scalar(v));
      } else {
        item.inputs.push_back(scalar(it.value()));
      }
      items.push_back(std::move(item));
    }
  }
};

std::string timestamp_utc() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
}

/// Writes to `path`, or to `out` when the path is empty or "-".
void emit(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << text;
  } else {
    write_file(path, text);
  }
}

std::array<double, 2> parse_point(std::string_view text) {
  const auto comma = text.find(',');
  if (comma == std::string_view::npos) throw UsageError("point '" + std::string(text) + "' is not x,y");
  return {parse_real(text.substr(0, comma), 0), parse_real(text.substr(comma + 1), 0)};
}

std::vector<std::array<double, 2>> parse_points(const std::string& text) {
  std::vector<std::array<double, 2>> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto end = text.find(';', start);
    const auto piece = std::string_view(text).substr(start, end == std::string::npos ? std::string::npos : end - start);
    if (!piece.empty()) out.push_back(parse_point(piece));
    if (end == std::string::npos) break;
    start = end + 1;
  }
  return out;
}

// Options shared by the embedding-reading subcommands.
struct EmbeddingInput {
  std::string path;
  std::string format;
  std::string metric;

  void add_to(CLI::App* app) {
    app->add_option("--embeddings,-e", path, "Embedding file (.csv or binary)")->required();
    app->add_option("--format", format, "csv | binary (default: from the file extension)");
    app->add_option("--metric", metric, "euclidean | cosine (overrides the file's metric)");
  }

  EmbeddingSet load() const {
    const auto fmt = format.empty() ? format_from_path(path) : parse_format(format);
    std::optional<Metric> m;
    if (!metric.empty()) m = parse_metric(metric);
    return load_embeddings(path, fmt, m);
  }
};

struct EvalOptions {
  std::vector<double> fpir{0.001, 0.01};
  std::size_t rank = 20;
  std::size_t splits = 50;
  double q = 0.215;
  std::uint64_t seed = 0;
  std::string aggregation = "mean";
  std::optional<std::size_t> fixed_gallery;

  void add_to(CLI::App* app, bool with_fpir) {
    if (with_fpir) {
      app->add_option("--fpir", fpir, "FPIR targets")->capture_default_str();
      app->add_option("--rank,-R", rank, "Rank R for identification")->capture_default_str();
    }
    app->add_option("--splits,-N", splits, "Number of open-set splits")->capture_default_str();
    app->add_option("--q", q, "Fraction of test subjects held out as non-mated")->capture_default_str();
    app->add_option("--seed", seed, "Protocol seed")->envname("OSB_SEED")->capture_default_str();
    app->add_option("--aggregation", aggregation, "mean | random gallery template")->capture_default_str();
    app->add_option("--fixed-gallery", fixed_gallery, "Keep one gallery of this many subjects");
  }

  EvalConfig config() const {
    EvalConfig cfg;
    cfg.fpir_targets = fpir;
    std::sort(cfg.fpir_targets.begin(), cfg.fpir_targets.end());
    cfg.fpir_targets.erase(std::unique(cfg.fpir_targets.begin(), cfg.fpir_targets.end()),
                           cfg.fpir_targets.end());
    cfg.rank_R = rank;
    cfg.num_splits = splits;
    cfg.q_nonmated = q;
    cfg.seed = seed;
    cfg.gallery_aggregation = parse_aggregation(aggregation);
    cfg.fixed_gallery = fixed_gallery;
    cfg.validate();
    return cfg;
  }
};

std::string with_timestamp(const std::string& json_text, bool timestamp) {
  auto j = ordered_json::parse(json_text);
  if (timestamp) j["generated_at"] = timestamp_utc();
  return j.dump(2) + "\n";
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Open-set biometric identification toolkit", "osb"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "osb 0.1.0");
  app.set_config("--config", "", "JSON file whose keys mirror the long flags; flags win");
  app.config_formatter(std::make_shared<JsonConfig>(&app));
  app.fallthrough();
  app.allow_config_extras(CLI::config_extras_mode::error);

  bool no_timestamp = false;
  unsigned threads = 1;

  // protocol gen
  auto* protocol = app.add_subcommand("protocol", "Open-set split generation");
  protocol->require_subcommand(1);
  auto* gen = protocol->add_subcommand("gen", "Write open-set splits as JSON");
  EmbeddingInput gen_in;
  EvalOptions gen_eval;
  std::string gen_out;
  gen_in.add_to(gen);
  gen_eval.add_to(gen, false);
  gen->add_option("--out,-o", gen_out, "Output JSON (default: stdout)");

  // eval
  auto* eval = app.add_subcommand("eval", "FNIR@FPIR over random open-set splits");
  EmbeddingInput eval_in;
  EvalOptions eval_opts;
  std::string eval_out;
  std::string eval_csv;
  eval_in.add_to(eval);
  eval_opts.add_to(eval, true);
  eval->add_option("--out,-o", eval_out, "Output JSON (default: stdout)");
  eval->add_option("--csv", eval_csv, "Also write per-split results as CSV");
  eval->add_option("--threads", threads, "Worker threads for splits")->capture_default_str();
  eval->add_flag("--no-timestamp", no_timestamp, "Omit the generated_at field");

  // loss grad-check / loss field
  auto* loss = app.add_subcommand("loss", "Loss diagnostics");
  loss->require_subcommand(1);
  auto* gradcheck = loss->add_subcommand("grad-check", "Compare analytic and finite-difference gradients");
  std::size_t gc_episodes = 100;
  std::uint64_t gc_seed = 0;
  double gc_step = 1e-5;
  double gc_tolerance = 1e-6;
  std::string gc_metric = "euclidean";
  std::string gc_out;
  LossHyperparams gc_hp;
  std::string gc_pooling = "per-probe";
  gradcheck->add_option("--episodes", gc_episodes, "Random episodes per loss")->capture_default_str();
  gradcheck->add_option("--seed", gc_seed, "Episode seed")->envname("OSB_SEED")->capture_default_str();
  gradcheck->add_option("--step", gc_step, "Central-difference step")->capture_default_str();
  gradcheck->add_option("--tolerance", gc_tolerance, "Maximum accepted relative error")->capture_default_str();
  gradcheck->add_option("--metric", gc_metric, "euclidean | cosine")->capture_default_str();
  gradcheck->add_option("--alpha", gc_hp.alpha)->capture_default_str();
  gradcheck->add_option("--beta", gc_hp.beta)->capture_default_str();
  gradcheck->add_option("--gamma", gc_hp.gamma)->capture_default_str();
  gradcheck->add_option("--lambda", gc_hp.lambda)->capture_default_str();
  gradcheck->add_option("--pooling", gc_pooling, "per-probe | joint RTM pooling")->capture_default_str();
  gradcheck->add_option("--out,-o", gc_out, "Also write the table as CSV");

  auto* field = loss->add_subcommand("field", "Gradient field of a loss over a 2-D grid");
  std::string field_loss = "rtm";
  std::string field_out;
  std::string field_gallery = "0,0;2,0";
  std::string field_nonmated = "1,1";
  std::string field_pooling = "per-probe";
  std::vector<double> field_bounds{-2.0, 4.0, -3.0, 3.0};
  FieldLayout layout;
  GridSpec grid;
  field->add_option("--loss", field_loss, "softmax | triplet | detection | rtm")->capture_default_str();
  field->add_option("--gallery", field_gallery, "Gallery points x,y;x,y")->capture_default_str();
  field->add_option("--nonmated", field_nonmated, "Non-mated points x,y;x,y")->capture_default_str();
  field->add_option("--label", layout.label, "Gallery index of the varying sample")->capture_default_str();
  field->add_option("--margin", layout.margin, "Triplet margin")->capture_default_str();
  field->add_option("--alpha", layout.hp.alpha)->capture_default_str();
  field->add_option("--pooling", field_pooling, "per-probe | joint RTM pooling")->capture_default_str();
  field->add_option("--bounds", field_bounds, "x_min x_max y_min y_max")->expected(4)->capture_default_str();
  field->add_option("--resolution", grid.resolution, "Grid points per axis")->capture_default_str();
  field->add_option("--out,-o", field_out, "Output CSV (default: stdout)");

  // train-toy
  auto* toy = app.add_subcommand("train-toy", "Train a baseline and a +ours arm on synthetic data");
  const auto preset = default_experiment();
  SyntheticDataSpec data = preset.data;
  TrainConfig base_cfg = preset.baseline;
  std::string base_loss{to_string(preset.baseline.loss)};
  std::string ours_loss{to_string(preset.ours.loss)};
  ModelSpec model = preset.model;
  EvalOptions toy_eval;
  toy_eval.fpir = {0.01};
  std::string toy_out = "toy-out";
  std::string nuisance{to_string(preset.data.nuisance)};
  std::string data_metric{to_string(preset.data.metric)};
  std::string toy_pooling{to_string(preset.baseline.hp.rtm_pooling)};
  toy->add_option("--out,-o", toy_out, "Output directory")->capture_default_str();
  toy->add_option("--subjects", data.num_subjects, "Training subjects")->capture_default_str();
  toy->add_option("--test-subjects", data.test_subjects, "Test subjects")->capture_default_str();
  toy->add_option("--samples", data.samples_per_subject, "Samples per subject")->capture_default_str();
  toy->add_option("--ambient-dim", data.ambient_dim)->capture_default_str();
  toy->add_option("--signal-dim", data.signal_dim, "Dimensions carrying identity (0 = all)")->capture_default_str();
  toy->add_option("--separation", data.class_separation)->capture_default_str();
  toy->add_option("--noise", data.noise_sigma)->capture_default_str();
  toy->add_option("--nuisance", nuisance, "none | random-linear-mix")->capture_default_str();
  toy->add_option("--mix-spread", data.mix_spread)->capture_default_str();
  toy->add_option("--data-metric", data_metric, "euclidean | cosine")->capture_default_str();
  toy->add_option("--hidden-dim", model.hidden_dim, "0 for a single affine layer")->capture_default_str();
  toy->add_option("--embed-dim", model.output_dim)->capture_default_str();
  toy->add_option("--normalize", model.normalize_output, "L2-normalise embeddings")->capture_default_str();
  toy->add_option("--baseline-loss", base_loss)->capture_default_str();
  toy->add_option("--ours-loss", ours_loss)->capture_default_str();
  toy->add_option("--lr", base_cfg.lr)->capture_default_str();
  toy->add_option("--momentum", base_cfg.momentum)->capture_default_str();
  toy->add_option("--steps", base_cfg.steps)->capture_default_str();
  toy->add_option("--batch-subjects", base_cfg.batch_subjects)->capture_default_str();
  toy->add_option("--batch-samples", base_cfg.samples_per_subject_in_batch)->capture_default_str();
  toy->add_option("--margin", base_cfg.margin)->capture_default_str();
  toy->add_option("--ours-scale", base_cfg.ours_scale)->capture_default_str();
  toy->add_option("--alpha", base_cfg.hp.alpha)->capture_default_str();
  toy->add_option("--beta", base_cfg.hp.beta)->capture_default_str();
  toy->add_option("--gamma", base_cfg.hp.gamma)->capture_default_str();
  toy->add_option("--lambda", base_cfg.hp.lambda)->capture_default_str();
  toy->add_option("--p-mated", base_cfg.hp.p_mated)->capture_default_str();
  toy->add_option("--pooling", toy_pooling, "per-probe | joint RTM pooling")->capture_default_str();
  toy->add_option("--train-seed", base_cfg.seed, "Seed for data, initialisation and batches")
      ->envname("OSB_SEED")
      ->capture_default_str();
  toy->add_option("--fpir", toy_eval.fpir, "FPIR targets (must include 0.01)")->capture_default_str();
  toy->add_option("--rank,-R", toy_eval.rank)->capture_default_str();
  toy_eval.add_to(toy, false);
  toy->add_option("--threads", threads, "Worker threads")->capture_default_str();
  toy->add_flag("--no-timestamp", no_timestamp, "Omit the generated_at field");

  // report hist / breakdown
  auto* report = app.add_subcommand("report", "Analysis tables");
  report->require_subcommand(1);
  auto* hist = report->add_subcommand("hist", "Score histograms of one score matrix");
  std::string hist_scores;
  EmbeddingInput hist_in;
  EvalOptions hist_eval;
  hist_eval.fpir = {0.01};
  std::size_t hist_bins = 50;
  std::size_t hist_split = 0;
  std::string hist_out;
  auto* scores_opt = hist->add_option("--scores", hist_scores, "Score matrix CSV");
  auto* emb_opt = hist->add_option("--embeddings,-e", hist_in.path, "Embeddings; scored on one split");
  scores_opt->excludes(emb_opt);
  hist->add_option("--format", hist_in.format);
  hist->add_option("--metric", hist_in.metric);
  hist->add_option("--fpir", hist_eval.fpir, "FPIRs whose thresholds are reported")->capture_default_str();
  hist_eval.add_to(hist, false);
  hist->add_option("--split", hist_split, "Split index used with --embeddings")->capture_default_str();
  hist->add_option("--bins", hist_bins)->capture_default_str();
  hist->add_option("--out,-o", hist_out, "Output CSV (default: stdout)");

  auto* breakdown = report->add_subcommand("breakdown", "Mean FN causes across splits");
  std::string bd_results;
  std::string bd_compare;
  double bd_fpir = 0.01;
  std::string bd_out;
  breakdown->add_option("--results", bd_results, "Results JSON from eval")->required();
  breakdown->add_option("--compare", bd_compare, "Second results JSON");
  breakdown->add_option("--fpir", bd_fpir)->capture_default_str();
  breakdown->add_option("--out,-o", bd_out, "Output CSV (default: stdout)");

  std::vector<const char*> argv;
  argv.reserve(args.size());
  for (const auto& a : args) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::CallForVersion&) {
    out << "osb 0.1.0\n";
    return kOk;
  } catch (const CLI::FileError& e) {
    err << "error: " << e.what() << '\n';
    return kData;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n";
    const CLI::App* leaf = &app;
    while (!leaf->get_subcommands().empty()) leaf = leaf->get_subcommands().front();
    err << leaf->help();
    return kUsage;
  }

  try {
    if (gen->parsed()) {
      const auto set = gen_in.load();
      const auto splits = generate_splits(set, gen_eval.config());
      emit(gen_out, splits_to_json(splits) + "\n", out);
    } else if (eval->parsed()) {
      const auto set = eval_in.load();
      const auto cfg = eval_opts.config();
      const auto result = evaluate_open_set(set, cfg, SimilarityConfig{set.metric()}, threads);
      emit(eval_out, with_timestamp(to_json(result, -1), !no_timestamp), out);
      if (!eval_csv.empty()) {
        std::ostringstream csv;
        write_results_csv(result, csv, fingerprint(to_json(cfg, SimilarityConfig{set.metric()})));
        write_file(eval_csv, csv.str());
      }
      if (!eval_out.empty() && eval_out != "-") {
        for (std::size_t i = 0; i < cfg.fpir_targets.size(); ++i) {
          out << "FNIR@" << format_real(cfg.fpir_targets[i]) << " FPIR: median "
              << format_real(result.per_fpir[i].median_fnir) << ", std "
              << format_real(result.per_fpir[i].std_fnir) << '\n';
        }
      }
    } else if (gradcheck->parsed()) {
      gc_hp.rtm_pooling = parse_pooling(gc_pooling);
      const auto rows = run_gradient_suite(gc_episodes, gc_seed, gc_hp, parse_metric(gc_metric), gc_step);
      double worst = 0.0;
      char line[128];
      out << "operation         episodes  max_rel_error\n";
      std::ostringstream csv;
      csv << "# " << fingerprint("grad-check seed=" + std::to_string(gc_seed) + " episodes=" +
                                 std::to_string(gc_episodes) + " metric=" + gc_metric)
          << "\noperation,episodes,max_rel_error\n";
      for (const auto& r : rows) {
        std::snprintf(line, sizeof line, "%-16s  %8zu  %.3e\n", r.operation.c_str(), r.episodes, r.max_rel_error);
        out << line;
        csv << r.operation << ',' << r.episodes << ',' << format_exact(r.max_rel_error) << '\n';
        worst = std::max(worst, r.max_rel_error);
      }
      if (!gc_out.empty()) write_file(gc_out, csv.str());
      if (!(worst < gc_tolerance)) {
        err << "error: gradient mismatch " << format_real(worst) << " exceeds tolerance "
            << format_real(gc_tolerance) << '\n';
        return kNumeric;
      }
    } else if (field->parsed()) {
      layout.gallery = parse_points(field_gallery);
      layout.nonmated = parse_points(field_nonmated);
      layout.hp.rtm_pooling = parse_pooling(field_pooling);
      grid = GridSpec{field_bounds[0], field_bounds[1], field_bounds[2], field_bounds[3], grid.resolution};
      const auto kind = parse_field_loss(field_loss);
      const auto samples = gradient_field(kind, layout, grid);
      std::ostringstream csv;
      const std::string canon = "field loss=" + field_loss + " gallery=" + field_gallery +
                                " nonmated=" + field_nonmated + " label=" + std::to_string(layout.label) +
                                " pooling=" + field_pooling + " resolution=" + std::to_string(grid.resolution);
      write_field_csv(samples, csv, fingerprint(canon));
      emit(field_out, csv.str(), out);
    } else if (toy->parsed()) {
      data.nuisance = parse_nuisance(nuisance);
      data.metric = parse_metric(data_metric);
      data.seed = base_cfg.seed;
      base_cfg.hp.rtm_pooling = parse_pooling(toy_pooling);
      TrainConfig ours_cfg = base_cfg;
      base_cfg.loss = parse_train_loss(base_loss);
      ours_cfg.loss = parse_train_loss(ours_loss);
      auto cfg = toy_eval.config();
      const auto result = run_experiment(data, base_cfg, ours_cfg, cfg, model, 0.01, threads);
      write_experiment(result, toy_out);
      if (!no_timestamp) {
        write_file(std::filesystem::path(toy_out) / "report.json",
                   with_timestamp(to_json(result, -1), true));
      }
      out << "baseline (" << to_string(base_cfg.loss) << "): FNIR@1%FPIR " << format_real(result.baseline.median_fnir)
          << ", rank-1 " << format_real(result.baseline.median_rank1) << '\n'
          << "ours (" << to_string(ours_cfg.loss) << "): FNIR@1%FPIR " << format_real(result.ours.median_fnir)
          << ", rank-1 " << format_real(result.ours.median_rank1) << '\n';
    } else if (hist->parsed()) {
      HistogramTable table;
      std::string canon;
      if (!hist_scores.empty()) {
        std::ifstream in(hist_scores);
        if (!in) throw DataError("cannot open " + hist_scores);
        const auto m = read_score_matrix_csv(in);
        table = score_histograms(m, m.mated_flags(), m.probe_subjects(), hist_bins, hist_eval.fpir);
        canon = "hist scores=" + hist_scores;
      } else if (!hist_in.path.empty()) {
        const auto set = hist_in.load();
        auto cfg = hist_eval.config();
        cfg.num_splits = std::max(cfg.num_splits, hist_split + 1);
        const auto splits = generate_splits(set, cfg);
        const auto s = score_split(set, splits[hist_split], cfg, SimilarityConfig{set.metric()});
        table = score_histograms(s.scores, s.mated_flags, s.true_subjects, hist_bins, hist_eval.fpir);
        canon = "hist embeddings=" + hist_in.path + " split=" + std::to_string(hist_split) + " " +
                to_json(cfg, SimilarityConfig{set.metric()});
      } else {
        throw UsageError("report hist needs --scores or --embeddings");
      }
      std::ostringstream csv;
      write_histogram_csv(table, csv, fingerprint(canon + " bins=" + std::to_string(hist_bins)));
      emit(hist_out, csv.str(), out);
    } else if (breakdown->parsed()) {
      const auto first = results_from_json(read_file(bd_results), bd_fpir);
      BreakdownTable table;
      if (bd_compare.empty()) {
        table = fn_breakdown(first);
      } else {
        const auto second = results_from_json(read_file(bd_compare), bd_fpir);
        table = fn_breakdown(first, std::span<const OpenSetResult>(second));
      }
      std::ostringstream csv;
      write_breakdown_csv(table, csv,
                          fingerprint("breakdown results=" + bd_results + " compare=" + bd_compare +
                                      " fpir=" + format_exact(bd_fpir)));
      emit(bd_out, csv.str(), out);
    }
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const NumericError& e) {
    err << "error: " << e.what() << '\n';
    return kNumeric;
  } catch (const DataError& e) {
    err << "error: " << e.what() << '\n';
    return kData;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kData;
  }
  return kOk;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  std::vector<std::string> args(argv, argv + argc);
  return run(args, out, err);
}

}  // namespace osb::cli
