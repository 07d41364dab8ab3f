#include "osb/trainer.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"
#include "osb/episode.hpp"
#include "osb/error.hpp"
#include "osb/losses.hpp"
#include "osb/rng.hpp"

namespace osb {

using nlohmann::ordered_json;

std::string_view to_string(Nuisance nuisance) noexcept {
  return nuisance == Nuisance::None ? "none" : "random-linear-mix";
}

Nuisance parse_nuisance(std::string_view text) {
  if (text == "none") return Nuisance::None;
  if (text == "random-linear-mix" || text == "mix") return Nuisance::RandomLinearMix;
  throw UsageError("unknown nuisance '" + std::string(text) + "' (expected none|random-linear-mix)");
}

void SyntheticDataSpec::validate() const {
  if (num_subjects == 0) throw UsageError("synthetic data needs at least one subject");
  if (samples_per_subject == 0) throw UsageError("samples_per_subject must be positive");
  if (ambient_dim == 0) throw UsageError("ambient_dim must be positive");
  if (signal_dim > ambient_dim) throw UsageError("signal_dim cannot exceed ambient_dim");
  if (!(class_separation > 0.0) || !std::isfinite(class_separation)) {
    throw UsageError("class_separation must be positive");
  }
  if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) {
    throw UsageError("noise_sigma must be non-negative");
  }
  if (!(mix_spread >= 0.0) || !std::isfinite(mix_spread)) throw UsageError("mix_spread must be non-negative");
}

namespace {

// Q diag(exp(u)) with Q a random orthogonal matrix from Gram-Schmidt.
Matrix random_mix(Rng& rng, std::size_t d, double spread) {
  Matrix q(d, d);
  for (std::size_t r = 0; r < d; ++r) {
    auto row = q.row(r);
    for (;;) {
      for (double& v : row) v = rng.normal();
      for (std::size_t p = 0; p < r; ++p) {
        const auto prev = q.row(p);
        double dot = 0.0;
        for (std::size_t i = 0; i < d; ++i) dot += row[i] * prev[i];
        for (std::size_t i = 0; i < d; ++i) row[i] -= dot * prev[i];
      }
      double norm = 0.0;
      for (double v : row) norm += v * v;
      norm = std::sqrt(norm);
      if (norm > 1e-6) {
        for (double& v : row) v /= norm;
        break;
      }
    }
  }
  Matrix m(d, d);
  for (std::size_t c = 0; c < d; ++c) {
    const double s = std::exp(spread * (2.0 * rng.uniform() - 1.0));
    for (std::size_t r = 0; r < d; ++r) m(r, c) = q(r, c) * s;
  }
  return m;
}

EmbeddingSet make_subjects(Rng& rng, const SyntheticDataSpec& spec, std::size_t count,
                           const char* prefix, const Matrix* mix) {
  const std::size_t d = spec.ambient_dim;
  std::vector<Embedding> rows;
  rows.reserve(count * spec.samples_per_subject);
  Feature center(d, 0.0);
  Feature raw(d);
  const std::size_t signal = spec.effective_signal_dim();
  for (std::size_t s = 0; s < count; ++s) {
    double norm = 0.0;
    do {
      for (std::size_t i = 0; i < signal; ++i) center[i] = rng.normal();
      norm = 0.0;
      for (double v : center) norm += v * v;
      norm = std::sqrt(norm);
    } while (norm == 0.0);
    for (double& v : center) v *= spec.class_separation / norm;
    const std::string id = prefix + std::to_string(s);
    for (std::size_t k = 0; k < spec.samples_per_subject; ++k) {
      for (std::size_t i = 0; i < d; ++i) raw[i] = center[i] + spec.noise_sigma * rng.normal();
      Feature x = raw;
      if (mix) {
        for (std::size_t r = 0; r < d; ++r) {
          double acc = 0.0;
          for (std::size_t c = 0; c < d; ++c) acc += (*mix)(r, c) * raw[c];
          x[r] = acc;
        }
      }
      rows.push_back({id, std::to_string(k), std::move(x)});
    }
  }
  return EmbeddingSet(std::move(rows), d, spec.metric);
}

}  // namespace

SyntheticData generate_synthetic(const SyntheticDataSpec& spec) {
  spec.validate();
  Rng mix_rng(derive_seed(spec.seed, "mix"));
  Matrix mix;
  if (spec.nuisance == Nuisance::RandomLinearMix) mix = random_mix(mix_rng, spec.ambient_dim, spec.mix_spread);
  const Matrix* m = mix.empty() ? nullptr : &mix;
  Rng train_rng(derive_seed(spec.seed, "train"));
  Rng test_rng(derive_seed(spec.seed, "test"));
  return {make_subjects(train_rng, spec, spec.num_subjects, "s", m),
          make_subjects(test_rng, spec, spec.test_subjects, "t", m)};
}

std::string_view to_string(TrainLoss loss) noexcept {
  switch (loss) {
    case TrainLoss::Triplet: return "triplet";
    case TrainLoss::TripletPlusOurs: return "triplet+ours";
    case TrainLoss::SoftmaxPlusOurs: return "softmax+ours";
    case TrainLoss::OursOnly: return "ours";
  }
  return "unknown";
}

TrainLoss parse_train_loss(std::string_view text) {
  for (auto l : {TrainLoss::Triplet, TrainLoss::TripletPlusOurs, TrainLoss::SoftmaxPlusOurs,
                 TrainLoss::OursOnly}) {
    if (text == to_string(l)) return l;
  }
  throw UsageError("unknown training loss '" + std::string(text) +
                   "' (expected triplet|triplet+ours|softmax+ours|ours)");
}

void TrainConfig::validate() const {
  hp.validate();
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw UsageError("lr must be non-negative");
  if (steps < 1) throw UsageError("steps must be at least 1");
  if (batch_subjects < 2) throw UsageError("batch_subjects must be at least 2");
  if (samples_per_subject_in_batch < 2) throw UsageError("samples_per_subject_in_batch must be at least 2");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw UsageError("momentum must lie in [0, 1)");
  if (!(margin >= 0.0)) throw UsageError("margin must be non-negative");
  if (!(ours_scale >= 0.0)) throw UsageError("ours_scale must be non-negative");
  if (!(softmax_scale > 0.0)) throw UsageError("softmax_scale must be positive");
}

StepObjective step_objective(const EmbedModel& model, const Matrix& classifier,
                             const EmbeddingSet& batch, const std::vector<std::size_t>& labels,
                             const TrainConfig& cfg, std::uint64_t episode_seed) {
  if (labels.size() != batch.size()) throw UsageError("one label per batch row is required");
  const std::size_t n = batch.size();
  const std::size_t dim = model.output_dim();
  std::vector<ForwardCache> caches(n);
  std::vector<Feature> outputs(n);
  for (std::size_t i = 0; i < n; ++i) outputs[i] = model.forward(batch[i].feature, caches[i]);
  std::vector<Feature> d_out(n, Feature(dim, 0.0));

  StepObjective obj;
  obj.model_grad.assign(model.parameter_count(), 0.0);

  if (cfg.loss == TrainLoss::Triplet || cfg.loss == TrainLoss::TripletPlusOurs) {
    const auto t = batch_all_triplet_loss(outputs, labels, cfg.margin);
    obj.value += t.value;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = 0; k < dim; ++k) d_out[i][k] += t.grad[i][k];
    }
  }

  if (cfg.loss == TrainLoss::SoftmaxPlusOurs) {
    if (classifier.cols() != dim) throw UsageError("softmax head width differs from the model output");
    const double scale = cfg.softmax_scale;
    Matrix logits(n, classifier.rows());
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t c = 0; c < classifier.rows(); ++c) {
        const auto w = classifier.row(c);
        double acc = 0.0;
        for (std::size_t k = 0; k < dim; ++k) acc += w[k] * outputs[i][k];
        logits(i, c) = scale * acc;
      }
    }
    const auto sm = softmax_loss(logits, labels);
    obj.value += sm.value;
    obj.classifier_grad = Matrix(classifier.rows(), dim);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t c = 0; c < classifier.rows(); ++c) {
        const double g = scale * sm.grad_logits(i, c);
        if (g == 0.0) continue;
        const auto w = classifier.row(c);
        auto gw = obj.classifier_grad.row(c);
        for (std::size_t k = 0; k < dim; ++k) {
          gw[k] += g * outputs[i][k];
          d_out[i][k] += g * w[k];
        }
      }
    }
  }

  if (cfg.uses_episode()) {
    std::vector<Embedding> rows;
    rows.reserve(n);
    for (std::size_t i = 0; i < n; ++i) rows.push_back({batch[i].subject_id, batch[i].sample_id, outputs[i]});
    const EmbeddingSet embedded(std::move(rows), dim, batch.metric());
    const auto episode = sample_episode(embedded, cfg.hp.p_mated, episode_seed);
    const auto ours = total_loss(episode, cfg.hp);
    const double w = cfg.ours_scale;
    obj.value += w * ours.value;
    auto add = [&](std::size_t row, const Feature& g, double scale) {
      for (std::size_t k = 0; k < dim; ++k) d_out[row][k] += scale * g[k];
    };
    for (std::size_t j = 0; j < episode.gallery.size(); ++j) {
      const auto& members = episode.gallery[j].members;
      for (std::size_t m : members) add(m, ours.grad.gallery[j], w / static_cast<double>(members.size()));
    }
    for (std::size_t p = 0; p < episode.mated_probes.size(); ++p) {
      add(episode.mated_probes[p].source, ours.grad.mated[p], w);
    }
    for (std::size_t p = 0; p < episode.nonmated_probes.size(); ++p) {
      add(episode.nonmated_probes[p].source, ours.grad.nonmated[p], w);
    }
  }

  for (std::size_t i = 0; i < n; ++i) model.backward(caches[i], d_out[i], obj.model_grad);
  return obj;
}

TrainResult train(const EmbedModel& model, const EmbeddingSet& data, const TrainConfig& cfg) {
  cfg.validate();
  if (model.layers().empty()) throw UsageError("model has no layers");
  if (data.dim() != model.input_dim()) {
    throw UsageError("data dimension " + std::to_string(data.dim()) + " differs from model input " +
                     std::to_string(model.input_dim()));
  }
  const auto& subjects = data.subjects();
  std::vector<std::size_t> eligible;
  for (std::size_t s = 0; s < subjects.size(); ++s) {
    if (data.rows_of(subjects[s]).size() >= 2) eligible.push_back(s);
  }
  if (eligible.size() < cfg.batch_subjects) {
    throw UsageError("batch needs " + std::to_string(cfg.batch_subjects) +
                     " subjects with two or more samples, data has " + std::to_string(eligible.size()));
  }

  TrainResult result{model, Matrix(), {}};
  const std::size_t dim = model.output_dim();
  if (cfg.loss == TrainLoss::SoftmaxPlusOurs) {
    Rng head_rng(derive_seed(cfg.seed, "head"));
    result.classifier = Matrix(subjects.size(), dim);
    const double scale = 1.0 / std::sqrt(static_cast<double>(dim));
    for (double& w : result.classifier.data()) w = scale * head_rng.normal();
  }

  std::vector<double> params = result.model.parameters();
  std::vector<double> velocity(params.size(), 0.0);
  std::vector<double> head_velocity(result.classifier.data().size(), 0.0);
  Rng batch_rng(derive_seed(cfg.seed, "batch"));
  const std::uint64_t episode_root = derive_seed(cfg.seed, "episode");
  result.history.reserve(cfg.steps);

  for (std::size_t step = 0; step < cfg.steps; ++step) {
    std::vector<Embedding> rows;
    std::vector<std::size_t> labels;
    for (std::size_t pick : batch_rng.sample_without_replacement(eligible.size(), cfg.batch_subjects)) {
      const std::size_t s = eligible[pick];
      const auto members = data.rows_of(subjects[s]);
      const std::size_t take = std::min(cfg.samples_per_subject_in_batch, members.size());
      for (std::size_t m : batch_rng.sample_without_replacement(members.size(), take)) {
        rows.push_back(data[members[m]]);
        labels.push_back(s);
      }
    }
    const EmbeddingSet batch(std::move(rows), data.dim(), data.metric());
    const auto obj = step_objective(result.model, result.classifier, batch, labels, cfg,
                                    derive_seed(episode_root, step));
    const bool grad_finite =
        std::all_of(obj.model_grad.begin(), obj.model_grad.end(), [](double g) { return std::isfinite(g); });
    if (!std::isfinite(obj.value) || !grad_finite) {
      throw NumericError("training diverged at step " + std::to_string(step + 1) + " (loss " +
                         std::to_string(obj.value) + ")");
    }
    result.history.push_back(obj.value);
    if (cfg.lr == 0.0) continue;
    for (std::size_t k = 0; k < params.size(); ++k) {
      velocity[k] = cfg.momentum * velocity[k] + obj.model_grad[k];
      params[k] -= cfg.lr * velocity[k];
    }
    result.model.set_parameters(params);
    if (!obj.classifier_grad.empty()) {
      auto head = result.classifier.data();
      const auto g = obj.classifier_grad.data();
      for (std::size_t k = 0; k < head.size(); ++k) {
        head_velocity[k] = cfg.momentum * head_velocity[k] + g[k];
        head[k] -= cfg.lr * head_velocity[k];
      }
    }
  }
  return result;
}

std::vector<double> moving_average(const std::vector<double>& values, double decay) {
  std::vector<double> out;
  out.reserve(values.size());
  double ema = values.empty() ? 0.0 : values.front();
  for (double v : values) {
    ema = decay * ema + (1.0 - decay) * v;
    out.push_back(ema);
  }
  return out;
}

namespace {

ordered_json hp_json(const LossHyperparams& hp) {
  ordered_json j;
  j["alpha"] = hp.alpha;
  j["beta"] = hp.beta;
  j["gamma"] = hp.gamma;
  j["lambda"] = hp.lambda;
  j["p_mated"] = hp.p_mated;
  j["softrank_include_self"] = hp.softrank_include_self;
  j["detach_threshold"] = hp.detach_threshold;
  j["rtm_pooling"] = std::string(to_string(hp.rtm_pooling));
  return j;
}

void hp_from_json(const nlohmann::json& j, LossHyperparams& hp) {
  if (j.contains("alpha")) hp.alpha = j["alpha"].get<double>();
  if (j.contains("beta")) hp.beta = j["beta"].get<double>();
  if (j.contains("gamma")) hp.gamma = j["gamma"].get<double>();
  if (j.contains("lambda")) hp.lambda = j["lambda"].get<double>();
  if (j.contains("p_mated")) hp.p_mated = j["p_mated"].get<double>();
  if (j.contains("softrank_include_self")) hp.softrank_include_self = j["softrank_include_self"].get<bool>();
  if (j.contains("detach_threshold")) hp.detach_threshold = j["detach_threshold"].get<bool>();
  if (j.contains("rtm_pooling")) hp.rtm_pooling = parse_pooling(j["rtm_pooling"].get<std::string>());
}

}  // namespace

std::string to_json(const SyntheticDataSpec& spec, int indent) {
  ordered_json j;
  j["num_subjects"] = spec.num_subjects;
  j["test_subjects"] = spec.test_subjects;
  j["samples_per_subject"] = spec.samples_per_subject;
  j["ambient_dim"] = spec.ambient_dim;
  j["signal_dim"] = spec.signal_dim;
  j["class_separation"] = spec.class_separation;
  j["noise_sigma"] = spec.noise_sigma;
  j["nuisance"] = std::string(to_string(spec.nuisance));
  j["mix_spread"] = spec.mix_spread;
  j["metric"] = std::string(to_string(spec.metric));
  j["seed"] = spec.seed;
  return j.dump(indent);
}

std::string to_json(const LossHyperparams& hp, int indent) { return hp_json(hp).dump(indent); }

std::string to_json(const TrainConfig& cfg, int indent) {
  ordered_json j;
  j["loss"] = std::string(to_string(cfg.loss));
  j["hp"] = hp_json(cfg.hp);
  j["lr"] = cfg.lr;
  j["steps"] = cfg.steps;
  j["batch_subjects"] = cfg.batch_subjects;
  j["samples_per_subject_in_batch"] = cfg.samples_per_subject_in_batch;
  j["seed"] = cfg.seed;
  j["momentum"] = cfg.momentum;
  j["margin"] = cfg.margin;
  j["ours_scale"] = cfg.ours_scale;
  j["softmax_scale"] = cfg.softmax_scale;
  return j.dump(indent);
}

void synthetic_spec_from_json(const std::string& text, SyntheticDataSpec& spec) {
  try {
    const auto j = nlohmann::json::parse(text);
    if (j.contains("num_subjects")) spec.num_subjects = j["num_subjects"].get<std::size_t>();
    if (j.contains("test_subjects")) spec.test_subjects = j["test_subjects"].get<std::size_t>();
    if (j.contains("samples_per_subject")) spec.samples_per_subject = j["samples_per_subject"].get<std::size_t>();
    if (j.contains("ambient_dim")) spec.ambient_dim = j["ambient_dim"].get<std::size_t>();
    if (j.contains("signal_dim")) spec.signal_dim = j["signal_dim"].get<std::size_t>();
    if (j.contains("class_separation")) spec.class_separation = j["class_separation"].get<double>();
    if (j.contains("noise_sigma")) spec.noise_sigma = j["noise_sigma"].get<double>();
    if (j.contains("nuisance")) spec.nuisance = parse_nuisance(j["nuisance"].get<std::string>());
    if (j.contains("mix_spread")) spec.mix_spread = j["mix_spread"].get<double>();
    if (j.contains("metric")) spec.metric = parse_metric(j["metric"].get<std::string>());
    if (j.contains("seed")) spec.seed = j["seed"].get<std::uint64_t>();
  } catch (const nlohmann::json::exception& ex) {
    throw UsageError(std::string("malformed data spec: ") + ex.what());
  }
}

void train_config_from_json(const std::string& text, TrainConfig& cfg) {
  try {
    const auto j = nlohmann::json::parse(text);
    if (j.contains("loss")) cfg.loss = parse_train_loss(j["loss"].get<std::string>());
    if (j.contains("hp")) hp_from_json(j["hp"], cfg.hp);
    if (j.contains("lr")) cfg.lr = j["lr"].get<double>();
    if (j.contains("steps")) cfg.steps = j["steps"].get<std::size_t>();
    if (j.contains("batch_subjects")) cfg.batch_subjects = j["batch_subjects"].get<std::size_t>();
    if (j.contains("samples_per_subject_in_batch")) {
      cfg.samples_per_subject_in_batch = j["samples_per_subject_in_batch"].get<std::size_t>();
    }
    if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("momentum")) cfg.momentum = j["momentum"].get<double>();
    if (j.contains("margin")) cfg.margin = j["margin"].get<double>();
    if (j.contains("ours_scale")) cfg.ours_scale = j["ours_scale"].get<double>();
    if (j.contains("softmax_scale")) cfg.softmax_scale = j["softmax_scale"].get<double>();
  } catch (const nlohmann::json::exception& ex) {
    throw UsageError(std::string("malformed training config: ") + ex.what());
  }
}

}  // namespace osb
