#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "osb/config.hpp"
#include "osb/embedding.hpp"
#include "osb/matrix.hpp"
#include "osb/model.hpp"

namespace osb {

enum class Nuisance { None, RandomLinearMix };

std::string_view to_string(Nuisance nuisance) noexcept;
Nuisance parse_nuisance(std::string_view text);

/// Gaussian identity clusters. `num_subjects` train subjects and
/// `test_subjects` disjoint test subjects, each with `samples_per_subject`
/// samples.
struct SyntheticDataSpec {
  std::size_t num_subjects = 200;
  std::size_t test_subjects = 100;
  std::size_t samples_per_subject = 6;
  std::size_t ambient_dim = 32;
  std::size_t signal_dim = 16;  ///< 0 means ambient_dim
  double class_separation = 1.0;
  double noise_sigma = 0.16;
  Nuisance nuisance = Nuisance::RandomLinearMix;
  /// Log-range of the mix's singular values: they are exp(u), u ~ U[-s, s].
  double mix_spread = 1.0;
  /// Similarity used for training episodes and evaluation.
  Metric metric = Metric::Cosine;
  std::uint64_t seed = 0;

  void validate() const;
  std::size_t effective_signal_dim() const noexcept { return signal_dim == 0 ? ambient_dim : signal_dim; }
};

struct SyntheticData {
  EmbeddingSet train;
  EmbeddingSet test;
};

/// Centers uniform on the sphere of radius class_separation within the first
/// signal_dim coordinates (zero elsewhere), samples = center +
/// N(0, noise_sigma^2 I) over all ambient coordinates, optionally mapped
/// through one fixed random invertible matrix. Train ids are "s<k>", test ids
/// "t<k>".
SyntheticData generate_synthetic(const SyntheticDataSpec& spec);

enum class TrainLoss { Triplet, TripletPlusOurs, SoftmaxPlusOurs, OursOnly };

std::string_view to_string(TrainLoss loss) noexcept;
TrainLoss parse_train_loss(std::string_view text);

struct TrainConfig {
  TrainLoss loss = TrainLoss::Triplet;
  LossHyperparams hp{};
  double lr = 0.003;
  std::size_t steps = 2000;
  std::size_t batch_subjects = 32;
  std::size_t samples_per_subject_in_batch = 4;
  std::uint64_t seed = 0;
  double momentum = 0.9;
  double margin = 0.2;         ///< triplet margin
  double ours_scale = 1.0;     ///< weight on idl + lambda * rtm
  double softmax_scale = 8.0;  ///< logit multiplier of the softmax head

  /// Throws UsageError. lr = 0 is accepted and leaves the model unchanged.
  void validate() const;
  bool uses_episode() const noexcept { return loss != TrainLoss::Triplet; }
};

/// Loss of one batch and its gradient in the model parameters (laid out as
/// EmbedModel::parameters()) and the softmax head.
struct StepObjective {
  double value = 0.0;
  std::vector<double> model_grad;
  Matrix classifier_grad;
};

/// `labels[i]` is the class index of batch row i into the softmax head rows.
/// The episode (when used) is drawn from `episode_seed`; its partition does
/// not depend on the features, so the objective is a smooth function of the
/// parameters for a fixed seed.
StepObjective step_objective(const EmbedModel& model, const Matrix& classifier,
                             const EmbeddingSet& batch, const std::vector<std::size_t>& labels,
                             const TrainConfig& cfg, std::uint64_t episode_seed);

struct TrainResult {
  EmbedModel model;
  Matrix classifier;            ///< empty unless SoftmaxPlusOurs
  std::vector<double> history;  ///< loss of every step
};

/// SGD with momentum. Throws UsageError when a batch cannot be formed and
/// NumericError naming the step when the loss stops being finite.
TrainResult train(const EmbedModel& model, const EmbeddingSet& data, const TrainConfig& cfg);

/// Exponential moving average with smoothing `decay`, seeded with values[0].
std::vector<double> moving_average(const std::vector<double>& values, double decay);

std::string to_json(const SyntheticDataSpec& spec, int indent = -1);
std::string to_json(const TrainConfig& cfg, int indent = -1);
std::string to_json(const LossHyperparams& hp, int indent = -1);
/// Overwrites the fields present in `text`; throws UsageError on malformed JSON.
void synthetic_spec_from_json(const std::string& text, SyntheticDataSpec& spec);
void train_config_from_json(const std::string& text, TrainConfig& cfg);

}  // namespace osb
