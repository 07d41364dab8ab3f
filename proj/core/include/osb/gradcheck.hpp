#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "osb/config.hpp"
#include "osb/episode.hpp"
#include "osb/losses.hpp"
#include "osb/rng.hpp"

namespace osb {

/// Central difference (f(x + h e_k) - f(x - h e_k)) / 2h for every k.
std::vector<double> central_difference(const std::function<double(std::span<const double>)>& f,
                                       std::span<const double> x, double step = 1e-5);

/// max_k |a_k - n_k| / max(max_k |a_k|, max_k |n_k|): the error relative to
/// the gradient's largest component. Returns 0 when both vectors vanish.
double max_relative_error(std::span<const double> analytic, std::span<const double> numeric);

/// Gallery, mated, then non-mated features concatenated.
std::vector<double> flatten_features(const EpisodeBatch& episode);
EpisodeBatch with_features(const EpisodeBatch& episode, std::span<const double> flat);
std::vector<double> flatten_feature_gradient(const EpisodeGradient& grad);

struct EpisodeShape {
  std::size_t gallery = 4;
  std::size_t mated = 4;
  std::size_t nonmated = 3;
  std::size_t dim = 8;
  Metric metric = Metric::Euclidean;
};

/// Random episode whose probes sit near (but not on) gallery entries, so
/// that scores spread over the sigmoids' responsive range. Mated probe i is
/// paired with gallery entry i mod |G'|.
EpisodeBatch random_episode(Rng& rng, const EpisodeShape& shape);

using EpisodeLoss = std::function<LossOutput(const EpisodeBatch&)>;

/// Relative error of `loss`'s feature gradient against central differences
/// of its value.
double episode_gradient_error(const EpisodeBatch& episode, const EpisodeLoss& loss,
                              double step = 1e-5);

struct GradCheckRow {
  std::string operation;
  std::size_t episodes = 0;
  double max_rel_error = 0.0;
};

/// Runs every loss (softmax, triplet, S_det averaged, softrank, S_id, IDL,
/// RTM, total) on `episodes` random inputs and reports the worst error per
/// operation.
std::vector<GradCheckRow> run_gradient_suite(std::size_t episodes, std::uint64_t seed,
                                             const LossHyperparams& hp = {},
                                             Metric metric = Metric::Euclidean,
                                             double step = 1e-5);

}  // namespace osb
