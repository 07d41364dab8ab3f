#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "osb/config.hpp"
#include "osb/embedding.hpp"
#include "osb/episode.hpp"
#include "osb/matrix.hpp"

namespace osb {

/// sigma_t(x) = 1 / (1 + exp(-t x)) and its derivative in x, evaluated
/// without overflow for any finite t x.
struct Sigmoid {
  double value = 0.0;
  double slope = 0.0;
};
Sigmoid sigmoid(double x, double temperature) noexcept;

/// Scores of every episode probe against every episode gallery entry.
struct EpisodeScores {
  Matrix mated;     ///< |P'_K| x |G'|
  Matrix nonmated;  ///< |P'_U| x |G'|
};
EpisodeScores episode_scores(const EpisodeBatch& episode);

/// Gradient of a scalar loss with respect to the episode's scores and, by the
/// chain rule through the similarity function, its features.
struct EpisodeGradient {
  Matrix mated_scores;
  Matrix nonmated_scores;
  std::vector<Feature> gallery;
  std::vector<Feature> mated;
  std::vector<Feature> nonmated;
};

struct LossOutput {
  double value = 0.0;
  EpisodeGradient grad;
};

/// Detection score sigma_alpha(genuine - tau) and its derivative in the
/// genuine score.
struct DetectionScore {
  double value = 0.0;
  double d_score = 0.0;
};
DetectionScore s_det(double genuine_score, double tau, double alpha) noexcept;

/// Detection score of mated probe `probe`, averaged over the thresholds
/// tau_j = s(n_j, g_i) for every non-mated probe n_j. Unless
/// `detach_threshold`, the thresholds are differentiated too.
LossOutput s_det_averaged(const EpisodeBatch& episode, std::size_t probe, double alpha,
                          bool detach_threshold = false);

/// sum_j sigma_gamma(s(p_i, g_j) - s(p_i, g_i)) over the gallery. The self
/// term contributes 0.5 unless `include_self` is false.
LossOutput softrank(const EpisodeBatch& episode, std::size_t probe, double gamma,
                    bool include_self = true);

/// sigma_beta(1 - softrank).
LossOutput s_id(const EpisodeBatch& episode, std::size_t probe, double beta, double gamma,
                bool include_self = true);

/// Identification-detection loss: -(1/|P'_K|) sum_i S_det(i) * S_id(i).
LossOutput idl_loss(const EpisodeBatch& episode, const LossHyperparams& hp);

/// Relative threshold minimisation over the non-mated probes.
LossOutput rtm_loss(const EpisodeBatch& episode, RtmPooling pooling = RtmPooling::PerProbe);

/// idl + lambda * rtm.
LossOutput total_loss(const EpisodeBatch& episode, const LossHyperparams& hp);

/// Softmax-weighted average sum_j w_j s_j with w = softmax(s).
double rtm_weighted_average(std::span<const double> scores);
/// Its gradient: w_k (1 + s_k - L).
std::vector<double> rtm_weighted_average_grad(std::span<const double> scores);

struct SoftmaxLossOutput {
  double value = 0.0;
  Matrix grad_logits;
};

/// Mean cross-entropy of softmax(logits) against integer labels. The logits
/// gradient is (softmax - onehot) / samples. Throws UsageError on a bad label.
SoftmaxLossOutput softmax_loss(const Matrix& logits, std::span<const std::size_t> labels);

struct TripletOutput {
  double value = 0.0;
  double dist_ap = 0.0;
  double dist_an = 0.0;
  double d_dist_ap = 0.0;  ///< 1 when active, else 0
  double d_dist_an = 0.0;  ///< -1 when active, else 0
  Feature d_anchor;
  Feature d_positive;
  Feature d_negative;
};

/// max(0, d(a,p) - d(a,n) + margin) with Euclidean d. The triplet is active
/// when d(a,p) + margin > d(a,n).
TripletOutput triplet_loss(std::span<const double> anchor, std::span<const double> positive,
                           std::span<const double> negative, double margin);

struct BatchTripletOutput {
  double value = 0.0;         ///< mean over active triplets (0 if none)
  std::size_t active = 0;
  std::size_t total = 0;
  std::vector<Feature> grad;  ///< one per input feature
};

/// Batch-all triplet loss over every (anchor, positive, negative) built from
/// the labels, averaged over the active triplets.
BatchTripletOutput batch_all_triplet_loss(std::span<const Feature> features,
                                          std::span<const std::size_t> labels, double margin);

}  // namespace osb
