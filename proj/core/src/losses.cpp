#include "osb/losses.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "osb/error.hpp"
#include "osb/similarity.hpp"

namespace osb {
namespace {

/// dL/dscores for one episode, before the feature chain rule.
struct ScoreGrad {
  Matrix mated;
  Matrix nonmated;

  explicit ScoreGrad(const EpisodeScores& s)
      : mated(s.mated.rows(), s.mated.cols()), nonmated(s.nonmated.rows(), s.nonmated.cols()) {}
};

void require_probe(const EpisodeBatch& ep, std::size_t probe) {
  if (probe >= ep.mated_probes.size()) {
    throw UsageError("probe index " + std::to_string(probe) + " is not a mated probe");
  }
}

void require_nonmated(const EpisodeBatch& ep) {
  if (ep.nonmated_probes.empty()) throw UsageError("episode has no non-mated probes");
}

void require_gallery(const EpisodeBatch& ep) {
  if (ep.gallery.empty()) throw UsageError("episode has an empty gallery");
}

// Each *_into routine adds scale * d(component)/d(scores) into `g` and
// returns the component's value.

double det_into(const EpisodeScores& s, const EpisodeBatch& ep, std::size_t i, double alpha,
                bool detach, double scale, ScoreGrad& g) {
  const std::size_t gi = ep.mated_probes[i].gallery_index;
  const double genuine = s.mated(i, gi);
  const std::size_t u = s.nonmated.rows();
  const double inv = 1.0 / static_cast<double>(u);
  double value = 0.0;
  double d_genuine = 0.0;
  for (std::size_t k = 0; k < u; ++k) {
    const auto sg = sigmoid(genuine - s.nonmated(k, gi), alpha);
    value += sg.value * inv;
    d_genuine += sg.slope * inv;
    if (!detach) g.nonmated(k, gi) -= scale * sg.slope * inv;
  }
  g.mated(i, gi) += scale * d_genuine;
  return value;
}

double softrank_into(const EpisodeScores& s, const EpisodeBatch& ep, std::size_t i, double gamma,
                     bool include_self, double scale, ScoreGrad& g) {
  const std::size_t gi = ep.mated_probes[i].gallery_index;
  const double genuine = s.mated(i, gi);
  double value = include_self ? 0.5 : 0.0;
  double d_genuine = 0.0;
  for (std::size_t j = 0; j < s.mated.cols(); ++j) {
    if (j == gi) continue;  // self term: sigma(0), zero net derivative
    const auto sg = sigmoid(s.mated(i, j) - genuine, gamma);
    value += sg.value;
    g.mated(i, j) += scale * sg.slope;
    d_genuine -= sg.slope;
  }
  g.mated(i, gi) += scale * d_genuine;
  return value;
}

double sid_into(const EpisodeScores& s, const EpisodeBatch& ep, std::size_t i, double beta,
                double gamma, bool include_self, double scale, ScoreGrad& g) {
  // softrank's gradient is only needed scaled by d S_id / d softrank, so
  // evaluate softrank first into a scratch gradient.
  ScoreGrad scratch(s);
  const double rank = softrank_into(s, ep, i, gamma, include_self, 1.0, scratch);
  const auto sg = sigmoid(1.0 - rank, beta);
  const double factor = -sg.slope * scale;
  for (std::size_t j = 0; j < s.mated.cols(); ++j) g.mated(i, j) += factor * scratch.mated(i, j);
  return sg.value;
}

double idl_into(const EpisodeScores& s, const EpisodeBatch& ep, const LossHyperparams& hp,
                double scale, ScoreGrad& g) {
  const std::size_t n = ep.mated_probes.size();
  const double inv = 1.0 / static_cast<double>(n);
  double value = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    ScoreGrad d_det(s);
    ScoreGrad d_id(s);
    const double det = det_into(s, ep, i, hp.alpha, hp.detach_threshold, 1.0, d_det);
    const double id =
        sid_into(s, ep, i, hp.beta, hp.gamma, hp.softrank_include_self, 1.0, d_id);
    value -= inv * det * id;
    const double c_det = -scale * inv * id;
    const double c_id = -scale * inv * det;
    const std::size_t gi = ep.mated_probes[i].gallery_index;
    for (std::size_t j = 0; j < s.mated.cols(); ++j) {
      g.mated(i, j) += c_det * d_det.mated(i, j) + c_id * d_id.mated(i, j);
    }
    for (std::size_t k = 0; k < s.nonmated.rows(); ++k) {
      g.nonmated(k, gi) += c_det * d_det.nonmated(k, gi);
    }
  }
  return value;
}

double rtm_into(const EpisodeScores& s, RtmPooling pooling, double scale, ScoreGrad& g) {
  if (pooling == RtmPooling::Joint) {
    const auto all = s.nonmated.data();
    const double value = rtm_weighted_average(all);
    const auto grad = rtm_weighted_average_grad(all);
    auto out = g.nonmated.data();
    for (std::size_t k = 0; k < grad.size(); ++k) out[k] += scale * grad[k];
    return value;
  }
  const std::size_t u = s.nonmated.rows();
  const double inv = 1.0 / static_cast<double>(u);
  double value = 0.0;
  for (std::size_t k = 0; k < u; ++k) {
    const auto row = s.nonmated.row(k);
    value += inv * rtm_weighted_average(row);
    const auto grad = rtm_weighted_average_grad(row);
    for (std::size_t j = 0; j < grad.size(); ++j) g.nonmated(k, j) += scale * inv * grad[j];
  }
  return value;
}

/// Chain rule from score gradients to feature gradients.
LossOutput finish(const EpisodeBatch& ep, double value, ScoreGrad&& sg) {
  const std::size_t d = ep.dim();
  LossOutput out;
  out.value = value;
  out.grad.gallery.assign(ep.gallery.size(), Feature(d, 0.0));
  out.grad.mated.assign(ep.mated_probes.size(), Feature(d, 0.0));
  out.grad.nonmated.assign(ep.nonmated_probes.size(), Feature(d, 0.0));

  auto propagate = [&](const Matrix& dscores, const std::vector<ProbeEntry>& probes,
                       std::vector<Feature>& dprobe) {
    for (std::size_t i = 0; i < probes.size(); ++i) {
      for (std::size_t j = 0; j < ep.gallery.size(); ++j) {
        const double w = dscores(i, j);
        if (w == 0.0) continue;
        const auto sim = similarity_grad(probes[i].feature, ep.gallery[j].feature, ep.metric);
        for (std::size_t k = 0; k < d; ++k) {
          dprobe[i][k] += w * sim.d_a[k];
          out.grad.gallery[j][k] += w * sim.d_b[k];
        }
      }
    }
  };
  propagate(sg.mated, ep.mated_probes, out.grad.mated);
  propagate(sg.nonmated, ep.nonmated_probes, out.grad.nonmated);
  out.grad.mated_scores = std::move(sg.mated);
  out.grad.nonmated_scores = std::move(sg.nonmated);
  return out;
}

}  // namespace

Sigmoid sigmoid(double x, double temperature) noexcept {
  const double t = temperature * x;
  // p = sigma(t), q = 1 - sigma(t), both formed from exp(-|t|) <= 1.
  const double e = std::exp(-std::abs(t));
  const double p = t >= 0.0 ? 1.0 / (1.0 + e) : e / (1.0 + e);
  const double q = t >= 0.0 ? e / (1.0 + e) : 1.0 / (1.0 + e);
  return {p, temperature * p * q};
}

EpisodeScores episode_scores(const EpisodeBatch& ep) {
  EpisodeScores s{Matrix(ep.mated_probes.size(), ep.gallery.size()),
                  Matrix(ep.nonmated_probes.size(), ep.gallery.size())};
  for (std::size_t i = 0; i < ep.mated_probes.size(); ++i) {
    for (std::size_t j = 0; j < ep.gallery.size(); ++j) {
      s.mated(i, j) = similarity(ep.mated_probes[i].feature, ep.gallery[j].feature, ep.metric);
    }
  }
  for (std::size_t i = 0; i < ep.nonmated_probes.size(); ++i) {
    for (std::size_t j = 0; j < ep.gallery.size(); ++j) {
      s.nonmated(i, j) = similarity(ep.nonmated_probes[i].feature, ep.gallery[j].feature, ep.metric);
    }
  }
  return s;
}

DetectionScore s_det(double genuine_score, double tau, double alpha) noexcept {
  const auto sg = sigmoid(genuine_score - tau, alpha);
  return {sg.value, sg.slope};
}

LossOutput s_det_averaged(const EpisodeBatch& ep, std::size_t probe, double alpha,
                          bool detach_threshold) {
  require_probe(ep, probe);
  require_nonmated(ep);
  const auto s = episode_scores(ep);
  ScoreGrad g(s);
  const double v = det_into(s, ep, probe, alpha, detach_threshold, 1.0, g);
  return finish(ep, v, std::move(g));
}

LossOutput softrank(const EpisodeBatch& ep, std::size_t probe, double gamma, bool include_self) {
  require_probe(ep, probe);
  require_gallery(ep);
  const auto s = episode_scores(ep);
  ScoreGrad g(s);
  const double v = softrank_into(s, ep, probe, gamma, include_self, 1.0, g);
  return finish(ep, v, std::move(g));
}

LossOutput s_id(const EpisodeBatch& ep, std::size_t probe, double beta, double gamma,
                bool include_self) {
  require_probe(ep, probe);
  require_gallery(ep);
  const auto s = episode_scores(ep);
  ScoreGrad g(s);
  const double v = sid_into(s, ep, probe, beta, gamma, include_self, 1.0, g);
  return finish(ep, v, std::move(g));
}

LossOutput idl_loss(const EpisodeBatch& ep, const LossHyperparams& hp) {
  hp.validate();
  if (ep.mated_probes.empty()) throw UsageError("episode has no mated probes");
  require_nonmated(ep);
  const auto s = episode_scores(ep);
  ScoreGrad g(s);
  const double v = idl_into(s, ep, hp, 1.0, g);
  return finish(ep, v, std::move(g));
}

LossOutput rtm_loss(const EpisodeBatch& ep, RtmPooling pooling) {
  require_nonmated(ep);
  require_gallery(ep);
  const auto s = episode_scores(ep);
  ScoreGrad g(s);
  const double v = rtm_into(s, pooling, 1.0, g);
  return finish(ep, v, std::move(g));
}

LossOutput total_loss(const EpisodeBatch& ep, const LossHyperparams& hp) {
  hp.validate();
  if (ep.mated_probes.empty()) throw UsageError("episode has no mated probes");
  require_nonmated(ep);
  const auto s = episode_scores(ep);
  ScoreGrad g(s);
  double v = idl_into(s, ep, hp, 1.0, g);
  if (hp.lambda != 0.0) v += hp.lambda * rtm_into(s, hp.rtm_pooling, hp.lambda, g);
  return finish(ep, v, std::move(g));
}

double rtm_weighted_average(std::span<const double> scores) {
  if (scores.empty()) throw UsageError("weighted average of an empty score list");
  const double top = *std::max_element(scores.begin(), scores.end());
  double num = 0.0;
  double den = 0.0;
  for (double v : scores) {
    const double w = std::exp(v - top);
    num += w * v;
    den += w;
  }
  return num / den;
}

std::vector<double> rtm_weighted_average_grad(std::span<const double> scores) {
  if (scores.empty()) throw UsageError("weighted average of an empty score list");
  const double top = *std::max_element(scores.begin(), scores.end());
  std::vector<double> w(scores.size());
  double den = 0.0;
  for (std::size_t k = 0; k < scores.size(); ++k) {
    w[k] = std::exp(scores[k] - top);
    den += w[k];
  }
  double avg = 0.0;
  for (std::size_t k = 0; k < scores.size(); ++k) {
    w[k] /= den;
    avg += w[k] * scores[k];
  }
  for (std::size_t k = 0; k < scores.size(); ++k) w[k] *= 1.0 + scores[k] - avg;
  return w;
}

SoftmaxLossOutput softmax_loss(const Matrix& logits, std::span<const std::size_t> labels) {
  const std::size_t n = logits.rows();
  const std::size_t c = logits.cols();
  if (labels.size() != n) throw UsageError("one label per logit row is required");
  if (n == 0 || c == 0) throw UsageError("softmax loss needs a non-empty logit matrix");
  SoftmaxLossOutput out{0.0, Matrix(n, c)};
  const double inv = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] >= c) {
      throw UsageError("label " + std::to_string(labels[i]) + " out of range for " +
                       std::to_string(c) + " classes");
    }
    const auto z = logits.row(i);
    const double top = *std::max_element(z.begin(), z.end());
    double den = 0.0;
    for (double v : z) den += std::exp(v - top);
    const double log_den = std::log(den) + top;
    out.value += inv * (log_den - z[labels[i]]);
    for (std::size_t j = 0; j < c; ++j) {
      const double p = std::exp(z[j] - log_den);
      out.grad_logits(i, j) = inv * (p - (j == labels[i] ? 1.0 : 0.0));
    }
  }
  return out;
}

TripletOutput triplet_loss(std::span<const double> anchor, std::span<const double> positive,
                           std::span<const double> negative, double margin) {
  if (anchor.size() != positive.size() || anchor.size() != negative.size()) {
    throw UsageError("triplet features must share one dimension");
  }
  if (!(margin >= 0.0)) throw UsageError("triplet margin must be non-negative");
  const std::size_t d = anchor.size();
  TripletOutput out;
  out.d_anchor.assign(d, 0.0);
  out.d_positive.assign(d, 0.0);
  out.d_negative.assign(d, 0.0);
  double ap = 0.0;
  double an = 0.0;
  for (std::size_t k = 0; k < d; ++k) {
    ap += (anchor[k] - positive[k]) * (anchor[k] - positive[k]);
    an += (anchor[k] - negative[k]) * (anchor[k] - negative[k]);
  }
  out.dist_ap = std::sqrt(ap);
  out.dist_an = std::sqrt(an);
  if (!(out.dist_ap + margin > out.dist_an)) return out;

  out.value = out.dist_ap - out.dist_an + margin;
  out.d_dist_ap = 1.0;
  out.d_dist_an = -1.0;
  // d dist(x, y) / dx = (x - y) / dist, taken as zero when dist == 0.
  for (std::size_t k = 0; k < d; ++k) {
    const double up = out.dist_ap > 0.0 ? (anchor[k] - positive[k]) / out.dist_ap : 0.0;
    const double un = out.dist_an > 0.0 ? (anchor[k] - negative[k]) / out.dist_an : 0.0;
    out.d_anchor[k] = up - un;
    out.d_positive[k] = -up;
    out.d_negative[k] = un;
  }
  return out;
}

BatchTripletOutput batch_all_triplet_loss(std::span<const Feature> features,
                                          std::span<const std::size_t> labels, double margin) {
  if (features.size() != labels.size()) throw UsageError("one label per feature is required");
  const std::size_t n = features.size();
  const std::size_t d = n == 0 ? 0 : features.front().size();
  BatchTripletOutput out;
  out.grad.assign(n, Feature(d, 0.0));

  Matrix dist(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < d; ++k) {
        const double t = features[i][k] - features[j][k];
        s += t * t;
      }
      dist(i, j) = dist(j, i) = std::sqrt(s);
    }
  }
  // Accumulate dL/d dist(i, j) first, then apply the distance chain rule once.
  Matrix d_dist(n, n);
  double sum = 0.0;
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t p = 0; p < n; ++p) {
      if (p == a || labels[p] != labels[a]) continue;
      for (std::size_t m = 0; m < n; ++m) {
        if (labels[m] == labels[a]) continue;
        ++out.total;
        const double v = dist(a, p) - dist(a, m) + margin;
        if (v <= 0.0) continue;
        ++out.active;
        sum += v;
        d_dist(a, p) += 1.0;
        d_dist(a, m) -= 1.0;
      }
    }
  }
  if (out.active == 0) return out;
  const double inv = 1.0 / static_cast<double>(out.active);
  out.value = sum * inv;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double w = d_dist(i, j) * inv;
      if (w == 0.0 || dist(i, j) == 0.0) continue;
      for (std::size_t k = 0; k < d; ++k) {
        const double u = (features[i][k] - features[j][k]) / dist(i, j);
        out.grad[i][k] += w * u;
        out.grad[j][k] -= w * u;
      }
    }
  }
  return out;
}

}  // namespace osb
