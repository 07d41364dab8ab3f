#include "osb/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "osb/error.hpp"

namespace osb {

std::vector<double> central_difference(const std::function<double(std::span<const double>)>& f,
                                       std::span<const double> x, double step) {
  std::vector<double> point(x.begin(), x.end());
  std::vector<double> out(point.size());
  for (std::size_t k = 0; k < point.size(); ++k) {
    const double orig = point[k];
    point[k] = orig + step;
    const double up = f(point);
    point[k] = orig - step;
    const double down = f(point);
    point[k] = orig;
    out[k] = (up - down) / (2.0 * step);
  }
  return out;
}

double max_relative_error(std::span<const double> analytic, std::span<const double> numeric) {
  if (analytic.size() != numeric.size()) throw UsageError("gradient sizes differ");
  double scale = 0.0;
  double worst = 0.0;
  for (std::size_t k = 0; k < analytic.size(); ++k) {
    scale = std::max({scale, std::abs(analytic[k]), std::abs(numeric[k])});
    worst = std::max(worst, std::abs(analytic[k] - numeric[k]));
  }
  if (!std::isfinite(worst)) return INFINITY;
  return scale == 0.0 ? 0.0 : worst / scale;
}

std::vector<double> flatten_features(const EpisodeBatch& ep) {
  std::vector<double> flat;
  for (const auto& g : ep.gallery) flat.insert(flat.end(), g.feature.begin(), g.feature.end());
  for (const auto& p : ep.mated_probes) flat.insert(flat.end(), p.feature.begin(), p.feature.end());
  for (const auto& p : ep.nonmated_probes) {
    flat.insert(flat.end(), p.feature.begin(), p.feature.end());
  }
  return flat;
}

EpisodeBatch with_features(const EpisodeBatch& ep, std::span<const double> flat) {
  EpisodeBatch out = ep;
  std::size_t pos = 0;
  auto take = [&](Feature& f) {
    std::copy(flat.begin() + static_cast<std::ptrdiff_t>(pos),
              flat.begin() + static_cast<std::ptrdiff_t>(pos + f.size()), f.begin());
    pos += f.size();
  };
  for (auto& g : out.gallery) take(g.feature);
  for (auto& p : out.mated_probes) take(p.feature);
  for (auto& p : out.nonmated_probes) take(p.feature);
  if (pos != flat.size()) throw UsageError("flat feature vector does not match episode layout");
  return out;
}

std::vector<double> flatten_feature_gradient(const EpisodeGradient& grad) {
  std::vector<double> flat;
  for (const auto* part : {&grad.gallery, &grad.mated, &grad.nonmated}) {
    for (const auto& f : *part) flat.insert(flat.end(), f.begin(), f.end());
  }
  return flat;
}

EpisodeBatch random_episode(Rng& rng, const EpisodeShape& shape) {
  EpisodeBatch ep;
  ep.metric = shape.metric;
  auto vec = [&](double sigma) {
    Feature f(shape.dim);
    for (double& v : f) v = sigma * rng.normal();
    return f;
  };
  auto near = [&](const Feature& base, double sigma) {
    Feature f = base;
    for (double& v : f) v += sigma * rng.normal();
    return f;
  };
  const double spread = shape.metric == Metric::Euclidean ? 0.35 : 1.0;
  for (std::size_t j = 0; j < shape.gallery; ++j) {
    ep.gallery.push_back({"g" + std::to_string(j), vec(spread), {}});
  }
  for (std::size_t i = 0; i < shape.mated; ++i) {
    const std::size_t gi = i % std::max<std::size_t>(shape.gallery, 1);
    ep.mated_probes.push_back(
        {ep.gallery[gi].subject_id, near(ep.gallery[gi].feature, 0.6 * spread), kNoIndex, gi});
  }
  for (std::size_t k = 0; k < shape.nonmated; ++k) {
    const std::size_t anchor = rng.uniform_index(std::max<std::size_t>(shape.gallery, 1));
    ep.nonmated_probes.push_back(
        {"u" + std::to_string(k), near(ep.gallery[anchor].feature, 0.8 * spread), kNoIndex, kNoIndex});
  }
  return ep;
}

double episode_gradient_error(const EpisodeBatch& episode, const EpisodeLoss& loss, double step) {
  const auto analytic = flatten_feature_gradient(loss(episode).grad);
  const auto x = flatten_features(episode);
  const auto numeric = central_difference(
      [&](std::span<const double> p) { return loss(with_features(episode, p)).value; }, x, step);
  return max_relative_error(analytic, numeric);
}

std::vector<GradCheckRow> run_gradient_suite(std::size_t episodes, std::uint64_t seed,
                                             const LossHyperparams& hp, Metric metric,
                                             double step) {
  hp.validate();
  std::vector<GradCheckRow> rows;
  auto record = [&](const std::string& name, double err) {
    auto it = std::find_if(rows.begin(), rows.end(), [&](const auto& r) { return r.operation == name; });
    if (it == rows.end()) {
      rows.push_back({name, 0, 0.0});
      it = rows.end() - 1;
    }
    ++it->episodes;
    it->max_rel_error = std::max(it->max_rel_error, std::isnan(err) ? INFINITY : err);
  };

  for (std::size_t e = 0; e < episodes; ++e) {
    Rng rng(derive_seed(seed, e));

    {
      Matrix logits(4, 5);
      std::vector<std::size_t> labels(4);
      for (double& v : logits.data()) v = 2.0 * rng.normal();
      for (auto& l : labels) l = rng.uniform_index(5);
      const auto analytic = softmax_loss(logits, labels).grad_logits;
      const auto numeric = central_difference(
          [&](std::span<const double> z) {
            Matrix m(4, 5);
            std::copy(z.begin(), z.end(), m.data().begin());
            return softmax_loss(m, labels).value;
          },
          logits.data(), step);
      record("softmax", max_relative_error(analytic.data(), numeric));
    }

    {
      // Active by construction: the negative sits closer than the positive.
      const std::size_t d = 16;
      Feature a(d);
      Feature p(d);
      Feature n(d);
      for (std::size_t k = 0; k < d; ++k) {
        a[k] = rng.normal();
        p[k] = a[k] + 0.5 * rng.normal();
        n[k] = a[k] + 0.3 * rng.normal();
      }
      const double margin = 0.3;
      std::vector<double> x(3 * d);
      std::copy(a.begin(), a.end(), x.begin());
      std::copy(p.begin(), p.end(), x.begin() + d);
      std::copy(n.begin(), n.end(), x.begin() + 2 * d);
      auto value = [&](std::span<const double> v) {
        return triplet_loss(v.subspan(0, d), v.subspan(d, d), v.subspan(2 * d, d), margin).value;
      };
      const auto t = triplet_loss(a, p, n, margin);
      std::vector<double> analytic(3 * d);
      std::copy(t.d_anchor.begin(), t.d_anchor.end(), analytic.begin());
      std::copy(t.d_positive.begin(), t.d_positive.end(), analytic.begin() + d);
      std::copy(t.d_negative.begin(), t.d_negative.end(), analytic.begin() + 2 * d);
      record("triplet", max_relative_error(analytic, central_difference(value, x, step)));
    }

    EpisodeShape shape;
    shape.metric = metric;
    const auto ep = random_episode(rng, shape);
    const std::size_t probe = rng.uniform_index(ep.mated_probes.size());
    record("s_det_averaged", episode_gradient_error(ep, [&](const EpisodeBatch& b) {
             return s_det_averaged(b, probe, hp.alpha, hp.detach_threshold);
           }, step));
    record("softrank", episode_gradient_error(ep, [&](const EpisodeBatch& b) {
             return softrank(b, probe, hp.gamma, hp.softrank_include_self);
           }, step));
    record("s_id", episode_gradient_error(ep, [&](const EpisodeBatch& b) {
             return s_id(b, probe, hp.beta, hp.gamma, hp.softrank_include_self);
           }, step));
    record("idl", episode_gradient_error(ep, [&](const EpisodeBatch& b) { return idl_loss(b, hp); },
                                         step));
    record("rtm", episode_gradient_error(ep, [&](const EpisodeBatch& b) {
             return rtm_loss(b, hp.rtm_pooling);
           }, step));
    record("total", episode_gradient_error(ep, [&](const EpisodeBatch& b) { return total_loss(b, hp); },
                                           step));
  }
  return rows;
}

}  // namespace osb
