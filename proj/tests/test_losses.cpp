#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <vector>

#include "episodes.hpp"
#include "osb/error.hpp"
#include "osb/gradcheck.hpp"
#include "osb/losses.hpp"
#include "osb/rng.hpp"

namespace {

using osb_fix::line_episode;

constexpr double kFdTolerance = 1e-6;

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// --- softmax -----------------------------------------------------------------

TEST(SoftmaxLoss, UniformLogitsGiveLogC) {
  const std::size_t n = 3, c = 5;
  const osb::Matrix logits(n, c, 0.7);
  const std::vector<std::size_t> labels{0, 2, 4};
  const auto out = osb::softmax_loss(logits, labels);
  EXPECT_NEAR(out.value, std::log(5.0), 1e-15);
  for (std::size_t i = 0; i < n; ++i) {
    EXPECT_NEAR(out.grad_logits(i, labels[i]), (1.0 / c - 1.0) / n, 1e-15);
  }
}

TEST(SoftmaxLoss, ConfidentTrueClassApproachesZero) {
  osb::Matrix logits(1, 3, 0.0);
  logits(0, 1) = 60.0;
  const std::vector<std::size_t> labels{1};
  EXPECT_LT(osb::softmax_loss(logits, labels).value, 1e-20);
}

TEST(SoftmaxLoss, GradientMatchesFiniteDifferencesAndRowsSumToZero) {
  osb::Rng rng(1);
  for (int rep = 0; rep < 20; ++rep) {
    osb::Matrix logits(4, 5);
    for (auto& v : logits.data()) v = 2.0 * rng.normal();
    std::vector<std::size_t> labels(4);
    for (auto& l : labels) l = rng.uniform_index(5);
    const auto out = osb::softmax_loss(logits, labels);
    double worst = 0.0, scale = 0.0;
    for (std::size_t k = 0; k < logits.data().size(); ++k) {
      auto up = logits, down = logits;
      up.data()[k] += 1e-5;
      down.data()[k] -= 1e-5;
      const double num = (osb::softmax_loss(up, labels).value - osb::softmax_loss(down, labels).value) / 2e-5;
      worst = std::max(worst, std::fabs(num - out.grad_logits.data()[k]));
      scale = std::max(scale, std::fabs(num));
    }
    EXPECT_LT(worst / scale, kFdTolerance);
    for (std::size_t i = 0; i < 4; ++i) {
      const auto row = out.grad_logits.row(i);
      EXPECT_NEAR(std::accumulate(row.begin(), row.end(), 0.0), 0.0, 1e-15);
    }
  }
  const std::vector<std::size_t> bad{7};
  EXPECT_THROW((void)osb::softmax_loss(osb::Matrix(1, 3), bad), osb::UsageError);
}

// --- triplet -----------------------------------------------------------------

TEST(TripletLoss, InactiveTripletIsZero) {
  const std::vector<double> a{0.0}, p{0.2}, n{-1.0};
  const auto out = osb::triplet_loss(a, p, n, 0.3);
  EXPECT_EQ(out.value, 0.0);
  EXPECT_EQ(out.d_dist_ap, 0.0);
  EXPECT_EQ(out.d_dist_an, 0.0);
  EXPECT_EQ(out.d_anchor, (osb::Feature{0.0}));
}

TEST(TripletLoss, ActivePiecewiseUnitGradients) {
  const std::vector<double> a{0.0}, p{0.5}, n{-0.4};
  const auto out = osb::triplet_loss(a, p, n, 0.3);
  EXPECT_NEAR(out.value, 0.4, 1e-15);
  EXPECT_EQ(out.d_dist_ap, 1.0);
  EXPECT_EQ(out.d_dist_an, -1.0);
}

TEST(TripletLoss, RandomActiveTripletMatchesFiniteDifferences) {
  osb::Rng rng(3);
  int checked = 0;
  while (checked < 100) {
    std::vector<double> a(16), p(16), n(16);
    for (auto& v : a) v = rng.normal();
    for (auto& v : p) v = rng.normal();
    for (auto& v : n) v = rng.normal();
    const double margin = 0.5;
    const auto out = osb::triplet_loss(a, p, n, margin);
    if (out.value <= 1e-3) continue;
    std::vector<double*> slots;
    std::vector<double> analytic;
    for (int k = 0; k < 16; ++k) { slots.push_back(&a[k]); analytic.push_back(out.d_anchor[k]); }
    for (int k = 0; k < 16; ++k) { slots.push_back(&p[k]); analytic.push_back(out.d_positive[k]); }
    for (int k = 0; k < 16; ++k) { slots.push_back(&n[k]); analytic.push_back(out.d_negative[k]); }
    double worst = 0.0, scale = 0.0;
    for (std::size_t k = 0; k < slots.size(); ++k) {
      const double x0 = *slots[k];
      *slots[k] = x0 + 1e-5;
      const double up = osb::triplet_loss(a, p, n, margin).value;
      *slots[k] = x0 - 1e-5;
      const double down = osb::triplet_loss(a, p, n, margin).value;
      *slots[k] = x0;
      const double num = (up - down) / 2e-5;
      worst = std::max(worst, std::fabs(num - analytic[k]));
      scale = std::max(scale, std::fabs(num));
    }
    EXPECT_LT(worst / scale, kFdTolerance);
    ++checked;
  }
}

TEST(BatchTripletLoss, CountsAndAveragesActiveTriplets) {
  const std::vector<osb::Feature> f{{0.0}, {0.1}, {1.0}, {0.3}};
  const std::vector<std::size_t> labels{0, 0, 1, 1};
  const auto out = osb::batch_all_triplet_loss(f, labels, 0.2);
  EXPECT_EQ(out.total, 8u);
  // Recompute by hand over all (a, p, n).
  double sum = 0.0;
  std::size_t active = 0;
  for (std::size_t a = 0; a < 4; ++a)
    for (std::size_t p = 0; p < 4; ++p)
      for (std::size_t n = 0; n < 4; ++n) {
        if (a == p || labels[a] != labels[p] || labels[n] == labels[a]) continue;
        const double v = std::fabs(f[a][0] - f[p][0]) - std::fabs(f[a][0] - f[n][0]) + 0.2;
        if (v > 0) { sum += v; ++active; }
      }
  EXPECT_EQ(out.active, active);
  EXPECT_NEAR(out.value, sum / active, 1e-15);
}

// --- detection score ---------------------------------------------------------

TEST(SDet, AtThresholdIsHalf) {
  const auto d = osb::s_det(0.4, 0.4, 6.0);
  EXPECT_EQ(d.value, 0.5);
  EXPECT_DOUBLE_EQ(d.d_score, 6.0 / 4.0);
}

TEST(SDet, TenOverAlphaAbove) {
  const double alpha = 6.0;
  EXPECT_NEAR(osb::s_det(0.3 + 10.0 / alpha, 0.3, alpha).value, 0.9999546, 1e-7);
  EXPECT_NEAR(osb::s_det(0.3 + 10.0 / alpha, 0.3, alpha).value, logistic(10.0), 1e-15);
}

TEST(SDet, DerivativePeaksAtThreshold) {
  double prev = 0.0;
  for (double s = -1.0; s <= 0.0; s += 0.1) {
    const double d = osb::s_det(s, 0.0, 6.0).d_score;
    EXPECT_GT(d, prev);
    prev = d;
  }
}

TEST(SDetAveraged, EqualNonMatedScoreGivesHalf) {
  // Probe and non-mated probe at the same distance from the gallery entry.
  const auto ep = line_episode({0.0}, {{1.0, 0}}, {-1.0});
  EXPECT_EQ(osb::s_det_averaged(ep, 0, 6.0).value, 0.5);
}

TEST(SDetAveraged, SaturatesWhenGenuineDominates) {
  const auto ep = line_episode({0.0}, {{0.0, 0}}, {1e4, -2e4});
  EXPECT_GE(osb::s_det_averaged(ep, 0, 60.0).value, 1.0 - 1e-12);
  EXPECT_GT(osb::s_det_averaged(ep, 0, 6.0).value, 0.997);
}

TEST(SDetAveraged, RandomEpisodesMatchFiniteDifferences) {
  osb::Rng rng(11);
  for (int rep = 0; rep < 100; ++rep) {
    const auto ep = osb::random_episode(rng, {});
    for (std::size_t i = 0; i < ep.mated_probes.size(); ++i) {
      ASSERT_LT(osb_fix::fd_error(ep, [i](const osb::EpisodeBatch& e) { return osb::s_det_averaged(e, i, 6.0); }),
                kFdTolerance);
    }
  }
}

TEST(SDetAveraged, DetachedThresholdDropsNonMatedGradient) {
  osb::Rng rng(12);
  const auto ep = osb::random_episode(rng, {});
  const auto out = osb::s_det_averaged(ep, 0, 6.0, true);
  for (const auto& f : out.grad.nonmated) {
    for (double v : f) EXPECT_EQ(v, 0.0);
  }
}

// --- softrank / identification -----------------------------------------------

TEST(Softrank, SelfOnlyIsHalf) {
  const auto ep = line_episode({0.0}, {{0.3, 0}}, {2.0});
  EXPECT_EQ(osb::softrank(ep, 0, 6.0).value, 0.5);
}

TEST(Softrank, DominantMateApproachesHalf) {
  const auto ep = line_episode({0.0, 50.0, 60.0, -50.0, -70.0, 90.0}, {{0.0, 0}}, {200.0});
  EXPECT_NEAR(osb::softrank(ep, 0, 60.0).value, 0.5, 1e-20);
  EXPECT_NEAR(osb::softrank(ep, 0, 6.0).value, 0.5, 0.02);
}

TEST(Softrank, EqualScoresCountHalfEach) {
  // Probe at the origin, four gallery entries at distance 1.
  osb::EpisodeBatch ep;
  ep.gallery = {{"a", {1.0, 0.0}, {}}, {"b", {-1.0, 0.0}, {}}, {"c", {0.0, 1.0}, {}}, {"d", {0.0, -1.0}, {}}};
  ep.mated_probes = {{"a", {0.0, 0.0}, osb::kNoIndex, 0}};
  ep.nonmated_probes = {{"z", {5.0, 5.0}, osb::kNoIndex, osb::kNoIndex}};
  EXPECT_EQ(osb::softrank(ep, 0, 6.0).value, 2.0);
  EXPECT_EQ(osb::softrank(ep, 0, 6.0, false).value, 1.5);
}

TEST(SId, SoftrankOneGivesHalf) {
  const auto ep = line_episode({0.0, 2.0}, {{1.0, 0}}, {5.0});
  ASSERT_EQ(osb::softrank(ep, 0, 6.0).value, 1.0);
  EXPECT_EQ(osb::s_id(ep, 0, 0.2, 6.0).value, 0.5);
}

TEST(SId, RankOneWithLargeMargins) {
  const auto ep = line_episode({0.0, 1e3, -1e3, 2e3}, {{0.0, 0}}, {5e3});
  EXPECT_NEAR(osb::s_id(ep, 0, 0.2, 60.0).value, 0.52498, 1e-5);
  EXPECT_NEAR(osb::s_id(ep, 0, 0.2, 60.0).value, logistic(0.1), 1e-15);
}

TEST(SoftrankAndSId, RandomEpisodesMatchFiniteDifferences) {
  osb::Rng rng(13);
  for (int rep = 0; rep < 100; ++rep) {
    const auto ep = osb::random_episode(rng, {});
    for (std::size_t i = 0; i < ep.mated_probes.size(); ++i) {
      ASSERT_LT(osb_fix::fd_error(ep, [i](const osb::EpisodeBatch& e) { return osb::softrank(e, i, 6.0); }),
                kFdTolerance);
      ASSERT_LT(osb_fix::fd_error(ep, [i](const osb::EpisodeBatch& e) { return osb::s_id(e, i, 0.2, 6.0); }),
                kFdTolerance);
    }
  }
}

// --- IDL ---------------------------------------------------------------------

TEST(IdlLoss, BothFactorsNearOneGivesMinusOne) {
  osb::LossHyperparams hp;
  hp.alpha = 40.0;
  hp.beta = 40.0;
  hp.gamma = 60.0;
  hp.softrank_include_self = false;
  const auto ep = line_episode({0.0, 1e3}, {{0.0, 0}, {1e3, 1}}, {5e3, -5e3});
  EXPECT_NEAR(osb::idl_loss(ep, hp).value, -1.0, 1e-6);
}

TEST(IdlLoss, DetectionNearZeroGivesZero) {
  osb::LossHyperparams hp;
  hp.alpha = 60.0;
  // Non-mated probes sit on the gallery entries; mated probes far away.
  const auto ep = line_episode({0.0, 1.0}, {{400.0, 0}, {-400.0, 1}}, {0.0, 1.0});
  EXPECT_NEAR(osb::idl_loss(ep, hp).value, 0.0, 1e-10);
}

TEST(IdlLoss, ValueStrictlyInsideOpenInterval) {
  osb::Rng rng(14);
  for (int rep = 0; rep < 200; ++rep) {
    const auto ep = osb::random_episode(rng, {});
    const double v = osb::idl_loss(ep, {}).value;
    ASSERT_GT(v, -1.0);
    ASSERT_LT(v, 0.0);
  }
}

TEST(IdlLoss, RandomEpisodesMatchFiniteDifferences) {
  osb::Rng rng(15);
  for (int rep = 0; rep < 100; ++rep) {
    osb::EpisodeShape shape;
    shape.metric = rep % 2 ? osb::Metric::Cosine : osb::Metric::Euclidean;
    const auto ep = osb::random_episode(rng, shape);
    ASSERT_LT(osb_fix::fd_error(ep, [](const osb::EpisodeBatch& e) { return osb::idl_loss(e, {}); }), kFdTolerance);
  }
}

TEST(IdlLoss, GenuineScoreGradientNonPositive) {
  osb::Rng rng(16);
  for (int rep = 0; rep < 300; ++rep) {
    const auto ep = osb::random_episode(rng, {});
    const auto out = osb::idl_loss(ep, {});
    for (std::size_t i = 0; i < ep.mated_probes.size(); ++i) {
      ASSERT_LE(out.grad.mated_scores(i, ep.mated_probes[i].gallery_index), 0.0);
    }
  }
}

// --- RTM ---------------------------------------------------------------------

TEST(RtmWeightedAverage, ConstantScores) {
  const std::vector<double> s(5, 0.37);
  EXPECT_DOUBLE_EQ(osb::rtm_weighted_average(s), 0.37);
}

TEST(RtmWeightedAverage, ZeroAndTen) {
  const std::vector<double> s{0.0, 10.0};
  EXPECT_NEAR(osb::rtm_weighted_average(s), 9.99955, 1e-5);
  EXPECT_NEAR(osb::rtm_weighted_average(s), 10.0 * std::exp(10.0) / (1.0 + std::exp(10.0)), 1e-12);
}

TEST(RtmWeightedAverage, BetweenMeanAndMax) {
  osb::Rng rng(17);
  for (int rep = 0; rep < 1000; ++rep) {
    std::vector<double> s(1 + rng.uniform_index(10));
    for (auto& v : s) v = 3.0 * rng.normal();
    const double l = osb::rtm_weighted_average(s);
    const double mean = std::accumulate(s.begin(), s.end(), 0.0) / static_cast<double>(s.size());
    ASSERT_GE(l, mean - 1e-12);
    ASSERT_LE(l, *std::max_element(s.begin(), s.end()) + 1e-12);
  }
}

TEST(RtmWeightedAverage, TranslationAddsConstant) {
  osb::Rng rng(18);
  for (int rep = 0; rep < 200; ++rep) {
    std::vector<double> s(6);
    for (auto& v : s) v = rng.uniform();
    const double c = 4.0 * rng.normal();
    auto t = s;
    for (auto& v : t) v += c;
    EXPECT_NEAR(osb::rtm_weighted_average(t), osb::rtm_weighted_average(s) + c, 1e-12);
    const auto g1 = osb::rtm_weighted_average_grad(s);
    const auto g2 = osb::rtm_weighted_average_grad(t);
    for (std::size_t k = 0; k < s.size(); ++k) EXPECT_NEAR(g1[k], g2[k], 1e-12);
  }
}

TEST(RtmWeightedAverage, GradientMatchesFiniteDifferences) {
  osb::Rng rng(19);
  for (int rep = 0; rep < 100; ++rep) {
    std::vector<double> s(5);
    for (auto& v : s) v = rng.uniform();
    const auto g = osb::rtm_weighted_average_grad(s);
    for (std::size_t k = 0; k < s.size(); ++k) {
      auto up = s, down = s;
      up[k] += 1e-5;
      down[k] -= 1e-5;
      EXPECT_NEAR(g[k], (osb::rtm_weighted_average(up) - osb::rtm_weighted_average(down)) / 2e-5, 1e-9);
    }
  }
}

TEST(RtmLoss, SignAndRelativeEmphasis) {
  osb::Rng rng(20);
  for (int rep = 0; rep < 300; ++rep) {
    const auto ep = osb::random_episode(rng, {});
    for (auto pooling : {osb::RtmPooling::PerProbe, osb::RtmPooling::Joint}) {
      const auto out = osb::rtm_loss(ep, pooling);
      const auto s = osb::episode_scores(ep);
      for (std::size_t n = 0; n < s.nonmated.rows(); ++n) {
        for (std::size_t a = 0; a < s.nonmated.cols(); ++a) {
          ASSERT_GE(out.grad.nonmated_scores(n, a), 0.0);
          for (std::size_t b = 0; b < s.nonmated.cols(); ++b) {
            if (s.nonmated(n, a) > s.nonmated(n, b)) {
              ASSERT_GT(out.grad.nonmated_scores(n, a), out.grad.nonmated_scores(n, b));
            }
          }
        }
      }
    }
  }
}

TEST(RtmLoss, PerProbeValueWithinScoreRange) {
  osb::Rng rng(21);
  for (int rep = 0; rep < 200; ++rep) {
    osb::EpisodeShape shape;
    shape.nonmated = 1;
    const auto ep = osb::random_episode(rng, shape);
    const auto s = osb::episode_scores(ep);
    const auto row = s.nonmated.row(0);
    const double v = osb::rtm_loss(ep).value;
    ASSERT_GE(v, *std::min_element(row.begin(), row.end()));
    ASSERT_LE(v, *std::max_element(row.begin(), row.end()));
  }
}

TEST(RtmLoss, RandomEpisodesMatchFiniteDifferences) {
  osb::Rng rng(22);
  for (int rep = 0; rep < 100; ++rep) {
    osb::EpisodeShape shape;
    shape.metric = rep % 2 ? osb::Metric::Cosine : osb::Metric::Euclidean;
    const auto ep = osb::random_episode(rng, shape);
    for (auto pooling : {osb::RtmPooling::PerProbe, osb::RtmPooling::Joint}) {
      ASSERT_LT(osb_fix::fd_error(ep, [pooling](const osb::EpisodeBatch& e) { return osb::rtm_loss(e, pooling); }),
                kFdTolerance);
    }
  }
}

// --- total -------------------------------------------------------------------

TEST(TotalLoss, ZeroLambdaIsIdl) {
  osb::Rng rng(23);
  osb::LossHyperparams hp;
  hp.lambda = 0.0;
  const auto ep = osb::random_episode(rng, {});
  const auto t = osb::total_loss(ep, hp);
  const auto i = osb::idl_loss(ep, hp);
  EXPECT_EQ(t.value, i.value);
  EXPECT_EQ(t.grad.gallery, i.grad.gallery);
  EXPECT_EQ(t.grad.mated, i.grad.mated);
  EXPECT_EQ(t.grad.nonmated, i.grad.nonmated);
}

TEST(TotalLoss, DefaultsEqualManualCombination) {
  osb::Rng rng(24);
  const osb::LossHyperparams hp;
  ASSERT_EQ(hp.alpha, 6.0);
  ASSERT_EQ(hp.beta, 0.2);
  ASSERT_EQ(hp.gamma, 6.0);
  ASSERT_EQ(hp.lambda, 4.0);
  for (int rep = 0; rep < 50; ++rep) {
    const auto ep = osb::random_episode(rng, {});
    const auto t = osb::total_loss(ep, hp);
    const auto i = osb::idl_loss(ep, hp);
    const auto r = osb::rtm_loss(ep, hp.rtm_pooling);
    EXPECT_NEAR(t.value, i.value + 4.0 * r.value, 1e-14);
    const auto gt = osb_fix::analytic_slots(t.grad);
    const auto gi = osb_fix::analytic_slots(i.grad);
    const auto gr = osb_fix::analytic_slots(r.grad);
    for (std::size_t k = 0; k < gt.size(); ++k) EXPECT_NEAR(gt[k], gi[k] + 4.0 * gr[k], 1e-13);
  }
}

TEST(TotalLoss, RandomEpisodesMatchFiniteDifferences) {
  osb::Rng rng(25);
  for (int rep = 0; rep < 100; ++rep) {
    const auto ep = osb::random_episode(rng, {});
    ASSERT_LT(osb_fix::fd_error(ep, [](const osb::EpisodeBatch& e) { return osb::total_loss(e, {}); }), kFdTolerance);
  }
}

TEST(LossHyperparams, ValidateRejectsBadValues) {
  osb::LossHyperparams hp;
  EXPECT_NO_THROW(hp.validate());
  hp.alpha = 0.0;
  EXPECT_THROW(hp.validate(), osb::UsageError);
  hp = {};
  hp.lambda = -1.0;
  EXPECT_THROW(hp.validate(), osb::UsageError);
  hp = {};
  hp.p_mated = 1.0;
  EXPECT_THROW(hp.validate(), osb::UsageError);
}

TEST(GradientSuite, LibraryCheckerAgrees) {
  const auto rows = osb::run_gradient_suite(100, 1);
  EXPECT_EQ(rows.size(), 8u);
  for (const auto& r : rows) {
    EXPECT_EQ(r.episodes, 100u) << r.operation;
    EXPECT_LT(r.max_rel_error, kFdTolerance) << r.operation;
  }
}

}  // namespace
