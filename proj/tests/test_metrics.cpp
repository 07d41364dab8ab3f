#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

#include "fixtures.hpp"
#include "osb/error.hpp"
#include "osb/metrics.hpp"
#include "osb/report.hpp"
#include "reference.hpp"

namespace {

using osb_ref::ProbeRow;

std::size_t accepted(const std::vector<double>& v, double t) {
  return static_cast<std::size_t>(std::count_if(v.begin(), v.end(), [t](double x) { return x >= t; }));
}

TEST(ThresholdAtFpir, MidpointOfOrderStatistics) {
  const std::vector<double> s{0.8, 0.7, 0.6};
  const double t = osb::threshold_at_fpir(s, 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(t, 0.75);
  EXPECT_EQ(accepted(s, t), 1u);
}

TEST(ThresholdAtFpir, KZeroAcceptsNothing) {
  const std::vector<double> s{0.5};
  const double t = osb::threshold_at_fpir(s, 0.01);
  EXPECT_GT(t, 0.5);
  EXPECT_LT(t, 0.5 + 1e-8);
  EXPECT_EQ(accepted(s, t), 0u);
}

TEST(ThresholdAtFpir, ThousandUniformScoresAcceptTen) {
  osb::Rng rng(123);
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<double> s(1000);
    for (auto& v : s) v = rng.uniform();
    EXPECT_EQ(accepted(s, osb::threshold_at_fpir(s, 0.01)), 10u);
  }
}

TEST(ThresholdAtFpir, MatchesCountingReference) {
  osb::Rng rng(7);
  for (int rep = 0; rep < 500; ++rep) {
    std::vector<double> s(1 + rng.uniform_index(30));
    for (auto& v : s) v = static_cast<double>(rng.uniform_index(8)) / 7.0;
    const double fpir = 0.01 + 0.9 * rng.uniform();
    EXPECT_EQ(osb::threshold_at_fpir(s, fpir), osb_ref::threshold(s, fpir));
  }
}

TEST(ThresholdAtFpir, RejectsBadInput) {
  const std::vector<double> none;
  const std::vector<double> one{0.1};
  EXPECT_THROW((void)osb::threshold_at_fpir(none, 0.1), osb::UsageError);
  EXPECT_THROW((void)osb::threshold_at_fpir(one, 0.0), osb::UsageError);
  EXPECT_THROW((void)osb::threshold_at_fpir(one, 1.0), osb::UsageError);
}

TEST(FnirAtFpir, ToyPipelineSeventyFivePercent) {
  const auto fx = osb_fix::toy_pipeline();
  const auto r = osb::fnir_at_fpir(fx.scores, fx.mated, fx.truth, 1.0 / 3.0, 1);
  EXPECT_DOUBLE_EQ(r.threshold, 0.75);
  EXPECT_EQ(r.fnir, 0.75);
  EXPECT_EQ(r.fn_detection_only, 2u);
  EXPECT_EQ(r.fn_identification_only, 1u);
  EXPECT_EQ(r.fn_both, 0u);
  EXPECT_EQ(r.mated_outcomes,
            (std::vector<osb::FnCause>{osb::FnCause::DetectionOnly, osb::FnCause::IdentificationOnly,
                                       osb::FnCause::DetectionOnly, osb::FnCause::None}));
  const auto ref = osb_ref::open_set(fx.rows, 1.0 / 3.0, 1);
  EXPECT_EQ(ref.det_only, 2u);
  EXPECT_EQ(ref.id_only, 1u);
  EXPECT_EQ(ref.fnir, 0.75);
}

TEST(FnirAtFpir, PerfectSeparationIsZero) {
  const auto fx = osb_fix::build({
      {{1.0, 0.2, 0.1}, true, 0},
      {{0.3, 1.0, 0.2}, true, 1},
      {{0.2, 0.4, 1.0}, true, 2},
      {{0.9, 0.5, 0.1}, false, 0},
      {{0.5, 0.8, 0.95}, false, 0},
  });
  EXPECT_EQ(osb::fnir_at_fpir(fx.scores, fx.mated, fx.truth, 0.5, 1).fnir, 0.0);
}

TEST(FnirAtFpir, AllGenuineBelowNonMatedIsOne) {
  const auto fx = osb_fix::build({
      {{0.1, 0.0}, true, 0},
      {{0.0, 0.2}, true, 1},
      {{0.9, 0.5}, false, 0},
      {{0.5, 0.8}, false, 0},
  });
  EXPECT_EQ(osb::fnir_at_fpir(fx.scores, fx.mated, fx.truth, 0.5, 2).fnir, 1.0);
}

TEST(FnirAtFpir, ErrorsOnMissingCategories) {
  const auto fx = osb_fix::build({{{0.1, 0.0}, true, 0}, {{0.0, 0.2}, true, 1}});
  EXPECT_THROW((void)osb::fnir_at_fpir(fx.scores, fx.mated, fx.truth, 0.5, 1), osb::UsageError);
  auto truth = fx.truth;
  truth[0] = "absent";
  const auto fx2 = osb_fix::build({{{0.1, 0.0}, true, 0}, {{0.0, 0.2}, false, 1}});
  truth = fx2.truth;
  truth[0] = "absent";
  EXPECT_THROW((void)osb::fnir_at_fpir(fx2.scores, fx2.mated, truth, 0.5, 1), osb::DataError);
}

TEST(FnirAtFpir, MatchesExhaustiveReference) {
  osb::Rng rng(2024);
  for (int rep = 0; rep < 1000; ++rep) {
    const auto rows = osb_fix::random_rows(rng, 8, 6);
    const auto fx = osb_fix::build(rows);
    const double fpir = 0.05 + 0.9 * rng.uniform();
    const std::size_t R = 1 + rng.uniform_index(fx.scores.cols());
    const auto got = osb::fnir_at_fpir(fx.scores, fx.mated, fx.truth, fpir, R);
    const auto want = osb_ref::open_set(rows, fpir, R);
    ASSERT_EQ(got.threshold, want.threshold);
    ASSERT_EQ(got.fn_detection_only, want.det_only);
    ASSERT_EQ(got.fn_identification_only, want.id_only);
    ASSERT_EQ(got.fn_both, want.both);
    ASSERT_EQ(got.fnir, want.fnir);
  }
}

TEST(FnirAtFpir, NonIncreasingInFpirAndRank) {
  osb::Rng rng(99);
  for (int rep = 0; rep < 200; ++rep) {
    std::vector<ProbeRow> rows;
    const std::size_t cols = 2 + rng.uniform_index(8);
    for (int i = 0; i < 120; ++i) {
      ProbeRow r;
      r.scores.resize(cols);
      for (auto& v : r.scores) v = rng.uniform();
      r.mated = i % 3 == 0;
      r.genuine_col = rng.uniform_index(cols);
      if (r.mated) r.scores[r.genuine_col] = std::min(1.0, r.scores[r.genuine_col] + 0.3 * rng.uniform());
      rows.push_back(r);
    }
    const auto fx = osb_fix::build(rows);
    double prev = 2.0;
    for (double f : {0.001, 0.01, 0.1, 0.5}) {
      const double v = osb::fnir_at_fpir(fx.scores, fx.mated, fx.truth, f, 1).fnir;
      ASSERT_LE(v, prev);
      prev = v;
    }
    prev = 2.0;
    for (std::size_t R = 1; R <= cols; ++R) {
      const auto r = osb::fnir_at_fpir(fx.scores, fx.mated, fx.truth, 0.1, R);
      ASSERT_LE(r.fnir, prev);
      prev = r.fnir;
      if (R == cols) {
        EXPECT_EQ(r.fn_identification_only, 0u);
        EXPECT_EQ(r.fn_both, 0u);
      }
    }
  }
}

// A strictly increasing transform keeps every comparison between scores. The
// midpoint threshold itself moves, so fixtures with a genuine score strictly
// between the two order statistics that bracket it are skipped: there the
// acceptance of that genuine score depends on where the midpoint lands.
TEST(FnirAtFpir, InvariantUnderIncreasingTransform) {
  osb::Rng rng(31);
  int checked = 0;
  for (int rep = 0; rep < 1000; ++rep) {
    const auto rows = osb_fix::random_rows(rng, 8, 6);
    const double fpir = 0.05 + 0.9 * rng.uniform();
    const std::size_t R = 1 + rng.uniform_index(rows.front().scores.size());
    std::vector<double> maxima;
    for (const auto& r : rows) {
      if (!r.mated) maxima.push_back(*std::max_element(r.scores.begin(), r.scores.end()));
    }
    std::sort(maxima.begin(), maxima.end(), std::greater<>());
    const std::size_t k = std::min(static_cast<std::size_t>(std::floor(fpir * maxima.size() + 1e-9)), maxima.size() - 1);
    bool ambiguous = false;
    if (k > 0) {
      for (const auto& r : rows) {
        const double g = r.scores[r.genuine_col];
        ambiguous |= r.mated && g > maxima[k] && g < maxima[k - 1];
      }
    }
    if (ambiguous) continue;
    auto warped = rows;
    for (auto& r : warped) {
      for (auto& v : r.scores) v = std::exp(3.0 * v) + v * v * v;
    }
    const auto a = osb_fix::build(rows);
    const auto b = osb_fix::build(warped);
    const auto ra = osb::fnir_at_fpir(a.scores, a.mated, a.truth, fpir, R);
    const auto rb = osb::fnir_at_fpir(b.scores, b.mated, b.truth, fpir, R);
    ASSERT_EQ(ra.fnir, rb.fnir);
    ASSERT_EQ(ra.mated_outcomes, rb.mated_outcomes);
    ASSERT_EQ(ra.empirical_fpir, rb.empirical_fpir);
    ASSERT_EQ(osb::cmc_rank_k(a.scores, a.truth, a.mated, 1), osb::cmc_rank_k(b.scores, b.truth, b.mated, 1));
    ++checked;
  }
  EXPECT_GT(checked, 500);
}

TEST(CmcRankK, IdentityMatrixIsPerfect) {
  std::vector<ProbeRow> rows;
  for (std::size_t i = 0; i < 5; ++i) {
    ProbeRow r{std::vector<double>(5, 0.0), true, i};
    r.scores[i] = 1.0;
    rows.push_back(r);
  }
  const auto fx = osb_fix::build(rows);
  EXPECT_EQ(osb::cmc_rank_k(fx.scores, fx.truth, 1), 1.0);
}

TEST(CmcRankK, TieCountsAsHit) {
  const auto fx = osb_fix::build({{{0.6, 0.6, 0.1}, true, 1}});
  EXPECT_EQ(osb::genuine_rank(fx.scores.row(0), 1), 1u);
  EXPECT_EQ(osb::cmc_rank_k(fx.scores, fx.truth, 1), 1.0);
}

TEST(CmcRankK, MatchesSortOracle) {
  osb::Rng rng(17);
  std::vector<ProbeRow> rows;
  for (int i = 0; i < 50; ++i) {
    ProbeRow r{std::vector<double>(20), true, rng.uniform_index(20)};
    for (auto& v : r.scores) v = static_cast<double>(rng.uniform_index(50)) / 49.0;
    rows.push_back(r);
  }
  const auto fx = osb_fix::build(rows);
  for (std::size_t k = 1; k <= 20; ++k) {
    EXPECT_EQ(osb::cmc_rank_k(fx.scores, fx.truth, k), osb_ref::cmc(rows, k));
  }
}

TEST(CmcRankK, RandomSmallMatricesMatchReference) {
  osb::Rng rng(18);
  for (int rep = 0; rep < 1000; ++rep) {
    const auto rows = osb_fix::random_rows(rng, 8, 6);
    const auto fx = osb_fix::build(rows);
    const std::size_t k = 1 + rng.uniform_index(fx.scores.cols());
    ASSERT_EQ(osb::cmc_rank_k(fx.scores, fx.truth, fx.mated, k), osb_ref::cmc(rows, k));
  }
}

// Ten mated probes, `fails` of which fall below a single non-mated score.
osb::OpenSetResult forced(std::size_t fails) {
  std::vector<ProbeRow> rows;
  for (std::size_t i = 0; i < 10; ++i) rows.push_back({{i < fails ? 0.3 : 0.9}, true, 0});
  rows.push_back({{0.5}, false, 0});
  const auto fx = osb_fix::build(rows);
  return osb::fnir_at_fpir(fx.scores, fx.mated, fx.truth, 0.01, 1);
}

TEST(Aggregate, SingleSplitHasZeroStd) {
  const auto a = osb::aggregate(0.01, {forced(3)});
  EXPECT_DOUBLE_EQ(a.median_fnir, 0.3);
  EXPECT_EQ(a.std_fnir, 0.0);
}

TEST(Aggregate, MedianOfThree) {
  const auto a = osb::aggregate(0.01, {forced(2), forced(9), forced(4)});
  EXPECT_DOUBLE_EQ(a.median_fnir, 0.4);
  const double mean = (0.2 + 0.4 + 0.9) / 3.0;
  const double var = ((0.2 - mean) * (0.2 - mean) + (0.4 - mean) * (0.4 - mean) + (0.9 - mean) * (0.9 - mean)) / 3.0;
  EXPECT_NEAR(a.std_fnir, std::sqrt(var), 1e-15);
}

osb::EmbeddingSet clustered(std::size_t subjects, std::uint64_t seed) {
  osb::Rng rng(seed);
  std::vector<osb::Embedding> e;
  for (std::size_t s = 0; s < subjects; ++s) {
    std::vector<double> c(8);
    for (auto& v : c) v = rng.normal();
    for (int k = 0; k < 4; ++k) {
      osb::Feature f(8);
      for (int d = 0; d < 8; ++d) f[d] = c[d] + 0.6 * rng.normal();
      e.push_back({"t" + std::to_string(s), std::to_string(k), f});
    }
  }
  return osb::EmbeddingSet(std::move(e), 8);
}

TEST(EvaluateOpenSet, DeterministicAndThreadInvariant) {
  const auto set = clustered(200, 5);
  osb::EvalConfig cfg;
  cfg.seed = 3;
  const auto a = osb::evaluate_open_set(set, cfg, {}, 1);
  const auto b = osb::evaluate_open_set(set, cfg, {}, 1);
  const auto c = osb::evaluate_open_set(set, cfg, {}, 3);
  ASSERT_EQ(a.per_fpir.size(), 2u);
  EXPECT_EQ(a.per_fpir, b.per_fpir);
  EXPECT_EQ(a.per_fpir, c.per_fpir);
  EXPECT_EQ(osb::to_json(a), osb::to_json(c));
  EXPECT_EQ(a.splits.size(), 50u);
}

TEST(EvaluateOpenSet, JsonRecoversPerSplitResults) {
  const auto set = clustered(60, 6);
  osb::EvalConfig cfg;
  cfg.num_splits = 7;
  const auto eval = osb::evaluate_open_set(set, cfg, {});
  const auto back = osb::results_from_json(osb::to_json(eval), 0.01);
  ASSERT_EQ(back.size(), 7u);
  for (std::size_t i = 0; i < back.size(); ++i) {
    const auto& want = eval.at_fpir(0.01).per_split[i];
    EXPECT_EQ(back[i].fnir, want.fnir);
    EXPECT_EQ(back[i].threshold, want.threshold);
    EXPECT_EQ(back[i].fn_detection_only, want.fn_detection_only);
    EXPECT_EQ(back[i].mated_outcomes, want.mated_outcomes);
  }
  EXPECT_THROW((void)osb::results_from_json(osb::to_json(eval), 0.2), osb::DataError);
}

TEST(Outcomes, EncodeDecode) {
  const std::vector<osb::FnCause> v{osb::FnCause::None, osb::FnCause::DetectionOnly,
                                    osb::FnCause::IdentificationOnly, osb::FnCause::Both};
  EXPECT_EQ(osb::encode_outcomes(v), ".DIB");
  EXPECT_EQ(osb::decode_outcomes(".DIB"), v);
}

}  // namespace
