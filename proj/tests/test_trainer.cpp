#include <gtest/gtest.h>

#include <cmath>
#include <ostream>
#include <set>
#include <vector>

#include "osb/error.hpp"
#include "osb/experiment.hpp"
#include "osb/trainer.hpp"

namespace osb {
// Readable parameter values in test listings.
void PrintTo(TrainLoss loss, std::ostream* os) { *os << to_string(loss); }
}  // namespace osb

namespace {

osb::SyntheticDataSpec small_spec(std::uint64_t seed = 0) {
  osb::SyntheticDataSpec s;
  s.num_subjects = 40;
  s.test_subjects = 30;
  s.samples_per_subject = 6;
  s.ambient_dim = 8;
  s.signal_dim = 4;
  s.noise_sigma = 0.2;
  s.seed = seed;
  return s;
}

osb::TrainConfig quick_config(osb::TrainLoss loss, std::uint64_t seed = 0) {
  osb::TrainConfig c;
  c.loss = loss;
  c.steps = 30;
  c.batch_subjects = 8;
  c.lr = 0.01;
  c.seed = seed;
  return c;
}

TEST(GenerateSynthetic, ZeroNoiseMakesSamplesIdentical) {
  auto spec = small_spec();
  spec.noise_sigma = 0.0;
  const auto data = osb::generate_synthetic(spec);
  for (const auto& s : data.train.subjects()) {
    const auto rows = data.train.rows_of(s);
    for (auto r : rows) EXPECT_EQ(data.train[r].feature, data.train[rows[0]].feature);
  }
}

TEST(GenerateSynthetic, CountsAndDisjointSubjects) {
  auto spec = small_spec();
  spec.num_subjects = 100;
  spec.test_subjects = 50;
  const auto data = osb::generate_synthetic(spec);
  EXPECT_EQ(data.train.size(), 600u);
  EXPECT_EQ(data.train.subjects().size(), 100u);
  EXPECT_EQ(data.test.size(), 300u);
  for (const auto& s : data.test.subjects()) EXPECT_FALSE(data.train.has_subject(s));
}

TEST(GenerateSynthetic, SeedDeterminesCenters) {
  const auto a = osb::generate_synthetic(small_spec(1));
  const auto b = osb::generate_synthetic(small_spec(1));
  const auto c = osb::generate_synthetic(small_spec(2));
  EXPECT_EQ(a.train, b.train);
  EXPECT_EQ(a.test, b.test);
  EXPECT_NE(a.train, c.train);
}

TEST(GenerateSynthetic, CentersOnSphereWithoutNuisance) {
  auto spec = small_spec();
  spec.noise_sigma = 0.0;
  spec.nuisance = osb::Nuisance::None;
  spec.class_separation = 2.5;
  const auto data = osb::generate_synthetic(spec);
  for (const auto& e : data.train) {
    double n2 = 0.0;
    for (std::size_t k = 0; k < e.feature.size(); ++k) {
      if (k >= spec.signal_dim) {
        EXPECT_EQ(e.feature[k], 0.0);
      }
      n2 += e.feature[k] * e.feature[k];
    }
    EXPECT_NEAR(std::sqrt(n2), 2.5, 1e-12);
  }
}

TEST(GenerateSynthetic, RejectsDegenerateSpec) {
  auto spec = small_spec();
  spec.num_subjects = 0;
  EXPECT_THROW((void)osb::generate_synthetic(spec), osb::UsageError);
}

TEST(Train, ZeroLearningRateKeepsWeights) {
  const auto data = osb::generate_synthetic(small_spec());
  osb::Rng rng(1);
  const auto model = osb::EmbedModel::random(8, 6, 4, true, rng);
  auto cfg = quick_config(osb::TrainLoss::TripletPlusOurs);
  cfg.lr = 0.0;
  const auto out = osb::train(model, data.train, cfg);
  EXPECT_EQ(out.model, model);
  EXPECT_EQ(out.history.size(), 30u);
}

TEST(Train, TripletLossFallsOnOverlappingTwoClassData) {
  std::vector<osb::Embedding> e;
  osb::Rng rng(3);
  for (int s = 0; s < 2; ++s) {
    for (int k = 0; k < 10; ++k) {
      osb::Feature f(8);
      for (auto& v : f) v = rng.normal();
      f[0] += s == 0 ? 0.8 : -0.8;
      e.push_back({"c" + std::to_string(s), std::to_string(k), f});
    }
  }
  const osb::EmbeddingSet data(std::move(e), 8);
  osb::Rng init(4);
  const auto model = osb::EmbedModel::random(8, 0, 4, true, init);
  auto cfg = quick_config(osb::TrainLoss::Triplet);
  cfg.steps = 200;
  cfg.batch_subjects = 2;
  const auto out = osb::train(model, data, cfg);
  double head = 0.0, tail = 0.0;
  for (std::size_t i = 0; i < 20; ++i) head += out.history[i] / 20.0;
  for (std::size_t i = 180; i < 200; ++i) tail += out.history[i] / 20.0;
  EXPECT_GT(head, 0.0);
  EXPECT_LT(tail, head);
}

TEST(Train, TripletPlusOursStaysFiniteAcrossSeeds) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto data = osb::generate_synthetic(small_spec(seed));
    osb::Rng rng(seed);
    const auto model = osb::EmbedModel::random(8, 6, 4, true, rng);
    auto cfg = quick_config(osb::TrainLoss::TripletPlusOurs, seed);
    cfg.steps = 200;
    const auto out = osb::train(model, data.train, cfg);
    for (double v : out.history) ASSERT_TRUE(std::isfinite(v)) << "seed " << seed;
    EXPECT_TRUE(out.model.finite());
  }
}

TEST(Train, DeterministicUnderSeed) {
  const auto data = osb::generate_synthetic(small_spec());
  osb::Rng rng(1);
  const auto model = osb::EmbedModel::random(8, 6, 4, true, rng);
  for (auto loss : {osb::TrainLoss::Triplet, osb::TrainLoss::TripletPlusOurs, osb::TrainLoss::SoftmaxPlusOurs,
                    osb::TrainLoss::OursOnly}) {
    const auto cfg = quick_config(loss, 5);
    const auto a = osb::train(model, data.train, cfg);
    const auto b = osb::train(model, data.train, cfg);
    EXPECT_EQ(a.model, b.model);
    EXPECT_EQ(a.history, b.history);
    EXPECT_EQ(a.classifier, b.classifier);
  }
}

TEST(Train, DivergenceNamesStep) {
  const auto data = osb::generate_synthetic(small_spec());
  osb::Rng rng(1);
  const auto model = osb::EmbedModel::random(8, 0, 4, false, rng);
  auto cfg = quick_config(osb::TrainLoss::Triplet);
  cfg.lr = 1e300;
  cfg.momentum = 0.0;
  try {
    (void)osb::train(model, data.train, cfg);
    FAIL() << "expected NumericError";
  } catch (const osb::NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("step"), std::string::npos);
  }
}

TEST(Train, InfeasibleBatchIsUsageError) {
  const auto data = osb::generate_synthetic(small_spec());
  osb::Rng rng(1);
  const auto model = osb::EmbedModel::random(8, 0, 4, true, rng);
  auto cfg = quick_config(osb::TrainLoss::Triplet);
  cfg.batch_subjects = 41;
  EXPECT_THROW((void)osb::train(model, data.train, cfg), osb::UsageError);
  cfg = quick_config(osb::TrainLoss::Triplet);
  cfg.steps = 0;
  EXPECT_THROW((void)osb::train(model, data.train, cfg), osb::UsageError);
}

// Parameter gradient of the whole step objective against central differences,
// two layers, input dimension 8.
class StepObjectiveGradient : public ::testing::TestWithParam<osb::TrainLoss> {};

TEST_P(StepObjectiveGradient, MatchesFiniteDifferences) {
  auto spec = small_spec();
  spec.num_subjects = 8;
  const auto data = osb::generate_synthetic(spec);
  std::vector<std::size_t> labels;
  for (const auto& e : data.train) labels.push_back(std::stoul(e.subject_id.substr(1)));
  osb::Rng rng(6);
  auto model = osb::EmbedModel::random(8, 5, 4, true, rng);
  osb::Matrix head;
  auto cfg = quick_config(GetParam());
  if (cfg.loss == osb::TrainLoss::SoftmaxPlusOurs) {
    head = osb::Matrix(8, 4);
    for (auto& w : head.data()) w = 0.5 * rng.normal();
  }
  for (std::uint64_t episode_seed = 0; episode_seed < 3; ++episode_seed) {
    const auto obj = osb::step_objective(model, head, data.train, labels, cfg, episode_seed);
    auto params = model.parameters();
    double worst = 0.0, scale = 0.0;
    for (std::size_t k = 0; k < params.size(); ++k) {
      const double p0 = params[k];
      params[k] = p0 + 1e-5;
      model.set_parameters(params);
      const double up = osb::step_objective(model, head, data.train, labels, cfg, episode_seed).value;
      params[k] = p0 - 1e-5;
      model.set_parameters(params);
      const double down = osb::step_objective(model, head, data.train, labels, cfg, episode_seed).value;
      params[k] = p0;
      model.set_parameters(params);
      const double num = (up - down) / 2e-5;
      worst = std::max(worst, std::fabs(num - obj.model_grad[k]));
      scale = std::max({scale, std::fabs(num), std::fabs(obj.model_grad[k])});
    }
    EXPECT_LT(worst / scale, 1e-5) << "episode seed " << episode_seed;
  }
}

INSTANTIATE_TEST_SUITE_P(Losses, StepObjectiveGradient,
                         ::testing::Values(osb::TrainLoss::OursOnly, osb::TrainLoss::TripletPlusOurs,
                                           osb::TrainLoss::SoftmaxPlusOurs),
                         [](const auto& info) {
                           switch (info.param) {
                             case osb::TrainLoss::OursOnly: return std::string("OursOnly");
                             case osb::TrainLoss::TripletPlusOurs: return std::string("TripletPlusOurs");
                             default: return std::string("SoftmaxPlusOurs");
                           }
                         });

TEST(MovingAverage, SeededWithFirstValue) {
  const auto ema = osb::moving_average({4.0, 2.0, 2.0}, 0.5);
  ASSERT_EQ(ema.size(), 3u);
  EXPECT_EQ(ema[0], 4.0);
  EXPECT_EQ(ema[1], 3.0);
  EXPECT_EQ(ema[2], 2.5);
}

// Every loss the toy experiment ships with, at the shipped settings.
TEST(Train, ShippedConfigsReduceSmoothedLoss) {
  const auto preset = osb::default_experiment(0);
  const auto data = osb::generate_synthetic(preset.data);
  osb::Rng rng(osb::derive_seed(0, "init"));
  const auto model = osb::EmbedModel::random(preset.data.ambient_dim, preset.model.hidden_dim,
                                             preset.model.output_dim, preset.model.normalize_output, rng);
  for (auto loss : {osb::TrainLoss::Triplet, osb::TrainLoss::TripletPlusOurs, osb::TrainLoss::SoftmaxPlusOurs,
                    osb::TrainLoss::OursOnly}) {
    auto cfg = preset.ours;
    cfg.loss = loss;
    const auto out = osb::train(model, data.train, cfg);
    const auto ema = osb::moving_average(out.history, 0.98);
    EXPECT_LT(ema.back(), ema.front()) << osb::to_string(loss);
  }
}

TEST(TrainConfig, JsonRoundTrip) {
  osb::TrainConfig c;
  c.loss = osb::TrainLoss::SoftmaxPlusOurs;
  c.lr = 0.125;
  c.steps = 17;
  c.hp.lambda = 2.5;
  c.hp.rtm_pooling = osb::RtmPooling::Joint;
  c.seed = 99;
  osb::TrainConfig back;
  osb::train_config_from_json(osb::to_json(c), back);
  EXPECT_EQ(osb::to_json(back), osb::to_json(c));

  osb::SyntheticDataSpec s = small_spec(7);
  s.nuisance = osb::Nuisance::None;
  osb::SyntheticDataSpec sback;
  osb::synthetic_spec_from_json(osb::to_json(s), sback);
  EXPECT_EQ(osb::to_json(sback), osb::to_json(s));
  EXPECT_THROW(osb::train_config_from_json("{not json", back), osb::UsageError);
}

}  // namespace
