#include <chrono>
#include <cmath>

#include <gtest/gtest.h>

#include "oracles.h"
#include "sentinel/rng.h"
#include "sentinel/scoring.h"
#include "test_util.h"

namespace sentinel {
namespace {

std::vector<double> RandomPoint(Rng& rng, size_t d) {
  std::vector<double> x(d);
  for (double& v : x) v = rng.Uniform01();
  return x;
}

TEST(Heuristic, ValidatesConvexity) {
  EXPECT_NO_THROW(HeuristicModel::Uniform(32).Validate());
  EXPECT_SENTINEL_ERROR((HeuristicModel{{0.5, 0.6}, 0.5}.Validate()), ErrorCode::kBadConfig);
  EXPECT_SENTINEL_ERROR((HeuristicModel{{1.5, -0.5}, 0.5}.Validate()), ErrorCode::kBadConfig);
  EXPECT_SENTINEL_ERROR((HeuristicModel{{0.5, 0.5}, 1.0}.Validate()), ErrorCode::kBadConfig);
}

TEST(Heuristic, ScoresWeightedMean) {
  const HeuristicModel m{{0.25, 0.75}, 0.5};
  const std::vector<double> x{1.0, 0.0};
  EXPECT_DOUBLE_EQ(ScoreHeuristic(x, m), 0.25);
  EXPECT_SENTINEL_ERROR(ScoreHeuristic(std::vector<double>{1.0}, m),
                        ErrorCode::kDimensionMismatch);
}

TEST(Blend, AlphaRamp) {
  const BlendPolicy p;  // floor 5, n0 50
  EXPECT_EQ(p.Alpha(0), 0.0);
  EXPECT_EQ(p.Alpha(5), 0.0);
  EXPECT_DOUBLE_EQ(p.Alpha(28), 23.0 / 45.0);
  EXPECT_EQ(p.Alpha(50), 1.0);
  EXPECT_EQ(p.Alpha(500), 1.0);
  EXPECT_SENTINEL_ERROR((BlendPolicy{50, 50}.Validate()), ErrorCode::kBadConfig);
}

TEST(Blend, EndpointsAreBitExact) {
  Rng rng(3);
  const size_t d = 8;
  HeuristicModel h = HeuristicModel::Uniform(d, 0.4);
  LearnedModel l = LearnedModel::Zero(d);
  for (double& c : l.coefficients) c = rng.Normal();
  l.intercept = rng.Normal();
  for (int i = 0; i < 200; ++i) {
    const auto x = RandomPoint(rng, d);
    l.trained_on = 0;
    EXPECT_EQ(ScoreBlended(x, h, l, {}).score, ScoreHeuristic(x, h));
    l.trained_on = 50 + i;
    EXPECT_EQ(ScoreBlended(x, h, l, {}).score, l.Probability(x));
  }
}

TEST(Blend, MidRampMixesAndClassifiesAtTheta) {
  const HeuristicModel h{{1.0}, 0.5};
  LearnedModel l{{0.0}, 0.0, 3, 0};
  l.trained_on = 5 + 45 / 3;  // alpha = 1/3
  const std::vector<double> x{0.2};
  const Prediction p = ScoreBlended(x, h, l, {});
  EXPECT_NEAR(p.score, (2.0 / 3.0) * 0.2 + (1.0 / 3.0) * 0.5, 1e-15);
  EXPECT_FALSE(p.vulnerable);
  EXPECT_EQ(p.model_version, 3);
}

TEST(Sgd, MatchesFiniteDifferenceGradient) {
  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const size_t d = 1 + rng.UniformIndex(6);
    LearnedModel m = LearnedModel::Zero(d);
    for (double& c : m.coefficients) c = rng.Normal();
    m.intercept = rng.Normal();
    const auto x = RandomPoint(rng, d);
    const int y = static_cast<int>(rng.UniformIndex(2));
    const double w = 0.5 + rng.Uniform01();
    const double lr = 0.05;
    const LearnedModel next = SgdUpdate(m, x, y, lr, w);
    const auto fd = oracle::FiniteDifferenceGradient(m, x, y, w);
    for (size_t i = 0; i <= d; ++i) {
      const double step = i < d ? (m.coefficients[i] - next.coefficients[i]) / lr
                                : (m.intercept - next.intercept) / lr;
      EXPECT_NEAR(step, fd[i], 1e-5 * std::max(1.0, std::abs(fd[i])));
    }
    EXPECT_EQ(next.version, m.version);
  }
}

TEST(Retrain, LearnsSeparableSet) {
  Rng rng(5);
  const size_t d = 6;
  std::vector<LabeledExample> examples;
  while (examples.size() < 200) {
    auto x = RandomPoint(rng, d);
    const double margin = x[0] + x[1] - x[2] - 0.5;
    if (std::abs(margin) < 0.05) continue;
    examples.push_back({x, margin > 0 ? 1 : 0});
  }
  RetrainOptions opts;
  opts.epochs = 200;
  opts.learning_rate = 0.5;
  const auto start = std::chrono::steady_clock::now();
  const RetrainResult r = Retrain(LearnedModel::Zero(d, 4), examples, opts);
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  int correct = 0;
  for (const auto& e : examples) correct += (r.model.Probability(e.x) >= 0.5) == (e.y == 1);
  EXPECT_GE(correct, 190);
  EXPECT_LT(secs, 5.0);
  EXPECT_EQ(r.model.version, 5);
  EXPECT_EQ(r.model.trained_on, 200);
  EXPECT_FALSE(r.degenerate_single_class);
}

TEST(Retrain, IsDeterministicPerSeed) {
  std::vector<LabeledExample> ex = {{{0.1, 0.9}, 1}, {{0.8, 0.2}, 0}, {{0.5, 0.5}, 1}};
  RetrainOptions a, b;
  b.seed = a.seed + 1;
  EXPECT_EQ(Retrain(LearnedModel::Zero(2), ex, a).model,
            Retrain(LearnedModel::Zero(2), ex, a).model);
  EXPECT_NE(Retrain(LearnedModel::Zero(2), ex, a).model,
            Retrain(LearnedModel::Zero(2), ex, b).model);
}

TEST(Retrain, FlagsSingleClassAndRejectsEmpty) {
  std::vector<LabeledExample> ex = {{{0.1}, 1}, {{0.9}, 1}};
  const RetrainResult r = Retrain(LearnedModel::Zero(1), ex, {});
  EXPECT_TRUE(r.degenerate_single_class);
  EXPECT_GT(r.model.Probability(std::vector<double>{0.5}), 0.5);
  EXPECT_SENTINEL_ERROR(Retrain(LearnedModel::Zero(1), {}, {}),
                        ErrorCode::kEmptyTrainingSet);
  RetrainOptions bad;
  bad.learning_rate = 0;
  EXPECT_SENTINEL_ERROR(Retrain(LearnedModel::Zero(1), ex, bad), ErrorCode::kInvalidArgument);
}

TEST(Retrain, BalancesClassWeights) {
  // Nine negatives at x=0 and one positive at x=1: with balancing the
  // positive pulls as hard as all negatives together.
  std::vector<LabeledExample> ex;
  for (int i = 0; i < 9; ++i) ex.push_back({{0.0}, 0});
  ex.push_back({{1.0}, 1});
  RetrainOptions balanced, plain;
  plain.balance_classes = false;
  const double pb = Retrain(LearnedModel::Zero(1), ex, balanced).model.Probability(
      std::vector<double>{1.0});
  const double pp =
      Retrain(LearnedModel::Zero(1), ex, plain).model.Probability(std::vector<double>{1.0});
  EXPECT_GT(pb, pp);
}

TEST(Sigmoid, StableAtExtremes) {
  EXPECT_EQ(Sigmoid(0.0), 0.5);
  EXPECT_EQ(Sigmoid(1000.0), 1.0);
  EXPECT_EQ(Sigmoid(-1000.0), 0.0);
  EXPECT_NEAR(Sigmoid(2.0) + Sigmoid(-2.0), 1.0, 1e-15);
}

TEST(ModelBundle, JsonRoundTripAndValidation) {
  ModelBundle b = ModelBundle::Defaults(4);
  b.learned.coefficients = {0.1, -0.2, 0.3, 1e-300};
  b.learned.version = 7;
  b.learned.trained_on = 12;
  EXPECT_EQ(ModelBundleFromJson(ToJson(b), 4), b);
  EXPECT_THROW(ModelBundleFromJson(ToJson(b), 5), Error);
  nlohmann::json bad = ToJson(b);
  bad["heuristic"]["theta"] = 0.0;
  EXPECT_THROW(ModelBundleFromJson(bad, 4), Error);
}

}  // namespace
}  // namespace sentinel
