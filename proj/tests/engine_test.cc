#include <gtest/gtest.h>

#include "oracles.h"
#include "sentinel/engine.h"
#include "test_util.h"

namespace sentinel {
namespace {

using testing::RandomRecord;
using testing::Rec;

class EngineTest : public ::testing::Test {
 protected:
  EngineTest()
      : schema_(FeatureSchema::Default()),
        state_("agent-0", schema_, ModelBundle::Defaults(schema_.size())) {}

  void EnrollMany(Rng& rng, int n, int localities = 3) {
    for (int i = 0; i < n; ++i) {
      state_.Enroll(RandomRecord(rng, schema_, "s" + std::to_string(100 + i),
                                 "loc" + std::to_string(i % localities), i));
    }
  }

  FeatureSchema schema_;
  AgentState state_;
};

TEST_F(EngineTest, EnrollScoresWithHeuristicBeforeAnyLabels) {
  std::vector<double> lowest;
  for (const FeatureDef& f : schema_.features()) {
    lowest.push_back(f.kind == FeatureKind::kBoundedNumeric ? f.lo : 0.0);
  }
  const SurveyRecord r = Rec("a", "l", lowest);
  const EnrollResult result = state_.Enroll(r);
  EXPECT_TRUE(result.registry_changed);
  EXPECT_EQ(result.prediction.alpha, 0.0);
  EXPECT_EQ(result.prediction.score, 0.0);
  EXPECT_FALSE(result.prediction.vulnerable);
  EXPECT_EQ(state_.PredictionFor("a"), result.prediction);
}

TEST_F(EngineTest, ReenrollmentIsIdempotentAndOlderRecordsAreIgnored) {
  Rng rng(3);
  SurveyRecord r = RandomRecord(rng, schema_, "a", "l", 10);
  ASSERT_TRUE(state_.Enroll(r).registry_changed);
  EXPECT_FALSE(state_.Enroll(r).registry_changed);
  SurveyRecord older = RandomRecord(rng, schema_, "a", "l", 5);
  EXPECT_FALSE(state_.Enroll(older).registry_changed);
  EXPECT_EQ(state_.registry().at("a"), r);
  SurveyRecord newer = RandomRecord(rng, schema_, "a", "l", 11);
  EXPECT_TRUE(state_.Enroll(newer).registry_changed);
  EXPECT_EQ(state_.registry().at("a"), newer);
}

TEST_F(EngineTest, InvalidRecordsAreRejected) {
  EXPECT_SENTINEL_ERROR(state_.Enroll(Rec("a", "l", {1.0})), ErrorCode::kSchemaMismatch);
  std::vector<double> values(schema_.size(), 0.0);
  values[0] = 2.0;
  EXPECT_SENTINEL_ERROR(state_.Enroll(Rec("a", "l", values)), ErrorCode::kRangeViolation);
  EXPECT_TRUE(state_.registry().empty());
}

TEST_F(EngineTest, AlertsAreExactlyTheSafeToVulnerableFlips) {
  Rng rng(5);
  EnrollMany(rng, 40);
  int total_alerts = 0;
  for (int i = 0; i < 30; ++i) {
    const auto before = state_.prediction_cache();
    const IncidentLabel label{"s" + std::to_string(100 + i),
                              rng.Bernoulli(0.5) ? Outcome::kTrafficked : Outcome::kConfirmedSafe,
                              100 + i};
    const IncidentResult result = state_.ReportIncident(label);
    ASSERT_TRUE(result.retrained);
    std::vector<std::string> alerted;
    for (const AlertEvent& a : result.alerts) {
      EXPECT_EQ(a.kind, AlertKind::kEnteredDangerZone);
      EXPECT_EQ(a.timestamp, label.observed_at);
      alerted.push_back(a.subject_id);
    }
    EXPECT_EQ(alerted, oracle::SafeToVulnerable(before, state_.prediction_cache()));
    total_alerts += static_cast<int>(alerted.size());
  }
  EXPECT_GT(total_alerts, 0);
}

TEST_F(EngineTest, DuplicateLabelIsNoOpAndConflictingLabelThrows) {
  Rng rng(7);
  EnrollMany(rng, 5);
  const IncidentLabel label{"s100", Outcome::kTrafficked, 50};
  EXPECT_TRUE(state_.ReportIncident(label).retrained);
  const AgentState snapshot = state_;
  const IncidentResult again = state_.ReportIncident(label);
  EXPECT_FALSE(again.retrained);
  EXPECT_TRUE(state_ == snapshot);
  EXPECT_SENTINEL_ERROR(state_.ReportIncident({"s100", Outcome::kConfirmedSafe, 50}),
                        ErrorCode::kConflict);
  EXPECT_TRUE(state_ == snapshot);
  EXPECT_SENTINEL_ERROR(state_.ReportIncident({"nobody", Outcome::kTrafficked, 50}),
                        ErrorCode::kUnknownSubject);
}

TEST_F(EngineTest, SingleClassRetrainIsFlagged) {
  Rng rng(9);
  EnrollMany(rng, 5);
  const IncidentResult result = state_.ReportIncident({"s100", Outcome::kConfirmedSafe, 1});
  EXPECT_TRUE(result.degenerate_single_class);
}

TEST_F(EngineTest, ThrottleDefersRetrainUntilRetrainNow) {
  EngineConfig config;
  config.min_retrain_interval = 10;
  AgentState state("agent-0", schema_, ModelBundle::Defaults(schema_.size()), config);
  Rng rng(11);
  for (int i = 0; i < 4; ++i) state.Enroll(RandomRecord(rng, schema_, "s" + std::to_string(i), "l"));
  EXPECT_TRUE(state.ReportIncident({"s0", Outcome::kTrafficked, 100}).retrained);
  const int64_t version = state.learned().version;
  EXPECT_FALSE(state.ReportIncident({"s1", Outcome::kConfirmedSafe, 105}).retrained);
  EXPECT_TRUE(state.retrain_pending());
  EXPECT_EQ(state.learned().version, version);
  EXPECT_EQ(state.learned().trained_on, 1);
  const IncidentResult flushed = state.RetrainNow(106);
  EXPECT_TRUE(flushed.retrained);
  EXPECT_FALSE(state.retrain_pending());
  EXPECT_EQ(state.learned().trained_on, 2);
  EXPECT_TRUE(state.ReportIncident({"s2", Outcome::kTrafficked, 116}).retrained);
}

TEST_F(EngineTest, RetrainDependsOnlyOnTheLabeledSet) {
  Rng rng(13);
  EnrollMany(rng, 12);
  AgentState other = state_;
  for (int i = 0; i < 6; ++i) {
    state_.ReportIncident({"s" + std::to_string(100 + i),
                           i % 2 ? Outcome::kTrafficked : Outcome::kConfirmedSafe, i});
  }
  // Same labels, reversed arrival order.
  for (int i = 5; i >= 0; --i) {
    other.ReportIncident({"s" + std::to_string(100 + i),
                          i % 2 ? Outcome::kTrafficked : Outcome::kConfirmedSafe, i});
  }
  EXPECT_EQ(state_.learned().coefficients, other.learned().coefficients);
  EXPECT_EQ(state_.learned().intercept, other.learned().intercept);
}

TEST_F(EngineTest, SafetyPeersRankBySimilarityThenId) {
  const FeatureSchema schema = testing::TinySchema();
  AgentState state("a", schema, ModelBundle::Defaults(schema.size()));
  state.Enroll(Rec("x", "l", {1, 2, 10}));
  state.Enroll(Rec("c", "l", {1, 2, 0}));
  state.Enroll(Rec("b", "l", {1, 2, 0}));
  state.Enroll(Rec("d", "l", {0, 0, 0}));
  state.Enroll(Rec("far", "other", {1, 2, 10}));
  const auto peers = state.SafetyPeers("x", 5);
  ASSERT_EQ(peers.size(), 3u);
  EXPECT_EQ(peers[0].first, "b");
  EXPECT_EQ(peers[1].first, "c");
  EXPECT_NEAR(peers[0].second, 2.0 / 3.0, 1e-12);
  EXPECT_EQ(peers[2].first, "d");
  EXPECT_EQ(state.SafetyPeers("x", 1).size(), 1u);
  EXPECT_SENTINEL_ERROR(state.SafetyPeers("x", 0), ErrorCode::kInvalidArgument);
  EXPECT_SENTINEL_ERROR(state.SafetyPeers("nobody", 3), ErrorCode::kUnknownSubject);
}

TEST_F(EngineTest, LocalityOutlierRaisesAlertAndCursorAdvances) {
  const FeatureSchema schema = testing::TinySchema();
  AgentState state("a", schema, ModelBundle::Defaults(schema.size()));
  for (int i = 0; i < 5; ++i) state.Enroll(Rec("p" + std::to_string(i), "l", {0, 1, 1.0 + i % 2}));
  const EnrollResult result = state.Enroll(Rec("t", "l", {1, 1, 10}, 7));
  ASSERT_TRUE(result.outlier_alert.has_value());
  EXPECT_EQ(result.outlier_alert->kind, AlertKind::kLocalityOutlier);
  EXPECT_EQ(result.outlier_alert->timestamp, 7);
  EXPECT_EQ(state.AlertsSince(0).size(), 1u);
  EXPECT_TRUE(state.AlertsSince(result.outlier_alert->alert_id).empty());
}

TEST_F(EngineTest, InstallModelBumpsVersionAndAlerts) {
  Rng rng(17);
  EnrollMany(rng, 10);
  const auto before = state_.prediction_cache();
  LearnedModel model = LearnedModel::Zero(schema_.size(), 99);
  model.intercept = 10.0;  // everything vulnerable once blended in
  model.trained_on = 1000;
  const IncidentResult result = state_.InstallModel(model, 500);
  EXPECT_EQ(state_.learned().version, 1);
  std::vector<std::string> alerted;
  for (const auto& a : result.alerts) alerted.push_back(a.subject_id);
  EXPECT_EQ(alerted, oracle::SafeToVulnerable(before, state_.prediction_cache()));
  for (const auto& [id, p] : state_.prediction_cache()) EXPECT_TRUE(p.vulnerable) << id;
  EXPECT_SENTINEL_ERROR(state_.InstallModel(LearnedModel::Zero(3), 501),
                        ErrorCode::kDimensionMismatch);
}

TEST(AlertJson, RoundTrips) {
  AlertEvent a;
  a.alert_id = 4;
  a.kind = AlertKind::kLocalityOutlier;
  a.subject_id = "s";
  a.detail.push_back({2, "n", 1.0, 0.15, 0.05, 17.0});
  a.model_version = 3;
  a.timestamp = 9;
  EXPECT_EQ(AlertFromJson(ToJson(a)), a);
  const std::string jsonl = AlertLogJsonl({a, a});
  EXPECT_EQ(std::count(jsonl.begin(), jsonl.end(), '\n'), 2);
}

}  // namespace
}  // namespace sentinel
