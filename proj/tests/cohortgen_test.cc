#include <gtest/gtest.h>

#include "sentinel/cohortgen.h"
#include "test_util.h"

namespace sentinel {
namespace {

TEST(Generate, IsDeterministicPerSeed) {
  const FeatureSchema schema = FeatureSchema::Default();
  GenConfig config = GenConfig::Calibrated();
  config.n_records = 200;
  const Dataset a = Generate(config, schema);
  const Dataset b = Generate(config, schema);
  EXPECT_EQ(a.records, b.records);
  EXPECT_EQ(DatasetDigest(a), DatasetDigest(b));
  config.seed += 1;
  EXPECT_NE(DatasetDigest(Generate(config, schema)), DatasetDigest(a));
}

TEST(Generate, InvalidBlockIsRecoveredExactly) {
  const FeatureSchema schema = FeatureSchema::Default();
  for (uint64_t seed = 1; seed <= 5; ++seed) {
    GenConfig config = GenConfig::Calibrated();
    config.seed = seed;
    config.n_records = 150;
    const Dataset data = Generate(config, schema);
    ASSERT_EQ(data.records.size(), 157u);
    std::vector<size_t> expected;
    for (size_t i = 150; i < 157; ++i) expected.push_back(i);
    EXPECT_EQ(ValidateDataset(data).FlaggedRecords(), expected);
  }
}

TEST(Generate, NoInvalidBlockMeansCleanData) {
  GenConfig config = GenConfig::Calibrated();
  config.n_records = 100;
  config.invalid_block_size = 0;
  EXPECT_TRUE(ValidateDataset(Generate(config, FeatureSchema::Default())).empty());
}

TEST(Generate, ValuesStayInRange) {
  GenConfig config = GenConfig::Calibrated();
  config.n_records = 300;
  config.invalid_block_size = 0;
  config.numeric_mode = NumericMode::kContinuous;
  const FeatureSchema schema = FeatureSchema::Default();
  for (const SurveyRecord& r : Generate(config, schema).records) {
    EXPECT_NO_THROW(Normalize(r, schema)) << r.subject_id;
  }
}

TEST(GenConfig, JsonRoundTrip) {
  const FeatureSchema schema = FeatureSchema::Default();
  const GenConfig config = GenConfig::Calibrated();
  const GenConfig back = GenConfigFromJson(ToJson(config, schema), schema);
  EXPECT_EQ(ToJson(back, schema), ToJson(config, schema));
  EXPECT_EQ(back.archetype_weights(), config.archetype_weights());
}

TEST(GenConfig, RejectsBadValues) {
  const FeatureSchema schema = FeatureSchema::Default();
  GenConfig config = GenConfig::Calibrated();
  config.duplicate_boost = 1.5;
  EXPECT_SENTINEL_ERROR(config.Validate(schema), ErrorCode::kBadConfig);
  config = GenConfig::Calibrated();
  config.archetypes.front().contrast.push_back("no_such_feature");
  EXPECT_SENTINEL_ERROR(config.Validate(schema), ErrorCode::kBadConfig);
  const FeatureSchema no_ordinal({FeatureDef::Binary("a"), FeatureDef::Binary("b")});
  GenConfig small;
  small.invalid_block_size = 1;
  EXPECT_SENTINEL_ERROR(small.Validate(no_ordinal), ErrorCode::kBadConfig);
}

TEST(Measure, ShippedCalibrationHitsTheAnchors) {
  const CalibrationReport report =
      Measure(Generate(GenConfig::Calibrated(), FeatureSchema::Default()));
  EXPECT_EQ(report.records_measured, 1000u);
  EXPECT_EQ(report.records_excluded, 7u);
  EXPECT_NEAR(report.duplicate_partner_fraction, 0.48, 0.05);
  EXPECT_LT(report.low_similarity_pair_fraction, 0.05);
  EXPECT_NEAR(report.first_pc_evr, 0.21, 0.03);
  EXPECT_NEAR(static_cast<double>(report.components_for_85), 17.0, 2.0);
}

}  // namespace
}  // namespace sentinel
