#include <gtest/gtest.h>

#include "sentinel/schema.h"
#include "test_util.h"

namespace sentinel {
namespace {

using testing::Rec;
using testing::TinySchema;

TEST(FeatureDef, NormalizesEachKind) {
  EXPECT_EQ(FeatureDef::Binary("b").Normalize(1.0), 1.0);
  EXPECT_EQ(FeatureDef::Binary("b").Normalize(0.0), 0.0);
  const FeatureDef ord = FeatureDef::Ordinal("o", 4);
  EXPECT_DOUBLE_EQ(ord.Normalize(0), 0.0);
  EXPECT_DOUBLE_EQ(ord.Normalize(1), 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(ord.Normalize(3), 1.0);
  const FeatureDef num = FeatureDef::Numeric("n", 10.0, 19.0);
  EXPECT_DOUBLE_EQ(num.Normalize(10.0), 0.0);
  EXPECT_DOUBLE_EQ(num.Normalize(13.0), 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(num.Normalize(19.0), 1.0);
}

TEST(FeatureDef, AcceptsOnlyLegalValues) {
  const FeatureDef ord = FeatureDef::Ordinal("o", 3);
  EXPECT_TRUE(ord.Accepts(2));
  EXPECT_FALSE(ord.Accepts(3));
  EXPECT_FALSE(ord.Accepts(1.5));
  EXPECT_FALSE(ord.Accepts(-1));
  EXPECT_FALSE(FeatureDef::Binary("b").Accepts(0.5));
  const FeatureDef num = FeatureDef::Numeric("n", 0, 1);
  EXPECT_TRUE(num.Accepts(0.25));
  EXPECT_FALSE(num.Accepts(1.0001));
  EXPECT_FALSE(num.Accepts(std::nan("")));
}

TEST(FeatureSchema, RejectsMalformedDefinitions) {
  EXPECT_SENTINEL_ERROR(FeatureSchema({}), ErrorCode::kBadConfig);
  EXPECT_SENTINEL_ERROR(FeatureSchema({FeatureDef::Binary("x"), FeatureDef::Binary("x")}),
                        ErrorCode::kBadConfig);
  EXPECT_SENTINEL_ERROR(FeatureSchema({FeatureDef::Ordinal("o", 1)}), ErrorCode::kBadConfig);
  EXPECT_SENTINEL_ERROR(FeatureSchema({FeatureDef::Numeric("n", 2, 2)}),
                        ErrorCode::kBadConfig);
}

TEST(FeatureSchema, DefaultHasThirtyTwoFeatures) {
  const FeatureSchema s = FeatureSchema::Default();
  ASSERT_EQ(s.size(), 32u);
  int binary = 0, ordinal = 0, numeric = 0;
  for (const FeatureDef& f : s.features()) {
    binary += f.kind == FeatureKind::kBinary;
    ordinal += f.kind == FeatureKind::kOrdinal;
    numeric += f.kind == FeatureKind::kBoundedNumeric;
  }
  EXPECT_EQ(binary, 16);
  EXPECT_EQ(ordinal, 12);
  EXPECT_EQ(numeric, 4);
  EXPECT_EQ(s.IndexOf("edu_attends_school"), 0u);
  EXPECT_FALSE(s.IndexOf("no_such_feature").has_value());
}

TEST(Normalize, ReportsOffendingFeature) {
  const FeatureSchema s = TinySchema();
  EXPECT_EQ(Normalize(Rec("a", "L", {1, 2, 5}), s), (std::vector<double>{1, 1, 0.5}));
  EXPECT_SENTINEL_ERROR(Normalize(Rec("a", "L", {1, 2}), s), ErrorCode::kSchemaMismatch);
  try {
    Normalize(Rec("a", "L", {1, 3, 5}), s);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kRangeViolation);
    EXPECT_EQ(e.field(), "o");
  }
}

TEST(ValidateDataset, FindsEveryViolationKind) {
  Dataset d{TinySchema(), {}, {}};
  d.records = {Rec("a", "L", {1, 2, 5}), Rec("b", "L", {2, 0, 5}), Rec("c", "L", {0, 0}),
               Rec("d", "L", {0, 0, 11})};
  d.labels = {{"a", Outcome::kTrafficked, 1},
              {"a", Outcome::kConfirmedSafe, 1},
              {"zz", Outcome::kTrafficked, 2}};
  const ValidationReport r = ValidateDataset(d);
  ASSERT_EQ(r.violations.size(), 5u);
  EXPECT_EQ(r.violations[0].kind, Violation::Kind::kOutOfRange);
  EXPECT_EQ(r.violations[0].feature_id, "b");
  EXPECT_EQ(r.violations[1].kind, Violation::Kind::kLengthMismatch);
  EXPECT_EQ(r.violations[2].feature_id, "n");
  EXPECT_EQ(r.violations[3].kind, Violation::Kind::kDuplicateLabel);
  EXPECT_EQ(r.violations[4].kind, Violation::Kind::kUnknownLabelSubject);
  EXPECT_EQ(r.FlaggedRecords(), (std::vector<size_t>{1, 2, 3}));
}

TEST(ValidateDataset, CleanDatasetIsEmpty) {
  Dataset d{TinySchema(), {Rec("a", "L", {1, 2, 5})}, {{"a", Outcome::kTrafficked, 0}}};
  EXPECT_TRUE(ValidateDataset(d).empty());
}

TEST(Outcome, ParsesNames) {
  EXPECT_EQ(ParseOutcome("trafficked"), Outcome::kTrafficked);
  EXPECT_EQ(ParseOutcome(OutcomeName(Outcome::kConfirmedSafe)), Outcome::kConfirmedSafe);
  EXPECT_SENTINEL_ERROR(ParseOutcome("maybe"), ErrorCode::kInvalidArgument);
}

}  // namespace
}  // namespace sentinel
