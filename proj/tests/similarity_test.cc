#include <cmath>

#include <gtest/gtest.h>

#include "oracles.h"
#include "sentinel/analytics.h"
#include "sentinel/rng.h"
#include "test_util.h"

namespace sentinel {
namespace {

using testing::Rec;
using testing::TinySchema;

std::vector<SurveyRecord> RandomTinyRecords(Rng& rng, size_t n) {
  std::vector<SurveyRecord> out;
  for (size_t i = 0; i < n; ++i) {
    out.push_back(Rec("s" + std::to_string(i), "loc",
                      {static_cast<double>(rng.UniformIndex(2)),
                       static_cast<double>(rng.UniformIndex(3)),
                       static_cast<double>(rng.UniformIndex(3)) * 5.0}));
  }
  return out;
}

TEST(Similarity, MatchesOracleOnRandomPairs) {
  Rng rng(41);
  const FeatureSchema schema = TinySchema();
  const auto records = RandomTinyRecords(rng, 30);
  for (size_t a = 0; a < records.size(); ++a) {
    for (size_t b = 0; b < records.size(); ++b) {
      EXPECT_DOUBLE_EQ(Similarity(records[a], records[b], schema),
                       oracle::MatchingFraction(records[a], records[b], schema));
    }
  }
}

TEST(Similarity, RejectsShortRecords) {
  const FeatureSchema schema = TinySchema();
  EXPECT_SENTINEL_ERROR(Similarity(Rec("a", "l", {1, 2}), Rec("b", "l", {1, 2, 3}), schema),
                        ErrorCode::kSchemaMismatch);
}

TEST(SimilarityStats, HistogramsAgreeWithPairwiseCounts) {
  Rng rng(43);
  const FeatureSchema schema = TinySchema();
  const auto records = RandomTinyRecords(rng, 25);
  const SimilarityStats stats = ComputeSimilarityStats(records, schema);
  EXPECT_EQ(stats.pair_count(), 25u * 24u / 2u);

  std::vector<uint64_t> bins(SimilarityStats::kBins, 0);
  std::vector<bool> dup(records.size(), false);
  size_t low = 0;
  for (size_t a = 0; a < records.size(); ++a) {
    for (size_t b = a + 1; b < records.size(); ++b) {
      const double s = oracle::MatchingFraction(records[a], records[b], schema);
      bins[std::min<size_t>(static_cast<size_t>(std::floor(s / 0.05 + 1e-9)), 19)]++;
      if (s == 1.0) dup[a] = dup[b] = true;
      if (s < 0.7) ++low;
    }
  }
  EXPECT_EQ(stats.pair_histogram, bins);
  EXPECT_DOUBLE_EQ(stats.duplicate_partner_fraction,
                   static_cast<double>(std::count(dup.begin(), dup.end(), true)) / 25.0);
  EXPECT_DOUBLE_EQ(stats.LowSimilarityPairFraction(0.7),
                   static_cast<double>(low) / static_cast<double>(stats.pair_count()));
}

TEST(SimilarityStats, ExactOneLandsInLastBin) {
  const FeatureSchema schema = TinySchema();
  const std::vector<SurveyRecord> same = {Rec("a", "l", {1, 2, 3}), Rec("b", "l", {1, 2, 3})};
  const SimilarityStats stats = ComputeSimilarityStats(same, schema);
  EXPECT_EQ(stats.pair_histogram.back(), 1u);
  EXPECT_DOUBLE_EQ(stats.duplicate_partner_fraction, 1.0);
  EXPECT_SENTINEL_ERROR(ComputeSimilarityStats(std::span(same).first(1), schema),
                        ErrorCode::kInsufficientData);
}

TEST(Correlation, MatchesPearsonOracle) {
  Rng rng(47);
  const FeatureSchema schema = TinySchema();
  auto records = RandomTinyRecords(rng, 40);
  // Tie the numeric feature to the binary one for a strong positive edge.
  for (auto& r : records) r.values[2] = r.values[0] * 8.0 + rng.Uniform(0.0, 2.0);
  const CorrelationReport report = ComputeCorrelationReport(records, schema, 0.5);
  const auto rows = NormalizeAll(records, schema);
  for (size_t i = 0; i < 3; ++i) {
    for (size_t j = 0; j < 3; ++j) {
      std::vector<double> a, b;
      for (const auto& row : rows) {
        a.push_back(row[i]);
        b.push_back(row[j]);
      }
      const double expected = i == j ? 1.0 : oracle::Pearson(a, b);
      EXPECT_NEAR(report.matrix(i, j), expected, 1e-12);
    }
  }
  const auto edges = report.positive_edges;
  ASSERT_FALSE(edges.empty());
  EXPECT_EQ(edges.front(), (std::pair<size_t, size_t>{0, 2}));
  EXPECT_EQ(report.feature_order.size(), 3u);
}

TEST(Correlation, ConstantColumnIsFlaggedAndUncorrelated) {
  const FeatureSchema schema = TinySchema();
  const std::vector<SurveyRecord> records = {
      Rec("a", "l", {0, 0, 4}), Rec("b", "l", {1, 1, 4}), Rec("c", "l", {1, 2, 4})};
  const CorrelationReport report = ComputeCorrelationReport(records, schema, 0.5);
  EXPECT_TRUE(report.constant_columns[2]);
  EXPECT_EQ(report.matrix(0, 2), 0.0);
  EXPECT_EQ(report.matrix(2, 2), 1.0);
  EXPECT_SENTINEL_ERROR(ComputeCorrelationReport(std::span(records).first(2), schema, 0.5),
                        ErrorCode::kInsufficientData);
}

TEST(LocalityOutlier, FlagsLargeDeviationWithSampleStddev) {
  const FeatureSchema schema = TinySchema();
  std::vector<SurveyRecord> locality;
  for (int i = 0; i < 6; ++i) locality.push_back(Rec("p" + std::to_string(i), "l", {0, 1, 1.0 + i % 2}));
  const SurveyRecord target = Rec("t", "l", {1, 1, 10});
  const DeviationReport report = LocalityOutlierCheck(target, locality, schema);
  EXPECT_FALSE(report.insufficient_context);
  ASSERT_EQ(report.flagged.size(), 2u);
  // Binary column is constant at 0, so the stddev floor applies.
  EXPECT_EQ(report.flagged[0].feature_id, "b");
  EXPECT_NEAR(report.flagged[0].deviation, 1.0 / 1e-6, 1e-3);
  // Numeric: normalized values 0.1/0.2 alternating, sample stddev over 6.
  const double mean = 0.15;
  const double sd = std::sqrt(6 * 0.05 * 0.05 / 5.0);
  EXPECT_EQ(report.flagged[1].feature_id, "n");
  EXPECT_NEAR(report.flagged[1].deviation, (1.0 - mean) / sd, 1e-9);
}

TEST(LocalityOutlier, SmallLocalityHasInsufficientContext) {
  const FeatureSchema schema = TinySchema();
  std::vector<SurveyRecord> locality(4, Rec("p", "l", {0, 0, 0}));
  const DeviationReport report = LocalityOutlierCheck(Rec("t", "l", {1, 2, 10}), locality, schema);
  EXPECT_TRUE(report.insufficient_context);
  EXPECT_FALSE(report.has_flags());
}

}  // namespace
}  // namespace sentinel
