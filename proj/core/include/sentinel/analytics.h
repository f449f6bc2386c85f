#ifndef SENTINEL_ANALYTICS_H_
#define SENTINEL_ANALYTICS_H_

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sentinel/linalg.h"
#include "sentinel/schema.h"

namespace sentinel {

// ---------------------------------------------------------------------------
// Principal components

struct PcaResult {
  Matrix components;  // d x d, column j is the j-th loading vector
  std::vector<double> eigenvalues;               // non-increasing, >= 0
  std::vector<double> explained_variance_ratio;  // sums to 1 unless degenerate
  std::vector<double> means;
  std::vector<double> stddevs;  // 1 for constant columns
  std::vector<bool> constant_columns;
  // Every column was constant; there is no variance to explain and the
  // ratios are all zero.
  bool degenerate = false;

  size_t dims() const { return means.size(); }
};

// Standardizes columns (sample stddev), forms the covariance of the
// standardized data and eigendecomposes it with cyclic Jacobi.
// Throws Error(kInsufficientData) for fewer than 2 rows or 0 columns.
PcaResult Pca(const Matrix& data);

// Smallest k whose cumulative explained variance ratio reaches `target`.
size_t MinComponentsFor(double target, const PcaResult& pca);

Matrix Standardize(const Matrix& data, const PcaResult& pca);
// Standardized rows projected onto the first k components (n x k).
Matrix Project(const Matrix& data, const PcaResult& pca, size_t k);
// Maps n x k scores back into standardized feature space (n x d).
Matrix InverseProject(const Matrix& scores, const PcaResult& pca);

// ---------------------------------------------------------------------------
// Agglomerative clustering

struct Merge {
  // Node ids follow the usual linkage convention: leaves are 0..n-1 and the
  // node created by merge i is n + i. left < right.
  size_t left = 0;
  size_t right = 0;
  double distance = 0.0;
  size_t size = 0;

  bool operator==(const Merge&) const = default;
};

struct ClusterTree {
  size_t leaf_count = 0;
  std::vector<Merge> merges;
};

// Ward minimum-variance linkage with Lance-Williams updates. The reported
// distance is sqrt(2 * increase in within-cluster sum of squares), the same
// scale as Euclidean distance between singletons. Ties go to the smallest
// (left, right) node-id pair.
ClusterTree WardCluster(const Matrix& points);

// Cluster label per leaf after undoing the last k-1 merges. Labels are
// 0..k-1 in order of first appearance by leaf index.
// Throws Error(kBadK) unless 1 <= k <= leaf_count.
std::vector<int> CutTree(const ClusterTree& tree, size_t k);

// ---------------------------------------------------------------------------
// Similarity

// Number of features on which two records agree. Binary and ordinal values
// must match exactly; bounded-numeric values match when their normalized
// difference is within 1e-9.
size_t MatchingFeatures(const SurveyRecord& a, const SurveyRecord& b,
                        const FeatureSchema& schema);

// Simple matching coefficient in [0, 1].
// Throws Error(kSchemaMismatch) if either record does not fit the schema.
double Similarity(const SurveyRecord& a, const SurveyRecord& b,
                  const FeatureSchema& schema);

struct SimilarityStats {
  static constexpr int kBins = 20;
  static constexpr double kBinWidth = 0.05;

  size_t record_count = 0;
  size_t feature_count = 0;
  // Pair counts per similarity bin [i*0.05, (i+1)*0.05); a similarity of
  // exactly 1 lands in the last bin.
  std::vector<uint64_t> pair_histogram;
  // Pair counts by number of matching features (0..feature_count).
  std::vector<uint64_t> match_count_histogram;
  double duplicate_partner_fraction = 0.0;

  uint64_t pair_count() const;
  // Fraction of pairs with similarity strictly below tau.
  double LowSimilarityPairFraction(double tau) const;
};

// Throws Error(kInsufficientData) for fewer than 2 records.
SimilarityStats ComputeSimilarityStats(std::span<const SurveyRecord> records,
                                       const FeatureSchema& schema);
SimilarityStats ComputeSimilarityStats(const Dataset& dataset);

// ---------------------------------------------------------------------------
// Correlation

struct CorrelationReport {
  std::vector<std::string> feature_ids;
  Matrix matrix;  // Pearson r, unit diagonal
  std::vector<bool> constant_columns;
  // Feature indices sorted by first principal component loading, descending.
  std::vector<size_t> feature_order;
  double tau = 0.5;
  // Unordered pairs (i < j) with r >= tau.
  std::vector<std::pair<size_t, size_t>> positive_edges;

  std::vector<std::pair<size_t, size_t>> PositiveEdges(double tau) const;
};

// Pearson correlation on normalized columns. Constant columns correlate 0
// with everything else and are flagged. Throws Error(kInsufficientData) for
// fewer than 3 records.
CorrelationReport ComputeCorrelationReport(std::span<const SurveyRecord> records,
                                           const FeatureSchema& schema, double tau);
CorrelationReport ComputeCorrelationReport(const Dataset& dataset, double tau);

// ---------------------------------------------------------------------------
// Locality outliers

struct FeatureDeviation {
  size_t feature_index = 0;
  std::string feature_id;
  double value = 0.0;  // normalized
  double locality_mean = 0.0;
  double locality_stddev = 0.0;
  double deviation = 0.0;

  bool operator==(const FeatureDeviation&) const = default;
};

struct DeviationReport {
  static constexpr size_t kMinLocalityRecords = 5;
  static constexpr double kThreshold = 3.0;
  static constexpr double kStddevFloor = 1e-6;

  bool insufficient_context = false;
  // Deviations above kThreshold, largest first.
  std::vector<FeatureDeviation> flagged;

  bool has_flags() const { return !flagged.empty(); }
};

// Per-feature |x - mean| / max(stddev, 1e-6) against the locality's records
// (sample stddev). Fewer than 5 locality records yields the
// insufficient-context marker and no flags.
DeviationReport LocalityOutlierCheck(const SurveyRecord& record,
                                     std::span<const SurveyRecord> locality,
                                     const FeatureSchema& schema);

}  // namespace sentinel

#endif  // SENTINEL_ANALYTICS_H_
