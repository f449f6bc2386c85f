#include "sentinel/analytics.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <tuple>

#include <fmt/format.h>

#include "sentinel/error.h"

namespace sentinel {
namespace {

bool IsConstant(const Matrix& m, size_t c) {
  for (size_t r = 1; r < m.rows(); ++r) {
    if (m(r, c) != m(0, c)) return false;
  }
  return true;
}

// Row-major normalized matrix for records that must all be valid.
Matrix NormalizedMatrix(std::span<const SurveyRecord> records,
                        const FeatureSchema& schema) {
  return Matrix::FromRows(NormalizeAll(records, schema));
}

}  // namespace

PcaResult Pca(const Matrix& data) {
  const size_t n = data.rows();
  const size_t d = data.cols();
  if (n < 2 || d < 1) {
    throw Error(ErrorCode::kInsufficientData,
                fmt::format("PCA needs at least 2 records and 1 feature, got {}x{}",
                            n, d));
  }
  PcaResult out;
  out.means.assign(d, 0.0);
  out.stddevs.assign(d, 1.0);
  out.constant_columns.assign(d, false);
  for (size_t c = 0; c < d; ++c) {
    double sum = 0.0;
    for (size_t r = 0; r < n; ++r) sum += data(r, c);
    out.means[c] = sum / static_cast<double>(n);
    if (IsConstant(data, c)) {
      out.constant_columns[c] = true;
      continue;
    }
    double ss = 0.0;
    for (size_t r = 0; r < n; ++r) {
      const double dev = data(r, c) - out.means[c];
      ss += dev * dev;
    }
    out.stddevs[c] = std::sqrt(ss / static_cast<double>(n - 1));
  }

  const Matrix z = Standardize(data, out);
  Matrix cov(d, d);
  for (size_t i = 0; i < d; ++i) {
    for (size_t j = i; j < d; ++j) {
      double s = 0.0;
      for (size_t r = 0; r < n; ++r) s += z(r, i) * z(r, j);
      s /= static_cast<double>(n - 1);
      cov(i, j) = s;
      cov(j, i) = s;
    }
  }

  SymmetricEigen eig = JacobiEigen(cov);
  out.components = std::move(eig.vectors);
  out.eigenvalues = std::move(eig.values);
  double total = 0.0;
  for (double& v : out.eigenvalues) {
    v = std::max(v, 0.0);
    total += v;
  }
  out.explained_variance_ratio.assign(d, 0.0);
  if (total <= 0.0) {
    out.degenerate = true;
  } else {
    for (size_t j = 0; j < d; ++j) {
      out.explained_variance_ratio[j] = out.eigenvalues[j] / total;
    }
  }
  return out;
}

size_t MinComponentsFor(double target, const PcaResult& pca) {
  double cumulative = 0.0;
  for (size_t k = 0; k < pca.explained_variance_ratio.size(); ++k) {
    cumulative += pca.explained_variance_ratio[k];
    // Cumulative sums of ratios that add to exactly 1 can fall a few ulps
    // short of it.
    if (cumulative >= target - 1e-12) return k + 1;
  }
  return pca.explained_variance_ratio.size();
}

Matrix Standardize(const Matrix& data, const PcaResult& pca) {
  if (data.cols() != pca.dims()) {
    throw Error(ErrorCode::kDimensionMismatch,
                fmt::format("data has {} columns, PCA fitted on {}", data.cols(),
                            pca.dims()));
  }
  Matrix z(data.rows(), data.cols());
  for (size_t r = 0; r < data.rows(); ++r) {
    for (size_t c = 0; c < data.cols(); ++c) {
      z(r, c) = (data(r, c) - pca.means[c]) / pca.stddevs[c];
    }
  }
  return z;
}

Matrix Project(const Matrix& data, const PcaResult& pca, size_t k) {
  if (k == 0 || k > pca.dims()) {
    throw Error(ErrorCode::kDimensionMismatch,
                fmt::format("cannot project onto {} of {} components", k,
                            pca.dims()));
  }
  const Matrix z = Standardize(data, pca);
  Matrix out(z.rows(), k);
  for (size_t r = 0; r < z.rows(); ++r) {
    for (size_t j = 0; j < k; ++j) {
      double s = 0.0;
      for (size_t c = 0; c < z.cols(); ++c) s += z(r, c) * pca.components(c, j);
      out(r, j) = s;
    }
  }
  return out;
}

Matrix InverseProject(const Matrix& scores, const PcaResult& pca) {
  const size_t k = scores.cols();
  if (k > pca.dims()) {
    throw Error(ErrorCode::kDimensionMismatch, "more scores than components");
  }
  Matrix out(scores.rows(), pca.dims());
  for (size_t r = 0; r < scores.rows(); ++r) {
    for (size_t c = 0; c < pca.dims(); ++c) {
      double s = 0.0;
      for (size_t j = 0; j < k; ++j) s += scores(r, j) * pca.components(c, j);
      out(r, c) = s;
    }
  }
  return out;
}

ClusterTree WardCluster(const Matrix& points) {
  const size_t n = points.rows();
  ClusterTree tree;
  tree.leaf_count = n;
  if (n <= 1) return tree;

  // Squared Ward distances (2 * delta ESS), indexed by slot. A merge reuses
  // the lower slot for the new cluster.
  Matrix dist(n, n);
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = i + 1; j < n; ++j) {
      const double d = SquaredDistance(points.row(i), points.row(j));
      dist(i, j) = d;
      dist(j, i) = d;
    }
  }
  std::vector<size_t> node(n);
  std::iota(node.begin(), node.end(), size_t{0});
  std::vector<size_t> size(n, 1);
  std::vector<bool> active(n, true);

  using Key = std::tuple<double, size_t, size_t>;
  auto key = [&](size_t a, size_t b) {
    return Key{dist(a, b), std::min(node[a], node[b]), std::max(node[a], node[b])};
  };
  std::vector<size_t> nearest(n, 0);
  std::vector<Key> nearest_key(n);
  auto rescan = [&](size_t i) {
    bool found = false;
    for (size_t j = 0; j < n; ++j) {
      if (j == i || !active[j]) continue;
      const Key k = key(i, j);
      if (!found || k < nearest_key[i]) {
        nearest_key[i] = k;
        nearest[i] = j;
        found = true;
      }
    }
  };
  for (size_t i = 0; i < n; ++i) rescan(i);

  tree.merges.reserve(n - 1);
  for (size_t step = 0; step + 1 < n; ++step) {
    size_t a = n;
    for (size_t i = 0; i < n; ++i) {
      if (active[i] && (a == n || nearest_key[i] < nearest_key[a])) a = i;
    }
    const size_t b = nearest[a];
    const size_t keep = std::min(a, b);
    const size_t drop = std::max(a, b);
    const double dab = dist(a, b);

    Merge m;
    m.left = std::min(node[a], node[b]);
    m.right = std::max(node[a], node[b]);
    m.distance = std::sqrt(dab);
    m.size = size[a] + size[b];
    tree.merges.push_back(m);

    const double na = static_cast<double>(size[keep]);
    const double nb = static_cast<double>(size[drop]);
    for (size_t k = 0; k < n; ++k) {
      if (!active[k] || k == keep || k == drop) continue;
      const double nk = static_cast<double>(size[k]);
      double d = ((na + nk) * dist(k, keep) + (nb + nk) * dist(k, drop) -
                  nk * dab) /
                 (na + nb + nk);
      d = std::max(d, 0.0);
      dist(k, keep) = d;
      dist(keep, k) = d;
    }
    active[drop] = false;
    size[keep] += size[drop];
    node[keep] = n + step;

    for (size_t k = 0; k < n; ++k) {
      if (!active[k] || k == keep) continue;
      if (nearest[k] == keep || nearest[k] == drop) {
        rescan(k);
      } else if (const Key kk = key(k, keep); kk < nearest_key[k]) {
        nearest_key[k] = kk;
        nearest[k] = keep;
      }
    }
    rescan(keep);
  }
  return tree;
}

std::vector<int> CutTree(const ClusterTree& tree, size_t k) {
  const size_t n = tree.leaf_count;
  if (k < 1 || k > n) {
    throw Error(ErrorCode::kBadK,
                fmt::format("cluster count {} outside [1, {}]", k, n));
  }
  std::vector<size_t> parent(2 * n, 0);
  std::iota(parent.begin(), parent.end(), size_t{0});
  auto find = [&](size_t x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  };
  const size_t applied = n - k;
  for (size_t i = 0; i < applied; ++i) {
    const Merge& m = tree.merges[i];
    parent[find(m.left)] = n + i;
    parent[find(m.right)] = n + i;
  }
  std::vector<int> labels(n, -1);
  std::vector<int> label_of_root(2 * n, -1);
  int next = 0;
  for (size_t leaf = 0; leaf < n; ++leaf) {
    const size_t root = find(leaf);
    if (label_of_root[root] < 0) label_of_root[root] = next++;
    labels[leaf] = label_of_root[root];
  }
  return labels;
}

size_t MatchingFeatures(const SurveyRecord& a, const SurveyRecord& b,
                        const FeatureSchema& schema) {
  if (a.values.size() != schema.size() || b.values.size() != schema.size()) {
    throw Error(ErrorCode::kSchemaMismatch,
                fmt::format("records '{}' and '{}' do not fit a {}-feature schema",
                            a.subject_id, b.subject_id, schema.size()));
  }
  size_t matches = 0;
  for (size_t i = 0; i < schema.size(); ++i) {
    const FeatureDef& f = schema.feature(i);
    if (f.kind == FeatureKind::kBoundedNumeric) {
      if (std::abs(f.Normalize(a.values[i]) - f.Normalize(b.values[i])) <= 1e-9) {
        ++matches;
      }
    } else if (a.values[i] == b.values[i]) {
      ++matches;
    }
  }
  return matches;
}

double Similarity(const SurveyRecord& a, const SurveyRecord& b,
                  const FeatureSchema& schema) {
  return static_cast<double>(MatchingFeatures(a, b, schema)) /
         static_cast<double>(schema.size());
}

uint64_t SimilarityStats::pair_count() const {
  return std::accumulate(match_count_histogram.begin(),
                         match_count_histogram.end(), uint64_t{0});
}

double SimilarityStats::LowSimilarityPairFraction(double tau) const {
  const uint64_t total = pair_count();
  if (total == 0) return 0.0;
  uint64_t low = 0;
  for (size_t m = 0; m < match_count_histogram.size(); ++m) {
    const double s = static_cast<double>(m) / static_cast<double>(feature_count);
    if (s < tau) low += match_count_histogram[m];
  }
  return static_cast<double>(low) / static_cast<double>(total);
}

SimilarityStats ComputeSimilarityStats(std::span<const SurveyRecord> records,
                                       const FeatureSchema& schema) {
  const size_t n = records.size();
  if (n < 2) {
    throw Error(ErrorCode::kInsufficientData,
                "similarity analysis needs at least 2 records");
  }
  const size_t d = schema.size();
  // Numeric values are compared after normalization, everything else raw.
  std::vector<double> keys(n * d);
  std::vector<bool> numeric(d);
  for (size_t i = 0; i < d; ++i) {
    numeric[i] = schema.feature(i).kind == FeatureKind::kBoundedNumeric;
  }
  for (size_t r = 0; r < n; ++r) {
    if (records[r].values.size() != d) {
      throw Error(ErrorCode::kSchemaMismatch,
                  fmt::format("record '{}' does not fit the schema",
                              records[r].subject_id));
    }
    for (size_t i = 0; i < d; ++i) {
      const double v = records[r].values[i];
      keys[r * d + i] = numeric[i] ? schema.feature(i).Normalize(v) : v;
    }
  }

  SimilarityStats stats;
  stats.record_count = n;
  stats.feature_count = d;
  stats.pair_histogram.assign(SimilarityStats::kBins, 0);
  stats.match_count_histogram.assign(d + 1, 0);
  std::vector<bool> has_duplicate(n, false);
  for (size_t a = 0; a < n; ++a) {
    const double* ka = &keys[a * d];
    for (size_t b = a + 1; b < n; ++b) {
      const double* kb = &keys[b * d];
      size_t m = 0;
      for (size_t i = 0; i < d; ++i) {
        if (numeric[i] ? std::abs(ka[i] - kb[i]) <= 1e-9 : ka[i] == kb[i]) ++m;
      }
      ++stats.match_count_histogram[m];
      if (m == d) {
        has_duplicate[a] = true;
        has_duplicate[b] = true;
      }
    }
  }
  for (size_t m = 0; m <= d; ++m) {
    // Integer arithmetic keeps bin edges such as 0.7 exact.
    const size_t bin = std::min<size_t>((m * SimilarityStats::kBins) / d,
                                        SimilarityStats::kBins - 1);
    stats.pair_histogram[bin] += stats.match_count_histogram[m];
  }
  stats.duplicate_partner_fraction =
      static_cast<double>(std::count(has_duplicate.begin(), has_duplicate.end(), true)) /
      static_cast<double>(n);
  return stats;
}

SimilarityStats ComputeSimilarityStats(const Dataset& dataset) {
  return ComputeSimilarityStats(dataset.records, dataset.schema);
}

std::vector<std::pair<size_t, size_t>> CorrelationReport::PositiveEdges(
    double threshold) const {
  std::vector<std::pair<size_t, size_t>> edges;
  for (size_t i = 0; i < matrix.rows(); ++i) {
    for (size_t j = i + 1; j < matrix.cols(); ++j) {
      if (matrix(i, j) >= threshold) edges.emplace_back(i, j);
    }
  }
  return edges;
}

CorrelationReport ComputeCorrelationReport(std::span<const SurveyRecord> records,
                                           const FeatureSchema& schema,
                                           double tau) {
  const size_t n = records.size();
  if (n < 3) {
    throw Error(ErrorCode::kInsufficientData,
                "correlation analysis needs at least 3 records");
  }
  const Matrix x = NormalizedMatrix(records, schema);
  const size_t d = x.cols();

  CorrelationReport report;
  report.tau = tau;
  for (const FeatureDef& f : schema.features()) report.feature_ids.push_back(f.id);
  report.constant_columns.assign(d, false);
  std::vector<double> mean(d, 0.0);
  std::vector<double> norm(d, 0.0);
  for (size_t c = 0; c < d; ++c) {
    report.constant_columns[c] = IsConstant(x, c);
    for (size_t r = 0; r < n; ++r) mean[c] += x(r, c);
    mean[c] /= static_cast<double>(n);
    for (size_t r = 0; r < n; ++r) {
      const double dev = x(r, c) - mean[c];
      norm[c] += dev * dev;
    }
    norm[c] = std::sqrt(norm[c]);
  }
  report.matrix = Matrix(d, d);
  for (size_t i = 0; i < d; ++i) {
    report.matrix(i, i) = 1.0;
    for (size_t j = i + 1; j < d; ++j) {
      double r = 0.0;
      if (!report.constant_columns[i] && !report.constant_columns[j]) {
        double s = 0.0;
        for (size_t k = 0; k < n; ++k) s += (x(k, i) - mean[i]) * (x(k, j) - mean[j]);
        r = std::clamp(s / (norm[i] * norm[j]), -1.0, 1.0);
      }
      report.matrix(i, j) = r;
      report.matrix(j, i) = r;
    }
  }

  const PcaResult pca = Pca(x);
  report.feature_order.resize(d);
  std::iota(report.feature_order.begin(), report.feature_order.end(), size_t{0});
  std::stable_sort(report.feature_order.begin(), report.feature_order.end(),
                   [&](size_t a, size_t b) {
                     return pca.components(a, 0) > pca.components(b, 0);
                   });
  report.positive_edges = report.PositiveEdges(tau);
  return report;
}

CorrelationReport ComputeCorrelationReport(const Dataset& dataset, double tau) {
  return ComputeCorrelationReport(dataset.records, dataset.schema, tau);
}

DeviationReport LocalityOutlierCheck(const SurveyRecord& record,
                                     std::span<const SurveyRecord> locality,
                                     const FeatureSchema& schema) {
  DeviationReport report;
  const std::vector<double> x = Normalize(record, schema);
  if (locality.size() < DeviationReport::kMinLocalityRecords) {
    report.insufficient_context = true;
    return report;
  }
  const Matrix peers = NormalizedMatrix(locality, schema);
  const size_t n = peers.rows();
  for (size_t c = 0; c < schema.size(); ++c) {
    double mean = 0.0;
    for (size_t r = 0; r < n; ++r) mean += peers(r, c);
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (size_t r = 0; r < n; ++r) {
      const double dev = peers(r, c) - mean;
      ss += dev * dev;
    }
    const double stddev = std::sqrt(ss / static_cast<double>(n - 1));
    const double deviation =
        std::abs(x[c] - mean) / std::max(stddev, DeviationReport::kStddevFloor);
    if (deviation > DeviationReport::kThreshold) {
      report.flagged.push_back(
          {c, schema.feature(c).id, x[c], mean, stddev, deviation});
    }
  }
  std::stable_sort(report.flagged.begin(), report.flagged.end(),
                   [](const FeatureDeviation& a, const FeatureDeviation& b) {
                     return a.deviation > b.deviation;
                   });
  return report;
}

}  // namespace sentinel
