#ifndef SENTINEL_REPORT_EXPORT_H_
#define SENTINEL_REPORT_EXPORT_H_

#include <string>
#include <string_view>
#include <vector>

#include "sentinel/analytics.h"

namespace sentinel {

// One merge per line: "left right distance size".
std::string MergeListText(const ClusterTree& tree);
// Throws Error(kIo) for malformed lines or merges that do not form a tree
// over `leaf_count` leaves.
ClusterTree ParseMergeList(std::string_view text, size_t leaf_count);

// Leaves in dendrogram drawing order (left-to-right depth-first).
std::vector<size_t> DendrogramLeafOrder(const ClusterTree& tree);

// `cluster_labels` (optional, one per leaf) colors the leaf ticks.
std::string DendrogramSvg(const ClusterTree& tree,
                          const std::vector<int>& cluster_labels = {});

// Heat map with rows and columns in report.feature_order.
std::string CorrelogramSvg(const CorrelationReport& report);
// Undirected graph of report.positive_edges, edges labelled with r.
std::string CorrelationGraphDot(const CorrelationReport& report);

// bin_low,bin_high,count
std::string SimilarityHistogramCsv(const SimilarityStats& stats);
std::string SimilarityHistogramSvg(const SimilarityStats& stats);

}  // namespace sentinel

#endif  // SENTINEL_REPORT_EXPORT_H_
