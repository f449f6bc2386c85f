#include "sentinel/report_export.h"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <fmt/format.h>

#include "sentinel/error.h"

namespace sentinel {
namespace {

constexpr const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                                    "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
                                    "#bcbd22", "#17becf"};

std::string XmlEscape(std::string_view text) {
  std::string out;
  for (char c : text) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string SvgOpen(double width, double height) {
  return fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{:.0f}\" "
      "height=\"{:.0f}\" viewBox=\"0 0 {:.0f} {:.0f}\" "
      "font-family=\"sans-serif\" font-size=\"10\">\n"
      "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n",
      width, height, width, height);
}

// White -> blue for positive r, white -> red for negative r.
std::string CorrelationColor(double r) {
  const double t = std::clamp(std::abs(r), 0.0, 1.0);
  const int fade = static_cast<int>(std::lround(255.0 * (1.0 - t)));
  if (r >= 0.0) return fmt::format("#{:02x}{:02x}ff", fade, fade);
  return fmt::format("#ff{:02x}{:02x}", fade, fade);
}

}  // namespace

std::string MergeListText(const ClusterTree& tree) {
  std::string out;
  for (const Merge& m : tree.merges) {
    out += fmt::format("{} {} {} {}\n", m.left, m.right, m.distance, m.size);
  }
  return out;
}

ClusterTree ParseMergeList(std::string_view text, size_t leaf_count) {
  ClusterTree tree;
  tree.leaf_count = leaf_count;
  std::istringstream in{std::string(text)};
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream fields(line);
    Merge m;
    if (!(fields >> m.left >> m.right >> m.distance >> m.size)) {
      throw Error(ErrorCode::kIo, fmt::format("merge list line {} is malformed", line_no));
    }
    tree.merges.push_back(m);
  }
  if (leaf_count > 0 && tree.merges.size() != leaf_count - 1) {
    throw Error(ErrorCode::kIo,
                fmt::format("merge list has {} merges, expected {}",
                            tree.merges.size(), leaf_count - 1));
  }
  // Every merge must join two live nodes and report their combined size.
  std::vector<size_t> sizes(leaf_count, 1);
  std::vector<bool> used(leaf_count, false);
  for (size_t i = 0; i < tree.merges.size(); ++i) {
    const Merge& m = tree.merges[i];
    const size_t live = sizes.size();
    if (m.left >= live || m.right >= live || m.left == m.right || used[m.left] ||
        used[m.right] || m.size != sizes[m.left] + sizes[m.right]) {
      throw Error(ErrorCode::kIo, fmt::format("merge list line {} joins invalid nodes", i + 1));
    }
    used[m.left] = used[m.right] = true;
    sizes.push_back(m.size);
    used.push_back(false);
  }
  return tree;
}

std::vector<size_t> DendrogramLeafOrder(const ClusterTree& tree) {
  const size_t n = tree.leaf_count;
  std::vector<size_t> order;
  if (n == 0) return order;
  if (tree.merges.empty()) {
    for (size_t i = 0; i < n; ++i) order.push_back(i);
    return order;
  }
  std::vector<size_t> stack = {n + tree.merges.size() - 1};
  while (!stack.empty()) {
    const size_t id = stack.back();
    stack.pop_back();
    if (id < n) {
      order.push_back(id);
      continue;
    }
    const Merge& m = tree.merges[id - n];
    stack.push_back(m.right);
    stack.push_back(m.left);
  }
  return order;
}

std::string DendrogramSvg(const ClusterTree& tree,
                          const std::vector<int>& cluster_labels) {
  const size_t n = tree.leaf_count;
  const double spacing = n > 200 ? 3.0 : 12.0;
  const double left = 50.0;
  const double top = 20.0;
  const double plot_h = 360.0;
  const double width = std::max(400.0, left + 20.0 + spacing * static_cast<double>(n));
  const double height = top + plot_h + 40.0;

  double max_d = 0.0;
  for (const Merge& m : tree.merges) max_d = std::max(max_d, m.distance);
  if (max_d <= 0.0) max_d = 1.0;
  auto y_of = [&](double d) { return top + plot_h * (1.0 - d / max_d); };

  std::vector<double> x(n + tree.merges.size(), 0.0);
  std::vector<double> h(n + tree.merges.size(), 0.0);
  const std::vector<size_t> order = DendrogramLeafOrder(tree);
  for (size_t pos = 0; pos < order.size(); ++pos) {
    x[order[pos]] = left + spacing * (static_cast<double>(pos) + 0.5);
  }

  std::string svg = SvgOpen(width, height);
  svg += fmt::format(
      "<text x=\"{}\" y=\"12\">Ward dendrogram ({} leaves)</text>\n", left, n);
  svg += fmt::format(
      "<line x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{2}\" stroke=\"#999\"/>\n",
      left - 10, top, top + plot_h);
  svg += fmt::format("<text x=\"2\" y=\"{:.1f}\">{:.3g}</text>\n", top + 4, max_d);
  svg += fmt::format("<text x=\"2\" y=\"{:.1f}\">0</text>\n", top + plot_h);
  svg += "<g stroke=\"#333\" fill=\"none\" stroke-width=\"1\">\n";
  for (size_t i = 0; i < tree.merges.size(); ++i) {
    const Merge& m = tree.merges[i];
    const size_t id = n + i;
    x[id] = 0.5 * (x[m.left] + x[m.right]);
    h[id] = m.distance;
    svg += fmt::format(
        "<path d=\"M{:.1f},{:.1f} V{:.1f} H{:.1f} V{:.1f}\"/>\n", x[m.left],
        y_of(h[m.left]), y_of(m.distance), x[m.right], y_of(h[m.right]));
  }
  svg += "</g>\n";
  for (size_t leaf = 0; leaf < n; ++leaf) {
    const char* color = "#333";
    if (leaf < cluster_labels.size() && cluster_labels[leaf] >= 0) {
      color = kPalette[static_cast<size_t>(cluster_labels[leaf]) % 10];
    }
    svg += fmt::format(
        "<rect x=\"{:.1f}\" y=\"{:.1f}\" width=\"{:.1f}\" height=\"8\" "
        "fill=\"{}\"><title>leaf {}</title></rect>\n",
        x[leaf] - spacing / 2.0, top + plot_h + 4.0, spacing, color, leaf);
  }
  svg += "</svg>\n";
  return svg;
}

std::string CorrelogramSvg(const CorrelationReport& report) {
  const size_t d = report.feature_ids.size();
  const double cell = 16.0;
  const double margin = 170.0;
  const double size = margin + cell * static_cast<double>(d) + 20.0;
  std::string svg = SvgOpen(size, size);
  for (size_t row = 0; row < d; ++row) {
    const size_t i = report.feature_order[row];
    const double y = margin + cell * static_cast<double>(row);
    svg += fmt::format(
        "<text x=\"{:.1f}\" y=\"{:.1f}\" text-anchor=\"end\">{}</text>\n",
        margin - 4.0, y + cell * 0.7, XmlEscape(report.feature_ids[i]));
    svg += fmt::format(
        "<text transform=\"translate({:.1f},{:.1f}) rotate(-90)\">{}</text>\n",
        margin + cell * static_cast<double>(row) + cell * 0.7, margin - 4.0,
        XmlEscape(report.feature_ids[i]));
    for (size_t col = 0; col < d; ++col) {
      const size_t j = report.feature_order[col];
      const double r = report.matrix(i, j);
      svg += fmt::format(
          "<rect x=\"{:.1f}\" y=\"{:.1f}\" width=\"{}\" height=\"{}\" "
          "fill=\"{}\"><title>{} / {}: {:.3f}</title></rect>\n",
          margin + cell * static_cast<double>(col), y, cell, cell,
          CorrelationColor(r), XmlEscape(report.feature_ids[i]),
          XmlEscape(report.feature_ids[j]), r);
    }
  }
  svg += "</svg>\n";
  return svg;
}

std::string CorrelationGraphDot(const CorrelationReport& report) {
  std::string dot = "graph positive_correlations {\n  node [shape=ellipse];\n";
  for (const std::string& id : report.feature_ids) {
    dot += fmt::format("  \"{}\";\n", id);
  }
  for (const auto& [i, j] : report.positive_edges) {
    const double r = report.matrix(i, j);
    dot += fmt::format("  \"{}\" -- \"{}\" [label=\"{:.2f}\", penwidth={:.2f}];\n",
                       report.feature_ids[i], report.feature_ids[j], r, 1.0 + 4.0 * r);
  }
  dot += "}\n";
  return dot;
}

std::string SimilarityHistogramCsv(const SimilarityStats& stats) {
  std::string csv = "bin_low,bin_high,count\n";
  for (int b = 0; b < SimilarityStats::kBins; ++b) {
    csv += fmt::format("{:.2f},{:.2f},{}\n", b * SimilarityStats::kBinWidth,
                       (b + 1) * SimilarityStats::kBinWidth,
                       stats.pair_histogram[static_cast<size_t>(b)]);
  }
  return csv;
}

std::string SimilarityHistogramSvg(const SimilarityStats& stats) {
  const double left = 60.0;
  const double top = 20.0;
  const double plot_w = 500.0;
  const double plot_h = 300.0;
  const double bar_w = plot_w / SimilarityStats::kBins;
  uint64_t max_count = 1;
  for (uint64_t c : stats.pair_histogram) max_count = std::max(max_count, c);

  std::string svg = SvgOpen(left + plot_w + 20.0, top + plot_h + 40.0);
  svg += fmt::format(
      "<text x=\"{}\" y=\"12\">Pairwise similarity ({} pairs)</text>\n", left,
      stats.pair_count());
  for (int b = 0; b < SimilarityStats::kBins; ++b) {
    const uint64_t count = stats.pair_histogram[static_cast<size_t>(b)];
    const double h = plot_h * static_cast<double>(count) / static_cast<double>(max_count);
    const double x = left + bar_w * b;
    svg += fmt::format(
        "<rect x=\"{:.1f}\" y=\"{:.1f}\" width=\"{:.1f}\" height=\"{:.1f}\" "
        "fill=\"#1f77b4\" stroke=\"white\"><title>[{:.2f}, {:.2f}): {}</title></rect>\n",
        x, top + plot_h - h, bar_w, h, b * SimilarityStats::kBinWidth,
        (b + 1) * SimilarityStats::kBinWidth, count);
    if (b % 4 == 0) {
      svg += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\">{:.1f}</text>\n", x,
                         top + plot_h + 14.0, b * SimilarityStats::kBinWidth);
    }
  }
  svg += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\">1.0</text>\n", left + plot_w - 8.0,
                     top + plot_h + 14.0);
  svg += fmt::format("<text x=\"4\" y=\"{:.1f}\">{}</text>\n", top + 8.0, max_count);
  svg += "</svg>\n";
  return svg;
}

}  // namespace sentinel
