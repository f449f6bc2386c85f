#include "oracles.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <tuple>

namespace sentinel::oracle {
namespace {

// Coefficients c[0..n] of det(lambda I - A) = sum c[i] lambda^i.
std::vector<double> CharPoly(const Matrix& a) {
  const size_t n = a.rows();
  std::vector<double> c(n + 1, 0.0);
  c[n] = 1.0;
  Matrix m(n, n);  // M_0 = 0
  for (size_t k = 1; k <= n; ++k) {
    Matrix next(n, n);
    for (size_t i = 0; i < n; ++i) {
      for (size_t j = 0; j < n; ++j) {
        double s = 0.0;
        for (size_t t = 0; t < n; ++t) s += a(i, t) * m(t, j);
        next(i, j) = s + (i == j ? c[n - k + 1] : 0.0);
      }
    }
    double trace = 0.0;
    for (size_t i = 0; i < n; ++i) {
      for (size_t t = 0; t < n; ++t) trace += a(i, t) * next(t, i);
    }
    c[n - k] = -trace / static_cast<double>(k);
    m = next;
  }
  return c;
}

double Horner(const std::vector<double>& c, double x) {
  double v = 0.0;
  for (size_t i = c.size(); i-- > 0;) v = v * x + c[i];
  return v;
}

}  // namespace

std::vector<double> CharPolyEigenvalues(const Matrix& a) {
  const size_t n = a.rows();
  const std::vector<double> c = CharPoly(a);
  double bound = 0.0;
  for (size_t i = 0; i < n; ++i) {
    double row = 0.0;
    for (size_t j = 0; j < n; ++j) row += std::abs(a(i, j));
    bound = std::max(bound, row);
  }
  bound += 1.0;
  constexpr int kGrid = 400000;
  std::vector<double> roots;
  double x0 = -bound;
  double f0 = Horner(c, x0);
  for (int g = 1; g <= kGrid; ++g) {
    const double x1 = -bound + 2.0 * bound * g / kGrid;
    const double f1 = Horner(c, x1);
    if (f0 == 0.0) {
      roots.push_back(x0);
    } else if ((f0 < 0) != (f1 < 0) && f1 != 0.0) {
      double lo = x0, hi = x1, flo = f0;
      for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double fm = Horner(c, mid);
        if ((fm < 0) == (flo < 0)) {
          lo = mid;
          flo = fm;
        } else {
          hi = mid;
        }
      }
      roots.push_back(0.5 * (lo + hi));
    }
    x0 = x1;
    f0 = f1;
  }
  std::sort(roots.begin(), roots.end(), std::greater<>());
  return roots;
}

std::vector<double> NullVector(const Matrix& a, double lambda) {
  const size_t n = a.rows();
  Matrix m = a;
  for (size_t i = 0; i < n; ++i) m(i, i) -= lambda;
  std::vector<size_t> col(n);
  std::iota(col.begin(), col.end(), size_t{0});
  // Eliminate n - 1 pivots; the remaining column is the free variable.
  for (size_t k = 0; k + 1 < n; ++k) {
    size_t pr = k, pc = k;
    double best = -1.0;
    for (size_t i = k; i < n; ++i) {
      for (size_t j = k; j < n; ++j) {
        if (std::abs(m(i, col[j])) > best) {
          best = std::abs(m(i, col[j]));
          pr = i;
          pc = j;
        }
      }
    }
    for (size_t j = 0; j < n; ++j) std::swap(m(k, j), m(pr, j));
    std::swap(col[k], col[pc]);
    for (size_t i = k + 1; i < n; ++i) {
      const double f = m(i, col[k]) / m(k, col[k]);
      for (size_t j = 0; j < n; ++j) m(i, j) -= f * m(k, j);
    }
  }
  std::vector<double> v(n, 0.0);
  v[col[n - 1]] = 1.0;
  for (size_t k = n - 1; k-- > 0;) {
    double s = 0.0;
    for (size_t j = k + 1; j < n; ++j) s += m(k, col[j]) * v[col[j]];
    v[col[k]] = -s / m(k, col[k]);
  }
  double norm = 0.0;
  for (double x : v) norm += x * x;
  norm = std::sqrt(norm);
  for (double& x : v) x /= norm;
  return v;
}

std::vector<Merge> WardBruteForce(const Matrix& points) {
  const size_t n = points.rows();
  const size_t d = points.cols();
  struct Cluster {
    size_t id;
    std::vector<size_t> members;
  };
  std::vector<Cluster> clusters;
  for (size_t i = 0; i < n; ++i) clusters.push_back({i, {i}});
  auto centroid = [&](const Cluster& c) {
    std::vector<double> m(d, 0.0);
    for (size_t r : c.members) {
      for (size_t j = 0; j < d; ++j) m[j] += points(r, j);
    }
    for (double& x : m) x /= static_cast<double>(c.members.size());
    return m;
  };
  std::vector<Merge> merges;
  for (size_t step = 0; step + 1 < n; ++step) {
    using Key = std::tuple<double, size_t, size_t>;
    Key best{std::numeric_limits<double>::infinity(), 0, 0};
    size_t bi = 0, bj = 0;
    for (size_t i = 0; i < clusters.size(); ++i) {
      for (size_t j = i + 1; j < clusters.size(); ++j) {
        const auto ci = centroid(clusters[i]);
        const auto cj = centroid(clusters[j]);
        double sq = 0.0;
        for (size_t t = 0; t < d; ++t) sq += (ci[t] - cj[t]) * (ci[t] - cj[t]);
        const double na = static_cast<double>(clusters[i].members.size());
        const double nb = static_cast<double>(clusters[j].members.size());
        const double cost = std::sqrt(2.0 * na * nb / (na + nb) * sq);
        const Key k{cost, std::min(clusters[i].id, clusters[j].id),
                    std::max(clusters[i].id, clusters[j].id)};
        if (k < best) {
          best = k;
          bi = i;
          bj = j;
        }
      }
    }
    Merge m;
    m.left = std::get<1>(best);
    m.right = std::get<2>(best);
    m.distance = std::get<0>(best);
    Cluster joined{n + step, clusters[bi].members};
    joined.members.insert(joined.members.end(), clusters[bj].members.begin(),
                          clusters[bj].members.end());
    m.size = joined.members.size();
    merges.push_back(m);
    clusters.erase(clusters.begin() + static_cast<std::ptrdiff_t>(bj));
    clusters.erase(clusters.begin() + static_cast<std::ptrdiff_t>(bi));
    clusters.push_back(std::move(joined));
  }
  return merges;
}

double LogLoss(const LearnedModel& m, std::span<const double> x, int y, double weight) {
  double z = m.intercept;
  for (size_t i = 0; i < x.size(); ++i) z += m.coefficients[i] * x[i];
  auto softplus = [](double t) { return std::max(t, 0.0) + std::log1p(std::exp(-std::abs(t))); };
  return weight * (y == 1 ? softplus(-z) : softplus(z));
}

std::vector<double> FiniteDifferenceGradient(const LearnedModel& m,
                                             std::span<const double> x, int y,
                                             double weight, double h) {
  std::vector<double> g;
  for (size_t i = 0; i <= m.coefficients.size(); ++i) {
    LearnedModel up = m, down = m;
    if (i < m.coefficients.size()) {
      up.coefficients[i] += h;
      down.coefficients[i] -= h;
    } else {
      up.intercept += h;
      down.intercept -= h;
    }
    g.push_back((LogLoss(up, x, y, weight) - LogLoss(down, x, y, weight)) / (2.0 * h));
  }
  return g;
}

double Pearson(std::span<const double> a, std::span<const double> b) {
  const double n = static_cast<double>(a.size());
  double ma = 0.0, mb = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

std::vector<std::string> SafeToVulnerable(const std::map<std::string, Prediction>& before,
                                          const std::map<std::string, Prediction>& after) {
  std::vector<std::string> out;
  for (const auto& [id, p] : after) {
    auto it = before.find(id);
    const bool was_vulnerable = it != before.end() && it->second.vulnerable;
    if (p.vulnerable && !was_vulnerable) out.push_back(id);
  }
  return out;
}

double BruteForceDisagreement(const std::vector<const AgentState*>& agents,
                              const std::vector<SurveyRecord>& probe) {
  size_t differ = 0, total = 0;
  for (size_t i = 0; i < agents.size(); ++i) {
    for (size_t j = 0; j < agents.size(); ++j) {
      if (i >= j) continue;
      for (const SurveyRecord& r : probe) {
        auto classify = [&](const AgentState& s) {
          const auto x = Normalize(r, s.schema());
          const double alpha = s.policy().Alpha(s.learned().trained_on);
          double h = 0.0;
          for (size_t k = 0; k < x.size(); ++k) h += s.heuristic().weights[k] * x[k];
          h = std::clamp(h, 0.0, 1.0);
          double z = s.learned().intercept;
          for (size_t k = 0; k < x.size(); ++k) z += s.learned().coefficients[k] * x[k];
          const double p = 1.0 / (1.0 + std::exp(-z));
          const double score = alpha == 0.0 ? h : alpha == 1.0 ? p : (1 - alpha) * h + alpha * p;
          return score >= s.heuristic().theta;
        };
        differ += classify(*agents[i]) != classify(*agents[j]) ? 1 : 0;
        ++total;
      }
    }
  }
  return total == 0 ? 0.0 : static_cast<double>(differ) / static_cast<double>(total);
}

double MatchingFraction(const SurveyRecord& a, const SurveyRecord& b,
                        const FeatureSchema& schema) {
  size_t same = 0;
  for (size_t i = 0; i < schema.size(); ++i) {
    const FeatureDef& f = schema.feature(i);
    if (f.kind == FeatureKind::kBoundedNumeric) {
      same += std::abs(a.values[i] - b.values[i]) / (f.hi - f.lo) <= 1e-9 ? 1 : 0;
    } else {
      same += a.values[i] == b.values[i] ? 1 : 0;
    }
  }
  return static_cast<double>(same) / static_cast<double>(schema.size());
}

}  // namespace sentinel::oracle
