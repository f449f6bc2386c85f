#ifndef SENTINEL_TESTS_ORACLES_H_
#define SENTINEL_TESTS_ORACLES_H_

// Independent reference implementations used to check the library. They
// favour obviousness over speed and share no code with the code under test.

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sentinel/analytics.h"
#include "sentinel/engine.h"
#include "sentinel/linalg.h"
#include "sentinel/schema.h"
#include "sentinel/scoring.h"

namespace sentinel::oracle {

// Eigenvalues of a small symmetric matrix as roots of its characteristic
// polynomial (Faddeev-LeVerrier coefficients, grid scan plus bisection),
// sorted descending.
std::vector<double> CharPolyEigenvalues(const Matrix& a);

// Unit null vector of (a - lambda I) by Gaussian elimination with full
// pivoting. Sign is arbitrary.
std::vector<double> NullVector(const Matrix& a, double lambda);

// Agglomerative Ward clustering by exhaustive search: every step recomputes
// the merge cost of every cluster pair from member coordinates. Merge cost
// is sqrt(2 |A||B| / (|A|+|B|) * |cA - cB|^2); ties go to the smaller
// (min node id, max node id).
std::vector<Merge> WardBruteForce(const Matrix& points);

// Weighted log-loss of one example and its central finite-difference
// gradient with respect to (coefficients..., intercept).
double LogLoss(const LearnedModel& m, std::span<const double> x, int y, double weight);
std::vector<double> FiniteDifferenceGradient(const LearnedModel& m,
                                             std::span<const double> x, int y,
                                             double weight, double h = 1e-6);

double Pearson(std::span<const double> a, std::span<const double> b);

// Subjects newly in the danger zone: vulnerable after, safe (or absent) before.
std::vector<std::string> SafeToVulnerable(
    const std::map<std::string, Prediction>& before,
    const std::map<std::string, Prediction>& after);

// Pairwise classification disagreement by explicit enumeration.
double BruteForceDisagreement(const std::vector<const AgentState*>& agents,
                              const std::vector<SurveyRecord>& probe);

// Fraction of features where two raw records agree (numeric tolerance 1e-9
// on the normalized scale).
double MatchingFraction(const SurveyRecord& a, const SurveyRecord& b,
                        const FeatureSchema& schema);

}  // namespace sentinel::oracle

#endif  // SENTINEL_TESTS_ORACLES_H_
