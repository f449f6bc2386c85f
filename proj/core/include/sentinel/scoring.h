#ifndef SENTINEL_SCORING_H_
#define SENTINEL_SCORING_H_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace sentinel {

// Cold-start scorer: a convex combination of normalized features compared
// against a threshold. theta is also the danger-zone boundary for blended
// predictions.
struct HeuristicModel {
  std::vector<double> weights;
  double theta = 0.5;

  static HeuristicModel Uniform(size_t dims, double theta = 0.5);

  // Throws Error(kBadConfig) unless weights are non-negative, sum to 1 and
  // theta lies strictly inside (0, 1).
  void Validate() const;

  bool operator==(const HeuristicModel&) const = default;
};

// Linear discriminant with a sigmoid link.
struct LearnedModel {
  std::vector<double> coefficients;
  double intercept = 0.0;
  int64_t version = 0;
  int64_t trained_on = 0;

  static LearnedModel Zero(size_t dims, int64_t version = 0);

  double Probability(std::span<const double> x) const;

  bool operator==(const LearnedModel&) const = default;
};

// Labels-to-authority ramp: alpha is 0 up to floor_labels and reaches 1 at
// n0 trained examples.
struct BlendPolicy {
  int64_t floor_labels = 5;
  int64_t n0 = 50;

  void Validate() const;
  double Alpha(int64_t trained_on) const;

  bool operator==(const BlendPolicy&) const = default;
};

struct Prediction {
  std::string subject_id;
  double score = 0.0;
  bool vulnerable = false;
  double alpha = 0.0;
  int64_t model_version = 0;

  bool operator==(const Prediction&) const = default;
};

struct LabeledExample {
  std::vector<double> x;  // normalized
  int y = 0;              // 1 = trafficked
};

struct RetrainOptions {
  int epochs = 50;
  double learning_rate = 0.1;
  uint64_t seed = 0x5e17e1ULL;
  // Per-class inverse-frequency example weights.
  bool balance_classes = true;

  bool operator==(const RetrainOptions&) const = default;
};

struct RetrainResult {
  LearnedModel model;
  // Every example had the same label; the model only learned to push scores
  // toward that class.
  bool degenerate_single_class = false;
};

double Sigmoid(double z);

double ScoreHeuristic(std::span<const double> x, const HeuristicModel& model);

// One log-loss gradient step: c -= lr*w*(p - y)*x, b -= lr*w*(p - y) with
// p = sigmoid(c.x + b). The version is left alone.
LearnedModel SgdUpdate(const LearnedModel& model, std::span<const double> x,
                       int y, double learning_rate, double example_weight = 1.0);

// `epochs` passes of SgdUpdate in a seeded shuffled order, starting from
// `model`. Returns version + 1 and trained_on = examples.size().
// Throws Error(kEmptyTrainingSet) for an empty set.
RetrainResult Retrain(const LearnedModel& model,
                      std::span<const LabeledExample> examples,
                      const RetrainOptions& options);

Prediction ScoreBlended(std::span<const double> x, const HeuristicModel& heuristic,
                        const LearnedModel& learned, const BlendPolicy& policy);

// Model file: {heuristic:{weights,theta}, learned:{coefficients, intercept,
// version, trained_on}, policy:{floor_labels, n0}}.
struct ModelBundle {
  HeuristicModel heuristic;
  LearnedModel learned;
  BlendPolicy policy;

  static ModelBundle Defaults(size_t dims);
  bool operator==(const ModelBundle&) const = default;
};

nlohmann::json ToJson(const HeuristicModel& m);
nlohmann::json ToJson(const LearnedModel& m);
nlohmann::json ToJson(const BlendPolicy& p);
nlohmann::json ToJson(const Prediction& p);
nlohmann::json ToJson(const ModelBundle& b);
HeuristicModel HeuristicFromJson(const nlohmann::json& doc);
LearnedModel LearnedFromJson(const nlohmann::json& doc);
BlendPolicy PolicyFromJson(const nlohmann::json& doc);
Prediction PredictionFromJson(const nlohmann::json& doc);
// Validates the bundle and that all vectors have `dims` entries when dims > 0.
ModelBundle ModelBundleFromJson(const nlohmann::json& doc, size_t dims = 0);

}  // namespace sentinel

#endif  // SENTINEL_SCORING_H_
