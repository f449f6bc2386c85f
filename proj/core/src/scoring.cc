#include "sentinel/scoring.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "sentinel/error.h"
#include "sentinel/rng.h"

namespace sentinel {
namespace {

using nlohmann::json;

void CheckDims(size_t expected, size_t actual, const char* what) {
  if (expected != actual) {
    throw Error(ErrorCode::kDimensionMismatch,
                fmt::format("{}: expected {} features, got {}", what, expected,
                            actual));
  }
}

double Dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

void ApplyStep(LearnedModel& m, std::span<const double> x, int y,
               double learning_rate, double example_weight) {
  const double residual =
      Sigmoid(Dot(m.coefficients, x) + m.intercept) - static_cast<double>(y);
  const double step = learning_rate * example_weight * residual;
  for (size_t i = 0; i < x.size(); ++i) m.coefficients[i] -= step * x[i];
  m.intercept -= step;
}

}  // namespace

HeuristicModel HeuristicModel::Uniform(size_t dims, double theta) {
  return {std::vector<double>(dims, 1.0 / static_cast<double>(dims)), theta};
}

void HeuristicModel::Validate() const {
  if (weights.empty()) {
    throw Error(ErrorCode::kBadConfig, "heuristic model has no weights", "weights");
  }
  double sum = 0.0;
  for (size_t i = 0; i < weights.size(); ++i) {
    if (!(weights[i] >= 0.0) || !std::isfinite(weights[i])) {
      throw Error(ErrorCode::kBadConfig,
                  fmt::format("heuristic weight {} is negative", i),
                  fmt::format("weights/{}", i));
    }
    sum += weights[i];
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    throw Error(ErrorCode::kBadConfig,
                fmt::format("heuristic weights sum to {}, not 1", sum), "weights");
  }
  if (!(theta > 0.0 && theta < 1.0)) {
    throw Error(ErrorCode::kBadConfig, "theta must lie strictly inside (0, 1)",
                "theta");
  }
}

LearnedModel LearnedModel::Zero(size_t dims, int64_t version) {
  LearnedModel m;
  m.coefficients.assign(dims, 0.0);
  m.version = version;
  return m;
}

double LearnedModel::Probability(std::span<const double> x) const {
  CheckDims(coefficients.size(), x.size(), "learned model");
  return Sigmoid(Dot(coefficients, x) + intercept);
}

void BlendPolicy::Validate() const {
  if (n0 <= 0) throw Error(ErrorCode::kBadConfig, "n0 must be positive", "n0");
  if (floor_labels < 0 || floor_labels >= n0) {
    throw Error(ErrorCode::kBadConfig, "floor_labels must lie in [0, n0)",
                "floor_labels");
  }
}

double BlendPolicy::Alpha(int64_t trained_on) const {
  const double a = static_cast<double>(trained_on - floor_labels) /
                   static_cast<double>(n0 - floor_labels);
  return std::clamp(a, 0.0, 1.0);
}

double Sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double ScoreHeuristic(std::span<const double> x, const HeuristicModel& model) {
  CheckDims(model.weights.size(), x.size(), "heuristic model");
  // Weights sum to 1 only up to rounding.
  return std::clamp(Dot(model.weights, x), 0.0, 1.0);
}

LearnedModel SgdUpdate(const LearnedModel& model, std::span<const double> x,
                       int y, double learning_rate, double example_weight) {
  CheckDims(model.coefficients.size(), x.size(), "sgd update");
  if (!(learning_rate > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "learning rate must be positive",
                "lr");
  }
  LearnedModel next = model;
  ApplyStep(next, x, y, learning_rate, example_weight);
  return next;
}

RetrainResult Retrain(const LearnedModel& model,
                      std::span<const LabeledExample> examples,
                      const RetrainOptions& options) {
  if (examples.empty()) {
    throw Error(ErrorCode::kEmptyTrainingSet, "no labeled examples to train on");
  }
  if (!(options.learning_rate > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "learning rate must be positive",
                "lr");
  }
  if (options.epochs <= 0) {
    throw Error(ErrorCode::kInvalidArgument, "epochs must be positive", "epochs");
  }
  for (const LabeledExample& e : examples) {
    CheckDims(model.coefficients.size(), e.x.size(), "retrain");
  }
  const size_t n = examples.size();
  const size_t positives = static_cast<size_t>(std::count_if(
      examples.begin(), examples.end(), [](const auto& e) { return e.y == 1; }));
  const bool single_class = positives == 0 || positives == n;

  double weight[2] = {1.0, 1.0};
  if (options.balance_classes && !single_class) {
    weight[1] = static_cast<double>(n) / (2.0 * static_cast<double>(positives));
    weight[0] = static_cast<double>(n) / (2.0 * static_cast<double>(n - positives));
  }

  Rng rng(options.seed);
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t{0});
  LearnedModel m = model;
  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    rng.Shuffle(std::span<size_t>(order));
    for (size_t idx : order) {
      const LabeledExample& e = examples[idx];
      ApplyStep(m, e.x, e.y, options.learning_rate, weight[e.y == 1 ? 1 : 0]);
    }
  }
  m.version = model.version + 1;
  m.trained_on = static_cast<int64_t>(n);
  return {std::move(m), single_class};
}

Prediction ScoreBlended(std::span<const double> x, const HeuristicModel& heuristic,
                        const LearnedModel& learned, const BlendPolicy& policy) {
  CheckDims(heuristic.weights.size(), learned.coefficients.size(), "blend");
  Prediction p;
  p.alpha = policy.Alpha(learned.trained_on);
  p.model_version = learned.version;
  const double h = ScoreHeuristic(x, heuristic);
  if (p.alpha == 0.0) {
    p.score = h;
  } else {
    const double l = learned.Probability(x);
    p.score = p.alpha == 1.0 ? l : (1.0 - p.alpha) * h + p.alpha * l;
  }
  p.vulnerable = p.score >= heuristic.theta;
  return p;
}

ModelBundle ModelBundle::Defaults(size_t dims) {
  return {HeuristicModel::Uniform(dims), LearnedModel::Zero(dims), BlendPolicy{}};
}

json ToJson(const HeuristicModel& m) {
  return {{"weights", m.weights}, {"theta", m.theta}};
}

json ToJson(const LearnedModel& m) {
  return {{"coefficients", m.coefficients},
          {"intercept", m.intercept},
          {"version", m.version},
          {"trained_on", m.trained_on}};
}

json ToJson(const BlendPolicy& p) {
  return {{"floor_labels", p.floor_labels}, {"n0", p.n0}};
}

json ToJson(const Prediction& p) {
  return {{"subject_id", p.subject_id},
          {"score", p.score},
          {"vulnerable", p.vulnerable},
          {"alpha", p.alpha},
          {"model_version", p.model_version}};
}

json ToJson(const ModelBundle& b) {
  return {{"heuristic", ToJson(b.heuristic)},
          {"learned", ToJson(b.learned)},
          {"policy", ToJson(b.policy)}};
}

HeuristicModel HeuristicFromJson(const json& doc) {
  return {doc.at("weights").get<std::vector<double>>(),
          doc.at("theta").get<double>()};
}

LearnedModel LearnedFromJson(const json& doc) {
  LearnedModel m;
  m.coefficients = doc.at("coefficients").get<std::vector<double>>();
  m.intercept = doc.at("intercept").get<double>();
  m.version = doc.at("version").get<int64_t>();
  m.trained_on = doc.at("trained_on").get<int64_t>();
  return m;
}

BlendPolicy PolicyFromJson(const json& doc) {
  return {doc.at("floor_labels").get<int64_t>(), doc.at("n0").get<int64_t>()};
}

Prediction PredictionFromJson(const json& doc) {
  Prediction p;
  p.subject_id = doc.at("subject_id").get<std::string>();
  p.score = doc.at("score").get<double>();
  p.vulnerable = doc.at("vulnerable").get<bool>();
  p.alpha = doc.at("alpha").get<double>();
  p.model_version = doc.at("model_version").get<int64_t>();
  return p;
}

ModelBundle ModelBundleFromJson(const json& doc, size_t dims) {
  ModelBundle b;
  try {
    b.heuristic = HeuristicFromJson(doc.at("heuristic"));
    b.learned = doc.contains("learned")
                    ? LearnedFromJson(doc.at("learned"))
                    : LearnedModel::Zero(b.heuristic.weights.size());
    b.policy = doc.contains("policy") ? PolicyFromJson(doc.at("policy"))
                                      : BlendPolicy{};
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kBadConfig,
                fmt::format("malformed model document: {}", e.what()));
  }
  b.heuristic.Validate();
  b.policy.Validate();
  if (b.learned.coefficients.size() != b.heuristic.weights.size()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "learned coefficients and heuristic weights differ in length",
                "learned/coefficients");
  }
  if (dims != 0 && b.heuristic.weights.size() != dims) {
    throw Error(ErrorCode::kDimensionMismatch,
                fmt::format("model has {} features, schema has {}",
                            b.heuristic.weights.size(), dims),
                "heuristic/weights");
  }
  return b;
}

}  // namespace sentinel
