#ifndef SENTINEL_ENGINE_H_
#define SENTINEL_ENGINE_H_

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "sentinel/analytics.h"
#include "sentinel/schema.h"
#include "sentinel/scoring.h"

namespace sentinel {

enum class AlertKind { kEnteredDangerZone, kLocalityOutlier };

std::string AlertKindName(AlertKind kind);

struct AlertEvent {
  int64_t alert_id = 0;
  AlertKind kind = AlertKind::kEnteredDangerZone;
  std::string subject_id;
  std::vector<FeatureDeviation> detail;  // outliers only
  int64_t model_version = 0;
  int64_t timestamp = 0;

  bool operator==(const AlertEvent&) const = default;
};

struct EngineConfig {
  RetrainOptions retrain;
  // Minimum logical ticks between retrains; incidents arriving sooner are
  // stored and picked up by the next retrain. 0 retrains on every incident.
  int64_t min_retrain_interval = 0;

  bool operator==(const EngineConfig&) const = default;
};

struct EnrollResult {
  Prediction prediction;
  std::optional<AlertEvent> outlier_alert;
  DeviationReport deviation;
  // False when the record was identical to, or older than, the registered one.
  bool registry_changed = false;
};

struct IncidentResult {
  std::vector<AlertEvent> alerts;         // ENTERED_DANGER_ZONE, by subject id
  std::vector<std::string> downgraded;    // vulnerable -> safe, logged only
  bool retrained = false;
  bool degenerate_single_class = false;
};

// On-device state of one field agent: registry, labels, models, prediction
// cache and alert log. A value type; copy it to stage a mutation.
class AgentState {
 public:
  AgentState(std::string agent_id, FeatureSchema schema, ModelBundle models,
             EngineConfig config = {});

  // Registers or refreshes a subject. A record with a newer-or-equal
  // collected_at replaces the registered one; identical re-enrollment is a
  // no-op. Throws kSchemaMismatch / kRangeViolation for invalid records.
  EnrollResult Enroll(const SurveyRecord& record);

  // Stores the label, retrains on every labeled subject, rescores the
  // registry and alerts on each safe -> vulnerable flip.
  // Throws kUnknownSubject, or kConflict for a different outcome at the same
  // (subject, observed_at).
  IncidentResult ReportIncident(const IncidentLabel& label);

  // Forces a retrain that the throttle deferred. No-op without labels.
  IncidentResult RetrainNow(int64_t timestamp);

  // Replaces the learned model with an externally trained one (e.g. a
  // server-side global model) as a new local version, then rescores and
  // alerts exactly as a retrain does.
  IncidentResult InstallModel(const LearnedModel& model, int64_t timestamp);

  // Same-locality subjects by similarity (desc), ties by subject id.
  std::vector<std::pair<std::string, double>> SafetyPeers(
      const std::string& subject_id, size_t top_m) const;

  const Prediction& PredictionFor(const std::string& subject_id) const;
  std::vector<AlertEvent> AlertsSince(int64_t cursor) const;
  std::vector<LabeledExample> TrainingSet() const;

  const std::string& agent_id() const { return agent_id_; }
  const FeatureSchema& schema() const { return schema_; }
  const HeuristicModel& heuristic() const { return models_.heuristic; }
  const LearnedModel& learned() const { return models_.learned; }
  const BlendPolicy& policy() const { return models_.policy; }
  const ModelBundle& models() const { return models_; }
  const EngineConfig& config() const { return config_; }
  const std::map<std::string, SurveyRecord>& registry() const { return registry_; }
  const std::vector<IncidentLabel>& labels() const { return labels_; }
  const std::map<std::string, Prediction>& prediction_cache() const {
    return cache_;
  }
  const std::vector<AlertEvent>& alert_log() const { return alerts_; }
  bool retrain_pending() const { return retrain_pending_; }

  nlohmann::json ToJson() const;
  // Throws Error(kCorruptSnapshot, field = JSON path) on malformed input.
  static AgentState FromJson(const nlohmann::json& payload);

  bool operator==(const AgentState& other) const;

 private:
  Prediction Score(const SurveyRecord& record) const;
  IncidentResult RetrainAndDiff(int64_t timestamp);
  void RescoreAndDiff(int64_t timestamp, IncidentResult& result);
  int64_t NextAlertId() { return next_alert_id_++; }

  std::string agent_id_;
  FeatureSchema schema_;
  ModelBundle models_;
  EngineConfig config_;
  std::map<std::string, SurveyRecord> registry_;
  std::vector<IncidentLabel> labels_;
  std::map<std::string, Prediction> cache_;
  std::vector<AlertEvent> alerts_;
  int64_t next_alert_id_ = 1;
  std::optional<int64_t> last_retrain_at_;
  bool retrain_pending_ = false;
};

// Versioned, digest-protected serialization of an AgentState.
struct AgentSnapshot {
  static constexpr int kFormatVersion = 1;

  nlohmann::json payload;
  std::string digest;  // SHA-256 of payload.dump()

  std::string Serialize() const;
  // Throws Error(kCorruptSnapshot) when the text does not parse, the digest
  // does not match, or the format version is unknown.
  static AgentSnapshot Parse(std::string_view text);
};

AgentSnapshot TakeSnapshot(const AgentState& state);
AgentState Restore(const AgentSnapshot& snapshot);
AgentState RestoreFromText(std::string_view text);

// One AlertEvent JSON object per line.
std::string AlertLogJsonl(const std::vector<AlertEvent>& alerts);

nlohmann::json ToJson(const AlertEvent& alert);
AlertEvent AlertFromJson(const nlohmann::json& doc);
nlohmann::json ToJson(const EngineConfig& config);
EngineConfig EngineConfigFromJson(const nlohmann::json& doc);

}  // namespace sentinel

#endif  // SENTINEL_ENGINE_H_
