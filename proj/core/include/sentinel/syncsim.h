#ifndef SENTINEL_SYNCSIM_H_
#define SENTINEL_SYNCSIM_H_

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "sentinel/cohortgen.h"
#include "sentinel/engine.h"

namespace sentinel {

enum class SimEventKind { kEnroll, kIncident, kSync, kCohortAnalysis };

std::string SimEventKindName(SimEventKind kind);

struct SimEvent {
  int64_t time = 0;
  uint64_t seq = 0;  // assigned by the simulator
  SimEventKind kind = SimEventKind::kSync;
  std::optional<size_t> agent;  // absent for COHORT_ANALYSIS
  std::optional<SurveyRecord> record;
  std::optional<IncidentLabel> label;
};

// Parameters for generated scenarios. Records come from the cohort
// generator and are dealt round-robin to agents; each agent's incident
// outcomes follow its own hidden risk direction (a shared direction plus
// local_variation times agent-specific noise).
struct ScenarioGenerator {
  size_t records_per_agent = 80;
  size_t incidents_per_agent = 30;
  int64_t horizon = 200;
  double risk_gain = 12.0;
  double risk_bias = 0.5;
  double local_variation = 1.0;
  size_t probe_size = 200;
  // Extra COHORT_ANALYSIS events every this many ticks; 0 = only the final one.
  int64_t cohort_analysis_every = 0;
  GenConfig cohort = GenConfig::Calibrated();
};

struct SimConfig {
  size_t n_agents = 3;
  uint64_t seed = 1;
  int64_t sync_period = 10;
  FeatureSchema schema = FeatureSchema::Default();
  std::optional<ModelBundle> models;  // defaults to ModelBundle::Defaults
  EngineConfig engine;
  // When true, each SYNC installs the latest global model on the agent.
  bool push_global_model = false;

  // Exactly one of script / generator drives the run.
  std::vector<SimEvent> script;
  std::optional<ScenarioGenerator> generator;
  // Probe set for disagreement; scripted runs default to every enrolled record.
  std::vector<SurveyRecord> probe;

  void Validate() const;
};

// Aggregated field data held by the central server.
struct ServerStore {
  struct StoredLabel {
    std::string agent_id;
    IncidentLabel label;
  };
  // (subject_id, agent_id) -> latest synced record
  std::map<std::pair<std::string, std::string>, SurveyRecord> records;
  std::vector<StoredLabel> labels;
};

struct CentralRetrainResult {
  LearnedModel model;
  bool degenerate_single_class = false;
  std::vector<std::string> critical_factors;  // top 5 by |coefficient|
  std::vector<std::string> gained;  // entered the top 5 since `previous`
  std::vector<std::string> lost;    // left the top 5 since `previous`
};

// Retrains a global model from zero on the latest label per (subject,
// agent), in (subject, agent) order. Throws Error(kEmptyTrainingSet) when
// the store holds no usable label.
CentralRetrainResult CentralRetrain(const ServerStore& store,
                                    const FeatureSchema& schema,
                                    const RetrainOptions& options,
                                    const std::optional<LearnedModel>& previous = {});

std::vector<std::string> TopFactors(const LearnedModel& model,
                                    const FeatureSchema& schema, size_t count = 5);

// Fraction of (probe record, agent pair) combinations whose vulnerable/safe
// classes differ. Throws Error(kInvalidArgument) for fewer than 2 agents or
// an empty probe.
double ProbeDisagreement(std::span<const AgentState> agents,
                         std::span<const SurveyRecord> probe);

struct CohortSummary {
  int64_t time = 0;
  size_t records = 0;
  size_t labels = 0;
  std::optional<CalibrationReport> structure;  // absent below 2 records
  std::optional<CentralRetrainResult> central;  // absent without labels
};

struct AgentSummary {
  std::string agent_id;
  std::string model_digest;  // SHA-256 of the learned model JSON
  LearnedModel model;
  size_t registry_size = 0;
  size_t labels = 0;
  size_t danger_alerts = 0;
  size_t outlier_alerts = 0;
};

struct SimReport {
  uint64_t seed = 0;
  std::vector<AgentSummary> agents;
  std::vector<std::vector<double>> divergence;  // Euclidean, coefficients only
  size_t probe_size = 0;
  double probe_disagreement = 0.0;
  size_t server_records = 0;
  size_t server_labels = 0;
  std::vector<CohortSummary> cohort_analyses;
  std::vector<nlohmann::json> trace;  // one object per processed event

  nlohmann::json ToJson() const;
  std::string TraceJsonl() const;
  std::string DivergenceCsv() const;
};

// Processes events in (time, seq) order. Periodic SYNCs are added for every
// agent each sync_period ticks, followed by a final SYNC of every agent and
// a final COHORT_ANALYSIS one tick after the last event. Throws
// Error(kScenarioError, field = "event <seq>") for malformed events.
SimReport RunSimulation(const SimConfig& config);

// Materialized event list (script or generated), before periodic syncs.
std::vector<SimEvent> BuildScenario(const SimConfig& config,
                                    std::vector<SurveyRecord>* probe = nullptr);

std::string AgentId(size_t index);

nlohmann::json ToJson(const SimEvent& event);
SimEvent SimEventFromJson(const nlohmann::json& doc);
// One SimEvent JSON object per line; blank lines are skipped.
std::vector<SimEvent> ParseScenarioJsonl(std::string_view text);
std::string ScenarioJsonl(std::span<const SimEvent> events);

// Config file: {n_agents, seed, sync_period, push_global_model, engine,
// models, scenario: {events | script_file | generator}, probe}. Relative
// script_file paths resolve against `base_dir`.
SimConfig SimConfigFromJson(const nlohmann::json& doc,
                            const std::string& base_dir = ".");

}  // namespace sentinel

#endif  // SENTINEL_SYNCSIM_H_
