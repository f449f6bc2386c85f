#include "sentinel/syncsim.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "sentinel/digest.h"
#include "sentinel/error.h"
#include "sentinel/io.h"
#include "sentinel/rng.h"

namespace sentinel {
namespace {

using nlohmann::json;

SimEventKind ParseKind(const std::string& text) {
  if (text == "ENROLL") return SimEventKind::kEnroll;
  if (text == "INCIDENT") return SimEventKind::kIncident;
  if (text == "SYNC") return SimEventKind::kSync;
  if (text == "COHORT_ANALYSIS") return SimEventKind::kCohortAnalysis;
  throw Error(ErrorCode::kScenarioError, fmt::format("unknown event kind '{}'", text),
              "kind");
}

size_t ParseAgentId(const std::string& text) {
  constexpr std::string_view kPrefix = "agent-";
  if (text.size() > kPrefix.size() && text.starts_with(kPrefix)) {
    const std::string digits = text.substr(kPrefix.size());
    if (std::all_of(digits.begin(), digits.end(),
                    [](unsigned char c) { return std::isdigit(c); })) {
      return std::stoul(digits);
    }
  }
  throw Error(ErrorCode::kScenarioError,
              fmt::format("agent id '{}' is not of the form agent-<index>", text),
              "agent_id");
}

std::string EventName(const SimEvent& event) {
  return fmt::format("event {}", event.seq);
}

[[noreturn]] void BadEvent(const SimEvent& event, const std::string& why) {
  throw Error(ErrorCode::kScenarioError,
              fmt::format("{} ({} at t={}): {}", EventName(event),
                          SimEventKindName(event.kind), event.time, why),
              EventName(event));
}

void CheckEvent(const SimEvent& event, size_t n_agents) {
  if (event.time < 0) BadEvent(event, "negative time");
  const bool needs_agent = event.kind != SimEventKind::kCohortAnalysis;
  if (needs_agent != event.agent.has_value()) {
    BadEvent(event, needs_agent ? "missing agent" : "unexpected agent");
  }
  if (event.agent && *event.agent >= n_agents) {
    BadEvent(event, fmt::format("agent index {} out of range (n_agents = {})",
                                *event.agent, n_agents));
  }
  if ((event.kind == SimEventKind::kEnroll) != event.record.has_value()) {
    BadEvent(event, event.record ? "unexpected record" : "missing record");
  }
  if ((event.kind == SimEventKind::kIncident) != event.label.has_value()) {
    BadEvent(event, event.label ? "unexpected label" : "missing label");
  }
}

std::string ModelDigest(const LearnedModel& model) {
  return Sha256Hex(ToJson(model).dump());
}

json CentralToJson(const CentralRetrainResult& r) {
  return {{"model", sentinel::ToJson(r.model)},
          {"degenerate_single_class", r.degenerate_single_class},
          {"critical_factors", r.critical_factors},
          {"gained", r.gained},
          {"lost", r.lost}};
}

json SummaryToJson(const CohortSummary& s) {
  json out = {{"time", s.time}, {"records", s.records}, {"labels", s.labels}};
  out["structure"] = s.structure ? sentinel::ToJson(*s.structure) : json(nullptr);
  out["central"] = s.central ? CentralToJson(*s.central) : json(nullptr);
  return out;
}

// Generated scenario: one shared cohort dealt round-robin, per-agent
// enrollment times and incident outcomes from the agent's own sub-stream.
std::vector<SimEvent> GenerateScenario(const SimConfig& config,
                                       std::vector<SurveyRecord>* probe) {
  const ScenarioGenerator& gen = *config.generator;
  const FeatureSchema& schema = config.schema;
  const size_t dims = schema.size();

  GenConfig cohort_config = gen.cohort;
  cohort_config.n_records = gen.records_per_agent * config.n_agents;
  cohort_config.invalid_block_size = 0;
  cohort_config.seed = Rng::DeriveSeed(config.seed, "scenario/cohort");
  const Dataset cohort = Generate(cohort_config, schema);

  Rng scenario(Rng::DeriveSeed(config.seed, "scenario"));
  std::vector<double> shared(dims);
  for (double& v : shared) v = scenario.Normal();

  std::vector<SimEvent> events;
  std::vector<SimEvent> incidents;
  for (size_t a = 0; a < config.n_agents; ++a) {
    Rng rng(Rng::DeriveSeed(config.seed, fmt::format("agent/{}", a)));
    std::vector<double> risk = shared;
    for (double& v : risk) v += gen.local_variation * rng.Normal();
    double scale = 0.0;
    for (double v : risk) scale += std::abs(v);
    if (scale == 0.0) scale = 1.0;

    std::vector<SurveyRecord> mine;
    for (size_t i = a; i < cohort.records.size(); i += config.n_agents) {
      SurveyRecord rec = cohort.records[i];
      rec.locality_id = fmt::format("{}/{}", AgentId(a), rec.locality_id);
      rec.collected_at =
          static_cast<int64_t>(rng.UniformIndex(static_cast<uint64_t>(gen.horizon / 2 + 1)));
      mine.push_back(std::move(rec));
    }
    for (const SurveyRecord& rec : mine) {
      SimEvent e;
      e.time = rec.collected_at;
      e.kind = SimEventKind::kEnroll;
      e.agent = a;
      e.record = rec;
      events.push_back(std::move(e));
    }

    std::vector<size_t> order(mine.size());
    std::iota(order.begin(), order.end(), size_t{0});
    rng.Shuffle(std::span<size_t>(order));
    const size_t n_incidents = std::min(gen.incidents_per_agent, mine.size());
    for (size_t k = 0; k < n_incidents; ++k) {
      const SurveyRecord& rec = mine[order[k]];
      const std::vector<double> x = Normalize(rec, schema);
      // Centered risk in [0, 1]: 0.5 + sum r_j (x_j - 0.5) / sum |r_j|.
      double u = 0.5;
      for (size_t j = 0; j < dims; ++j) u += risk[j] * (x[j] - 0.5) / scale;
      const double p = Sigmoid(gen.risk_gain * (u - gen.risk_bias));
      SimEvent e;
      e.kind = SimEventKind::kIncident;
      e.agent = a;
      e.time = rec.collected_at + 1 +
               static_cast<int64_t>(rng.UniformIndex(
                   static_cast<uint64_t>(std::max<int64_t>(gen.horizon - rec.collected_at, 1))));
      e.label = IncidentLabel{rec.subject_id,
                              rng.Bernoulli(p) ? Outcome::kTrafficked
                                               : Outcome::kConfirmedSafe,
                              e.time};
      incidents.push_back(std::move(e));
    }
  }
  for (SimEvent& e : incidents) events.push_back(std::move(e));

  if (gen.cohort_analysis_every > 0) {
    for (int64_t t = gen.cohort_analysis_every; t <= gen.horizon;
         t += gen.cohort_analysis_every) {
      SimEvent e;
      e.time = t;
      e.kind = SimEventKind::kCohortAnalysis;
      events.push_back(std::move(e));
    }
  }

  if (probe) {
    GenConfig probe_config = gen.cohort;
    probe_config.n_records = gen.probe_size;
    probe_config.invalid_block_size = 0;
    probe_config.seed = Rng::DeriveSeed(config.seed, "probe");
    *probe = gen.probe_size > 0 ? Generate(probe_config, schema).records
                                : std::vector<SurveyRecord>{};
  }
  return events;
}

class Simulator {
 public:
  explicit Simulator(const SimConfig& config) : config_(config) {
    const ModelBundle models =
        config.models ? *config.models : ModelBundle::Defaults(config.schema.size());
    agents_.reserve(config.n_agents);
    for (size_t a = 0; a < config.n_agents; ++a) {
      agents_.emplace_back(AgentId(a), config.schema, models, config.engine);
    }
    label_cursor_.assign(config.n_agents, 0);
    pushed_version_.assign(config.n_agents, -1);
  }

  SimReport Run() {
    std::vector<SurveyRecord> probe;
    std::vector<SimEvent> events = BuildScenario(config_, &probe);
    for (size_t i = 0; i < events.size(); ++i) events[i].seq = i;
    for (const SimEvent& e : events) CheckEvent(e, config_.n_agents);

    int64_t last = 0;
    for (const SimEvent& e : events) last = std::max(last, e.time);
    uint64_t seq = events.size();
    for (int64_t t = config_.sync_period; t <= last; t += config_.sync_period) {
      for (size_t a = 0; a < config_.n_agents; ++a) {
        events.push_back(SyncEvent(t, seq++, a));
      }
    }
    for (size_t a = 0; a < config_.n_agents; ++a) {
      events.push_back(SyncEvent(last + 1, seq++, a));
    }
    SimEvent final_analysis;
    final_analysis.time = last + 1;
    final_analysis.seq = seq++;
    final_analysis.kind = SimEventKind::kCohortAnalysis;
    events.push_back(std::move(final_analysis));

    std::stable_sort(events.begin(), events.end(),
                     [](const SimEvent& x, const SimEvent& y) {
                       return std::tie(x.time, x.seq) < std::tie(y.time, y.seq);
                     });

    SimReport report;
    report.seed = config_.seed;
    for (const SimEvent& e : events) {
      try {
        report.trace.push_back(Process(e, report));
      } catch (const Error& err) {
        if (err.code() == ErrorCode::kScenarioError) throw;
        BadEvent(e, err.what());
      }
    }
    Finish(probe, report);
    return report;
  }

 private:
  static SimEvent SyncEvent(int64_t time, uint64_t seq, size_t agent) {
    SimEvent e;
    e.time = time;
    e.seq = seq;
    e.kind = SimEventKind::kSync;
    e.agent = agent;
    return e;
  }

  json Process(const SimEvent& e, SimReport& report) {
    json trace = {{"seq", e.seq}, {"time", e.time}, {"kind", SimEventKindName(e.kind)}};
    if (e.agent) trace["agent_id"] = AgentId(*e.agent);
    switch (e.kind) {
      case SimEventKind::kEnroll: {
        const EnrollResult r = agents_[*e.agent].Enroll(*e.record);
        trace["subject_id"] = e.record->subject_id;
        trace["score"] = r.prediction.score;
        trace["vulnerable"] = r.prediction.vulnerable;
        trace["registry_changed"] = r.registry_changed;
        if (r.outlier_alert) trace["outlier_alert"] = r.outlier_alert->alert_id;
        break;
      }
      case SimEventKind::kIncident: {
        const IncidentResult r = agents_[*e.agent].ReportIncident(*e.label);
        trace["subject_id"] = e.label->subject_id;
        trace["outcome"] = OutcomeName(e.label->outcome);
        DescribeRetrain(r, agents_[*e.agent], trace);
        break;
      }
      case SimEventKind::kSync:
        Sync(e, trace);
        break;
      case SimEventKind::kCohortAnalysis:
        report.cohort_analyses.push_back(Analyze(e.time));
        trace["records"] = report.cohort_analyses.back().records;
        trace["labels"] = report.cohort_analyses.back().labels;
        if (global_) trace["global_version"] = global_->version;
        break;
    }
    return trace;
  }

  static void DescribeRetrain(const IncidentResult& r, const AgentState& agent,
                              json& trace) {
    trace["retrained"] = r.retrained;
    trace["model_version"] = agent.learned().version;
    json alerts = json::array();
    for (const AlertEvent& a : r.alerts) {
      alerts.push_back({{"alert_id", a.alert_id}, {"subject_id", a.subject_id}});
    }
    trace["alerts"] = std::move(alerts);
    trace["downgraded"] = r.downgraded;
  }

  void Sync(const SimEvent& e, json& trace) {
    const size_t a = *e.agent;
    AgentState& agent = agents_[a];
    if (agent.retrain_pending()) {
      DescribeRetrain(agent.RetrainNow(e.time), agent, trace);
    }

    size_t pushed_records = 0;
    for (const auto& [subject, record] : agent.registry()) {
      auto key = std::make_pair(subject, agent.agent_id());
      auto it = store_.records.find(key);
      if (it == store_.records.end() || it->second != record) {
        store_.records[key] = record;
        ++pushed_records;
      }
    }
    const auto& labels = agent.labels();
    const size_t pushed_labels = labels.size() - label_cursor_[a];
    for (size_t i = label_cursor_[a]; i < labels.size(); ++i) {
      store_.labels.push_back({agent.agent_id(), labels[i]});
    }
    label_cursor_[a] = labels.size();
    trace["pushed_records"] = pushed_records;
    trace["pushed_labels"] = pushed_labels;

    if (config_.push_global_model && global_ &&
        pushed_version_[a] != global_->version) {
      const IncidentResult r = agent.InstallModel(*global_, e.time);
      pushed_version_[a] = global_->version;
      trace["installed_global_version"] = global_->version;
      DescribeRetrain(r, agent, trace);
    }
  }

  CohortSummary Analyze(int64_t time) {
    CohortSummary summary;
    summary.time = time;
    summary.records = store_.records.size();
    summary.labels = store_.labels.size();

    Dataset aggregate{config_.schema, {}, {}};
    aggregate.records.reserve(store_.records.size());
    for (const auto& [key, record] : store_.records) aggregate.records.push_back(record);
    if (aggregate.records.size() >= 2) {
      try {
        summary.structure = Measure(aggregate);
      } catch (const Error& err) {
        if (err.code() != ErrorCode::kInsufficientData) throw;
      }
    }
    if (!store_.labels.empty()) {
      CentralRetrainResult central =
          CentralRetrain(store_, config_.schema, config_.engine.retrain, global_);
      global_ = central.model;
      if (!central.gained.empty() || !central.lost.empty()) {
        spdlog::info("t={}: critical factors gained [{}] lost [{}]", time,
                     fmt::join(central.gained, ", "), fmt::join(central.lost, ", "));
      }
      summary.central = std::move(central);
    }
    return summary;
  }

  void Finish(std::span<const SurveyRecord> probe, SimReport& report) {
    const size_t n = agents_.size();
    for (const AgentState& agent : agents_) {
      AgentSummary s;
      s.agent_id = agent.agent_id();
      s.model = agent.learned();
      s.model_digest = ModelDigest(s.model);
      s.registry_size = agent.registry().size();
      s.labels = agent.labels().size();
      for (const AlertEvent& a : agent.alert_log()) {
        (a.kind == AlertKind::kEnteredDangerZone ? s.danger_alerts : s.outlier_alerts)++;
      }
      report.agents.push_back(std::move(s));
    }
    report.divergence.assign(n, std::vector<double>(n, 0.0));
    for (size_t i = 0; i < n; ++i) {
      for (size_t j = i + 1; j < n; ++j) {
        const auto& ci = agents_[i].learned().coefficients;
        const auto& cj = agents_[j].learned().coefficients;
        double sq = 0.0;
        for (size_t k = 0; k < ci.size(); ++k) sq += (ci[k] - cj[k]) * (ci[k] - cj[k]);
        report.divergence[i][j] = report.divergence[j][i] = std::sqrt(sq);
      }
    }
    report.probe_size = probe.size();
    report.probe_disagreement =
        n >= 2 && !probe.empty()
            ? ProbeDisagreement(std::span<const AgentState>(agents_), probe)
            : 0.0;
    report.server_records = store_.records.size();
    report.server_labels = store_.labels.size();
  }

  const SimConfig& config_;
  std::vector<AgentState> agents_;
  ServerStore store_;
  std::vector<size_t> label_cursor_;
  std::vector<int64_t> pushed_version_;
  std::optional<LearnedModel> global_;
};

}  // namespace

std::string SimEventKindName(SimEventKind kind) {
  switch (kind) {
    case SimEventKind::kEnroll: return "ENROLL";
    case SimEventKind::kIncident: return "INCIDENT";
    case SimEventKind::kSync: return "SYNC";
    case SimEventKind::kCohortAnalysis: return "COHORT_ANALYSIS";
  }
  return "UNKNOWN";
}

std::string AgentId(size_t index) { return fmt::format("agent-{}", index); }

void SimConfig::Validate() const {
  if (n_agents < 1) throw Error(ErrorCode::kBadConfig, "n_agents must be >= 1", "n_agents");
  if (sync_period < 1) {
    throw Error(ErrorCode::kBadConfig, "sync_period must be >= 1", "sync_period");
  }
  if (!script.empty() && generator) {
    throw Error(ErrorCode::kBadConfig, "scenario has both a script and a generator",
                "scenario");
  }
  if (models) {
    if (models->heuristic.weights.size() != schema.size() ||
        models->learned.coefficients.size() != schema.size()) {
      throw Error(ErrorCode::kBadConfig, "models do not match the schema", "models");
    }
  }
  if (generator) {
    if (generator->horizon < 1) {
      throw Error(ErrorCode::kBadConfig, "generator horizon must be >= 1",
                  "scenario.generator.horizon");
    }
    if (generator->records_per_agent < 1) {
      throw Error(ErrorCode::kBadConfig, "records_per_agent must be >= 1",
                  "scenario.generator.records_per_agent");
    }
    if (!std::isfinite(generator->risk_gain) || !std::isfinite(generator->risk_bias) ||
        !std::isfinite(generator->local_variation) || generator->local_variation < 0) {
      throw Error(ErrorCode::kBadConfig, "risk parameters must be finite",
                  "scenario.generator");
    }
    if (generator->cohort_analysis_every < 0) {
      throw Error(ErrorCode::kBadConfig, "cohort_analysis_every must be >= 0",
                  "scenario.generator.cohort_analysis_every");
    }
    generator->cohort.Validate(schema);
  }
}

std::vector<SimEvent> BuildScenario(const SimConfig& config,
                                    std::vector<SurveyRecord>* probe) {
  config.Validate();
  if (config.generator) {
    std::vector<SurveyRecord> generated;
    auto events = GenerateScenario(config, &generated);
    if (probe) *probe = config.probe.empty() ? std::move(generated) : config.probe;
    return events;
  }
  std::vector<SimEvent> events = config.script;
  for (size_t i = 0; i < events.size(); ++i) events[i].seq = i;
  if (probe) {
    if (!config.probe.empty()) {
      *probe = config.probe;
    } else {
      // Latest enrolled record per subject, first-enrollment order.
      std::vector<SurveyRecord> records;
      std::map<std::string, size_t> index;
      for (const SimEvent& e : events) {
        if (e.kind != SimEventKind::kEnroll || !e.record) continue;
        auto [it, inserted] = index.emplace(e.record->subject_id, records.size());
        if (inserted) {
          records.push_back(*e.record);
        } else {
          records[it->second] = *e.record;
        }
      }
      *probe = std::move(records);
    }
  }
  return events;
}

SimReport RunSimulation(const SimConfig& config) {
  config.Validate();
  return Simulator(config).Run();
}

std::vector<std::string> TopFactors(const LearnedModel& model,
                                    const FeatureSchema& schema, size_t count) {
  std::vector<size_t> idx(model.coefficients.size());
  std::iota(idx.begin(), idx.end(), size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](size_t a, size_t b) {
    return std::abs(model.coefficients[a]) > std::abs(model.coefficients[b]);
  });
  std::vector<std::string> out;
  for (size_t i = 0; i < std::min(count, idx.size()); ++i) {
    out.push_back(schema.feature(idx[i]).id);
  }
  return out;
}

CentralRetrainResult CentralRetrain(const ServerStore& store,
                                    const FeatureSchema& schema,
                                    const RetrainOptions& options,
                                    const std::optional<LearnedModel>& previous) {
  using Key = std::pair<std::string, std::string>;
  std::map<Key, const IncidentLabel*> latest;
  for (const auto& stored : store.labels) {
    Key key{stored.label.subject_id, stored.agent_id};
    auto [it, inserted] = latest.emplace(key, &stored.label);
    if (!inserted && stored.label.observed_at >= it->second->observed_at) {
      it->second = &stored.label;
    }
  }
  std::vector<LabeledExample> examples;
  for (const auto& [key, label] : latest) {
    auto rec = store.records.find(key);
    if (rec == store.records.end()) continue;
    examples.push_back({Normalize(rec->second, schema),
                        label->outcome == Outcome::kTrafficked ? 1 : 0});
  }
  if (examples.empty()) {
    throw Error(ErrorCode::kEmptyTrainingSet, "server store holds no usable label");
  }
  const int64_t version = previous ? previous->version : 0;
  RetrainResult trained = Retrain(LearnedModel::Zero(schema.size(), version), examples, options);

  CentralRetrainResult result;
  result.model = std::move(trained.model);
  result.degenerate_single_class = trained.degenerate_single_class;
  result.critical_factors = TopFactors(result.model, schema);
  if (previous) {
    const std::vector<std::string> before = TopFactors(*previous, schema);
    const std::set<std::string> old_set(before.begin(), before.end());
    const std::set<std::string> new_set(result.critical_factors.begin(),
                                        result.critical_factors.end());
    for (const auto& f : result.critical_factors) {
      if (!old_set.contains(f)) result.gained.push_back(f);
    }
    for (const auto& f : before) {
      if (!new_set.contains(f)) result.lost.push_back(f);
    }
  }
  return result;
}

double ProbeDisagreement(std::span<const AgentState> agents,
                         std::span<const SurveyRecord> probe) {
  if (agents.size() < 2) {
    throw Error(ErrorCode::kInvalidArgument, "need at least two agents", "agents");
  }
  if (probe.empty()) throw Error(ErrorCode::kInvalidArgument, "empty probe", "probe");
  size_t differ = 0;
  size_t total = 0;
  std::vector<bool> cls(agents.size());
  for (const SurveyRecord& rec : probe) {
    for (size_t a = 0; a < agents.size(); ++a) {
      const AgentState& s = agents[a];
      cls[a] = ScoreBlended(Normalize(rec, s.schema()), s.heuristic(), s.learned(),
                            s.policy())
                   .vulnerable;
    }
    for (size_t i = 0; i < agents.size(); ++i) {
      for (size_t j = i + 1; j < agents.size(); ++j) {
        differ += cls[i] != cls[j] ? 1 : 0;
        ++total;
      }
    }
  }
  return static_cast<double>(differ) / static_cast<double>(total);
}

json SimReport::ToJson() const {
  json agents_json = json::array();
  for (const AgentSummary& a : agents) {
    agents_json.push_back({{"agent_id", a.agent_id},
                           {"model_digest", a.model_digest},
                           {"model", sentinel::ToJson(a.model)},
                           {"registry_size", a.registry_size},
                           {"labels", a.labels},
                           {"alerts",
                            {{"entered_danger_zone", a.danger_alerts},
                             {"locality_outlier", a.outlier_alerts}}}});
  }
  json analyses = json::array();
  for (const CohortSummary& s : cohort_analyses) analyses.push_back(SummaryToJson(s));
  return {{"seed", seed},
          {"agents", std::move(agents_json)},
          {"divergence", divergence},
          {"probe_size", probe_size},
          {"probe_disagreement", probe_disagreement},
          {"server", {{"records", server_records}, {"labels", server_labels}}},
          {"cohort_analyses", std::move(analyses)},
          {"events", trace.size()}};
}

std::string SimReport::TraceJsonl() const {
  std::string out;
  for (const json& line : trace) {
    out += line.dump();
    out += '\n';
  }
  return out;
}

std::string SimReport::DivergenceCsv() const {
  std::string out = "agent_id";
  for (const AgentSummary& a : agents) out += "," + a.agent_id;
  out += '\n';
  for (size_t i = 0; i < divergence.size(); ++i) {
    out += agents[i].agent_id;
    for (double d : divergence[i]) out += fmt::format(",{}", d);
    out += '\n';
  }
  return out;
}

json ToJson(const SimEvent& event) {
  json out = {{"seq", event.seq}, {"time", event.time},
              {"kind", SimEventKindName(event.kind)}};
  if (event.agent) out["agent_id"] = AgentId(*event.agent);
  if (event.record) out["record"] = RecordToJson(*event.record);
  if (event.label) out["label"] = LabelToJson(*event.label);
  return out;
}

SimEvent SimEventFromJson(const json& doc) {
  if (!doc.is_object()) {
    throw Error(ErrorCode::kScenarioError, "event is not a JSON object");
  }
  SimEvent e;
  try {
    e.time = doc.at("time").get<int64_t>();
    e.kind = ParseKind(doc.at("kind").get<std::string>());
    if (doc.contains("agent_id")) e.agent = ParseAgentId(doc.at("agent_id").get<std::string>());
    if (doc.contains("record")) e.record = RecordFromJson(doc.at("record"));
    if (doc.contains("label")) e.label = LabelFromJson(doc.at("label"));
  } catch (const json::exception& ex) {
    throw Error(ErrorCode::kScenarioError, fmt::format("malformed event: {}", ex.what()));
  }
  return e;
}

std::vector<SimEvent> ParseScenarioJsonl(std::string_view text) {
  std::vector<SimEvent> events;
  std::istringstream in{std::string(text)};
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      SimEvent e = SimEventFromJson(json::parse(line));
      e.seq = events.size();
      events.push_back(std::move(e));
    } catch (const json::exception& ex) {
      throw Error(ErrorCode::kScenarioError,
                  fmt::format("event {} (line {}): {}", events.size(), line_no, ex.what()),
                  fmt::format("event {}", events.size()));
    } catch (const Error& ex) {
      throw Error(ErrorCode::kScenarioError,
                  fmt::format("event {} (line {}): {}", events.size(), line_no, ex.what()),
                  fmt::format("event {}", events.size()));
    }
  }
  return events;
}

std::string ScenarioJsonl(std::span<const SimEvent> events) {
  std::string out;
  for (const SimEvent& e : events) {
    out += ToJson(e).dump();
    out += '\n';
  }
  return out;
}

SimConfig SimConfigFromJson(const json& doc, const std::string& base_dir) {
  if (!doc.is_object()) throw Error(ErrorCode::kBadConfig, "config is not a JSON object");
  SimConfig config;
  try {
    config.n_agents = doc.value("n_agents", config.n_agents);
    config.seed = doc.value("seed", config.seed);
    config.sync_period = doc.value("sync_period", config.sync_period);
    config.push_global_model = doc.value("push_global_model", config.push_global_model);
    if (doc.contains("schema")) config.schema = SchemaFromJson(doc.at("schema"));
    if (doc.contains("schema_file")) {
      config.schema = LoadSchemaFile(std::filesystem::path(base_dir) /
                                     doc.at("schema_file").get<std::string>());
    }
    if (doc.contains("engine")) config.engine = EngineConfigFromJson(doc.at("engine"));
    if (doc.contains("models")) {
      config.models = ModelBundleFromJson(doc.at("models"), config.schema.size());
    }
    if (doc.contains("probe")) {
      for (const json& r : doc.at("probe")) config.probe.push_back(RecordFromJson(r));
    }
    const json scenario = doc.value("scenario", json::object());
    if (scenario.contains("events")) {
      for (const json& e : scenario.at("events")) {
        SimEvent ev = SimEventFromJson(e);
        ev.seq = config.script.size();
        config.script.push_back(std::move(ev));
      }
    }
    if (scenario.contains("script_file")) {
      const auto path =
          std::filesystem::path(base_dir) / scenario.at("script_file").get<std::string>();
      config.script = ParseScenarioJsonl(ReadFile(path));
    }
    if (scenario.contains("generator")) {
      const json& g = scenario.at("generator");
      ScenarioGenerator gen;
      gen.records_per_agent = g.value("records_per_agent", gen.records_per_agent);
      gen.incidents_per_agent = g.value("incidents_per_agent", gen.incidents_per_agent);
      gen.horizon = g.value("horizon", gen.horizon);
      gen.risk_gain = g.value("risk_gain", gen.risk_gain);
      gen.risk_bias = g.value("risk_bias", gen.risk_bias);
      gen.local_variation = g.value("local_variation", gen.local_variation);
      gen.probe_size = g.value("probe_size", gen.probe_size);
      gen.cohort_analysis_every = g.value("cohort_analysis_every", gen.cohort_analysis_every);
      if (g.contains("cohort")) gen.cohort = GenConfigFromJson(g.at("cohort"), config.schema);
      config.generator = std::move(gen);
    }
  } catch (const json::exception& ex) {
    throw Error(ErrorCode::kBadConfig, fmt::format("malformed simulation config: {}", ex.what()));
  }
  config.Validate();
  return config;
}

}  // namespace sentinel
