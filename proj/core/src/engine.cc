#include "sentinel/engine.h"

#include <algorithm>
#include <set>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "sentinel/digest.h"
#include "sentinel/error.h"
#include "sentinel/io.h"

namespace sentinel {
namespace {

using nlohmann::json;

constexpr const char* kSnapshotFormat = "sentinel-agent-snapshot";

AlertKind ParseAlertKind(const std::string& text) {
  if (text == "ENTERED_DANGER_ZONE") return AlertKind::kEnteredDangerZone;
  if (text == "LOCALITY_OUTLIER") return AlertKind::kLocalityOutlier;
  throw Error(ErrorCode::kInvalidArgument, fmt::format("unknown alert kind '{}'", text),
              "kind");
}

[[noreturn]] void Corrupt(const std::string& path, const std::string& why) {
  throw Error(ErrorCode::kCorruptSnapshot,
              fmt::format("corrupt snapshot at {}: {}", path, why), path);
}

// Runs `parse` and reports any failure as corruption at `path`.
template <typename F>
auto AtPath(const std::string& path, F&& parse) -> decltype(parse()) {
  try {
    return parse();
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kCorruptSnapshot) throw;
    Corrupt(path, e.what());
  } catch (const json::exception& e) {
    Corrupt(path, e.what());
  }
}

}  // namespace

std::string AlertKindName(AlertKind kind) {
  return kind == AlertKind::kEnteredDangerZone ? "ENTERED_DANGER_ZONE"
                                               : "LOCALITY_OUTLIER";
}

AgentState::AgentState(std::string agent_id, FeatureSchema schema,
                       ModelBundle models, EngineConfig config)
    : agent_id_(std::move(agent_id)),
      schema_(std::move(schema)),
      models_(std::move(models)),
      config_(config) {
  models_.heuristic.Validate();
  models_.policy.Validate();
  if (models_.heuristic.weights.size() != schema_.size() ||
      models_.learned.coefficients.size() != schema_.size()) {
    throw Error(ErrorCode::kDimensionMismatch,
                fmt::format("agent '{}': models do not match the {}-feature schema",
                            agent_id_, schema_.size()));
  }
}

Prediction AgentState::Score(const SurveyRecord& record) const {
  Prediction p = ScoreBlended(Normalize(record, schema_), models_.heuristic,
                              models_.learned, models_.policy);
  p.subject_id = record.subject_id;
  return p;
}

EnrollResult AgentState::Enroll(const SurveyRecord& record) {
  Normalize(record, schema_);  // validates

  EnrollResult result;
  auto existing = registry_.find(record.subject_id);
  if (existing != registry_.end() &&
      (existing->second == record ||
       existing->second.collected_at > record.collected_at)) {
    result.prediction = cache_.at(record.subject_id);
    return result;
  }

  std::vector<SurveyRecord> locality;
  for (const auto& [id, r] : registry_) {
    if (id != record.subject_id && r.locality_id == record.locality_id) {
      locality.push_back(r);
    }
  }
  result.deviation = LocalityOutlierCheck(record, locality, schema_);

  registry_[record.subject_id] = record;
  result.prediction = Score(record);
  cache_[record.subject_id] = result.prediction;
  result.registry_changed = true;

  if (result.deviation.has_flags()) {
    AlertEvent alert;
    alert.alert_id = NextAlertId();
    alert.kind = AlertKind::kLocalityOutlier;
    alert.subject_id = record.subject_id;
    alert.detail = result.deviation.flagged;
    alert.model_version = models_.learned.version;
    alert.timestamp = record.collected_at;
    alerts_.push_back(alert);
    result.outlier_alert = std::move(alert);
  }
  return result;
}

IncidentResult AgentState::ReportIncident(const IncidentLabel& label) {
  if (!registry_.contains(label.subject_id)) {
    throw Error(ErrorCode::kUnknownSubject,
                fmt::format("subject '{}' is not registered with agent '{}'",
                            label.subject_id, agent_id_),
                "subject_id");
  }
  for (const IncidentLabel& l : labels_) {
    if (l.subject_id == label.subject_id && l.observed_at == label.observed_at) {
      if (l.outcome == label.outcome) return {};
      throw Error(ErrorCode::kConflict,
                  fmt::format("subject '{}' already has a different outcome at {}",
                              label.subject_id, label.observed_at),
                  "outcome");
    }
  }
  labels_.push_back(label);

  if (config_.min_retrain_interval > 0 && last_retrain_at_ &&
      label.observed_at - *last_retrain_at_ < config_.min_retrain_interval) {
    retrain_pending_ = true;
    return {};
  }
  return RetrainAndDiff(label.observed_at);
}

IncidentResult AgentState::RetrainNow(int64_t timestamp) {
  if (labels_.empty()) return {};
  return RetrainAndDiff(timestamp);
}

std::vector<LabeledExample> AgentState::TrainingSet() const {
  // Latest label per subject wins.
  std::map<std::string, const IncidentLabel*> latest;
  for (const IncidentLabel& l : labels_) {
    auto [it, inserted] = latest.emplace(l.subject_id, &l);
    if (!inserted && l.observed_at > it->second->observed_at) it->second = &l;
  }
  std::vector<LabeledExample> examples;
  examples.reserve(latest.size());
  for (const auto& [subject, label] : latest) {
    auto rec = registry_.find(subject);
    if (rec == registry_.end()) continue;
    examples.push_back({Normalize(rec->second, schema_),
                        label->outcome == Outcome::kTrafficked ? 1 : 0});
  }
  return examples;
}

IncidentResult AgentState::RetrainAndDiff(int64_t timestamp) {
  IncidentResult result;
  const std::vector<LabeledExample> examples = TrainingSet();
  // Each retrain starts from zero coefficients so the model is a function
  // of the current labeled set alone.
  RetrainResult trained =
      Retrain(LearnedModel::Zero(schema_.size(), models_.learned.version),
              examples, config_.retrain);
  models_.learned = std::move(trained.model);
  result.retrained = true;
  result.degenerate_single_class = trained.degenerate_single_class;
  last_retrain_at_ = timestamp;
  retrain_pending_ = false;
  RescoreAndDiff(timestamp, result);
  return result;
}

IncidentResult AgentState::InstallModel(const LearnedModel& model,
                                        int64_t timestamp) {
  if (model.coefficients.size() != schema_.size()) {
    throw Error(ErrorCode::kDimensionMismatch,
                fmt::format("installed model has {} coefficients, schema has {}",
                            model.coefficients.size(), schema_.size()));
  }
  IncidentResult result;
  const int64_t version = models_.learned.version + 1;
  models_.learned = model;
  models_.learned.version = version;
  RescoreAndDiff(timestamp, result);
  return result;
}

void AgentState::RescoreAndDiff(int64_t timestamp, IncidentResult& result) {
  std::map<std::string, Prediction> next;
  for (const auto& [id, record] : registry_) next.emplace(id, Score(record));

  for (const auto& [id, after] : next) {
    const Prediction& before = cache_.at(id);
    if (!before.vulnerable && after.vulnerable) {
      AlertEvent alert;
      alert.alert_id = NextAlertId();
      alert.kind = AlertKind::kEnteredDangerZone;
      alert.subject_id = id;
      alert.model_version = models_.learned.version;
      alert.timestamp = timestamp;
      alerts_.push_back(alert);
      result.alerts.push_back(std::move(alert));
    } else if (before.vulnerable && !after.vulnerable) {
      result.downgraded.push_back(id);
      spdlog::info("agent {}: subject {} left the danger zone (score {:.4f} -> {:.4f}, "
                   "model v{})",
                   agent_id_, id, before.score, after.score, after.model_version);
    }
  }
  cache_ = std::move(next);
}

std::vector<std::pair<std::string, double>> AgentState::SafetyPeers(
    const std::string& subject_id, size_t top_m) const {
  auto self = registry_.find(subject_id);
  if (self == registry_.end()) {
    throw Error(ErrorCode::kUnknownSubject,
                fmt::format("subject '{}' is not registered", subject_id),
                "subject_id");
  }
  if (top_m == 0) {
    throw Error(ErrorCode::kInvalidArgument, "top_m must be positive", "top_m");
  }
  std::vector<std::pair<std::string, double>> peers;
  for (const auto& [id, r] : registry_) {
    if (id == subject_id || r.locality_id != self->second.locality_id) continue;
    peers.emplace_back(id, Similarity(self->second, r, schema_));
  }
  std::stable_sort(peers.begin(), peers.end(), [](const auto& a, const auto& b) {
    return a.second > b.second;
  });  // registry order already sorts ties by subject id
  if (peers.size() > top_m) peers.resize(top_m);
  return peers;
}

const Prediction& AgentState::PredictionFor(const std::string& subject_id) const {
  auto it = cache_.find(subject_id);
  if (it == cache_.end()) {
    throw Error(ErrorCode::kUnknownSubject,
                fmt::format("subject '{}' is not registered", subject_id),
                "subject_id");
  }
  return it->second;
}

std::vector<AlertEvent> AgentState::AlertsSince(int64_t cursor) const {
  auto first = std::upper_bound(
      alerts_.begin(), alerts_.end(), cursor,
      [](int64_t c, const AlertEvent& a) { return c < a.alert_id; });
  return {first, alerts_.end()};
}

bool AgentState::operator==(const AgentState& other) const {
  return ToJson() == other.ToJson();
}

json AgentState::ToJson() const {
  json registry = json::array();
  for (const auto& [id, r] : registry_) registry.push_back(RecordToJson(r));
  json labels = json::array();
  for (const IncidentLabel& l : labels_) labels.push_back(LabelToJson(l));
  json predictions = json::array();
  for (const auto& [id, p] : cache_) predictions.push_back(sentinel::ToJson(p));
  json alerts = json::array();
  for (const AlertEvent& a : alerts_) alerts.push_back(sentinel::ToJson(a));
  return {{"agent_id", agent_id_},
          {"schema", SchemaToJson(schema_)},
          {"config", sentinel::ToJson(config_)},
          {"models", sentinel::ToJson(models_)},
          {"registry", registry},
          {"labels", labels},
          {"predictions", predictions},
          {"alerts", alerts},
          {"next_alert_id", next_alert_id_},
          {"last_retrain_at",
           last_retrain_at_ ? json(*last_retrain_at_) : json(nullptr)},
          {"retrain_pending", retrain_pending_}};
}

AgentState AgentState::FromJson(const json& payload) {
  if (!payload.is_object()) Corrupt("/payload", "not an object");
  const std::string agent_id = AtPath("/payload/agent_id", [&] {
    return payload.at("agent_id").get<std::string>();
  });
  FeatureSchema schema =
      AtPath("/payload/schema", [&] { return SchemaFromJson(payload.at("schema")); });
  EngineConfig config = AtPath("/payload/config", [&] {
    return EngineConfigFromJson(payload.at("config"));
  });
  ModelBundle models = AtPath("/payload/models", [&] {
    return ModelBundleFromJson(payload.at("models"), schema.size());
  });
  AgentState state = AtPath("/payload", [&] {
    return AgentState(agent_id, schema, models, config);
  });

  const json& registry = AtPath("/payload/registry", [&]() -> const json& {
    const json& r = payload.at("registry");
    if (!r.is_array()) throw Error(ErrorCode::kInvalidArgument, "not an array");
    return r;
  });
  for (size_t i = 0; i < registry.size(); ++i) {
    const std::string path = fmt::format("/payload/registry/{}", i);
    SurveyRecord r = AtPath(path, [&] { return RecordFromJson(registry[i]); });
    AtPath(path + "/values", [&] { return Normalize(r, schema); });
    if (!state.registry_.emplace(r.subject_id, r).second) {
      Corrupt(path + "/subject_id", "duplicate subject");
    }
  }

  const json& labels = AtPath("/payload/labels", [&]() -> const json& {
    return payload.at("labels");
  });
  for (size_t i = 0; i < labels.size(); ++i) {
    const std::string path = fmt::format("/payload/labels/{}", i);
    IncidentLabel l = AtPath(path, [&] { return LabelFromJson(labels[i]); });
    if (!state.registry_.contains(l.subject_id)) {
      Corrupt(path + "/subject_id", "label for unregistered subject");
    }
    state.labels_.push_back(std::move(l));
  }

  const json& predictions = AtPath("/payload/predictions", [&]() -> const json& {
    return payload.at("predictions");
  });
  for (size_t i = 0; i < predictions.size(); ++i) {
    const std::string path = fmt::format("/payload/predictions/{}", i);
    Prediction p = AtPath(path, [&] { return PredictionFromJson(predictions[i]); });
    if (!state.registry_.contains(p.subject_id)) {
      Corrupt(path + "/subject_id", "prediction for unregistered subject");
    }
    state.cache_.emplace(p.subject_id, p);
  }
  if (state.cache_.size() != state.registry_.size()) {
    Corrupt("/payload/predictions", "prediction cache does not cover the registry");
  }

  const json& alerts = AtPath("/payload/alerts", [&]() -> const json& {
    return payload.at("alerts");
  });
  int64_t last_id = 0;
  for (size_t i = 0; i < alerts.size(); ++i) {
    const std::string path = fmt::format("/payload/alerts/{}", i);
    AlertEvent a = AtPath(path, [&] { return AlertFromJson(alerts[i]); });
    if (a.alert_id <= last_id) Corrupt(path + "/alert_id", "alert ids not increasing");
    last_id = a.alert_id;
    state.alerts_.push_back(std::move(a));
  }
  state.next_alert_id_ = AtPath("/payload/next_alert_id", [&] {
    return payload.at("next_alert_id").get<int64_t>();
  });
  if (state.next_alert_id_ <= last_id) {
    Corrupt("/payload/next_alert_id", "behind the alert log");
  }
  AtPath("/payload/last_retrain_at", [&] {
    const json& v = payload.at("last_retrain_at");
    if (!v.is_null()) state.last_retrain_at_ = v.get<int64_t>();
    return 0;
  });
  state.retrain_pending_ = AtPath("/payload/retrain_pending", [&] {
    return payload.at("retrain_pending").get<bool>();
  });
  return state;
}

json ToJson(const AlertEvent& alert) {
  json detail = json::array();
  for (const FeatureDeviation& d : alert.detail) {
    detail.push_back({{"feature_index", d.feature_index},
                      {"feature_id", d.feature_id},
                      {"value", d.value},
                      {"locality_mean", d.locality_mean},
                      {"locality_stddev", d.locality_stddev},
                      {"deviation", d.deviation}});
  }
  return {{"alert_id", alert.alert_id},
          {"kind", AlertKindName(alert.kind)},
          {"subject_id", alert.subject_id},
          {"detail", detail},
          {"model_version", alert.model_version},
          {"timestamp", alert.timestamp}};
}

AlertEvent AlertFromJson(const json& doc) {
  AlertEvent a;
  a.alert_id = doc.at("alert_id").get<int64_t>();
  a.kind = ParseAlertKind(doc.at("kind").get<std::string>());
  a.subject_id = doc.at("subject_id").get<std::string>();
  for (const json& d : doc.at("detail")) {
    FeatureDeviation dev;
    dev.feature_index = d.at("feature_index").get<size_t>();
    dev.feature_id = d.at("feature_id").get<std::string>();
    dev.value = d.at("value").get<double>();
    dev.locality_mean = d.at("locality_mean").get<double>();
    dev.locality_stddev = d.at("locality_stddev").get<double>();
    dev.deviation = d.at("deviation").get<double>();
    a.detail.push_back(std::move(dev));
  }
  a.model_version = doc.at("model_version").get<int64_t>();
  a.timestamp = doc.at("timestamp").get<int64_t>();
  return a;
}

json ToJson(const EngineConfig& config) {
  return {{"epochs", config.retrain.epochs},
          {"learning_rate", config.retrain.learning_rate},
          {"seed", config.retrain.seed},
          {"balance_classes", config.retrain.balance_classes},
          {"min_retrain_interval", config.min_retrain_interval}};
}

EngineConfig EngineConfigFromJson(const json& doc) {
  EngineConfig c;
  c.retrain.epochs = doc.value("epochs", c.retrain.epochs);
  c.retrain.learning_rate = doc.value("learning_rate", c.retrain.learning_rate);
  c.retrain.seed = doc.value("seed", c.retrain.seed);
  c.retrain.balance_classes = doc.value("balance_classes", c.retrain.balance_classes);
  c.min_retrain_interval = doc.value("min_retrain_interval", c.min_retrain_interval);
  if (c.retrain.epochs <= 0 || !(c.retrain.learning_rate > 0.0) ||
      c.min_retrain_interval < 0) {
    throw Error(ErrorCode::kBadConfig, "engine config out of range");
  }
  return c;
}

std::string AgentSnapshot::Serialize() const {
  json doc = {{"format", kSnapshotFormat},
              {"format_version", kFormatVersion},
              {"digest", digest},
              {"payload", payload}};
  return doc.dump() + "\n";
}

AgentSnapshot AgentSnapshot::Parse(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kCorruptSnapshot,
                fmt::format("snapshot is not valid JSON (byte {}): {}", e.byte, e.what()),
                fmt::format("byte {}", e.byte));
  }
  if (!doc.is_object()) Corrupt("/", "not an object");
  AtPath("/format", [&] {
    if (doc.at("format").get<std::string>() != kSnapshotFormat) {
      throw Error(ErrorCode::kInvalidArgument, "unexpected format tag");
    }
    return 0;
  });
  AtPath("/format_version", [&] {
    if (doc.at("format_version").get<int>() != kFormatVersion) {
      throw Error(ErrorCode::kInvalidArgument, "unsupported format version");
    }
    return 0;
  });
  AgentSnapshot snap;
  snap.digest = AtPath("/digest", [&] { return doc.at("digest").get<std::string>(); });
  snap.payload = AtPath("/payload", [&] { return doc.at("payload"); });
  if (Sha256Hex(snap.payload.dump()) != snap.digest) {
    Corrupt("/digest", "payload digest mismatch");
  }
  return snap;
}

AgentSnapshot TakeSnapshot(const AgentState& state) {
  AgentSnapshot snap;
  snap.payload = state.ToJson();
  snap.digest = Sha256Hex(snap.payload.dump());
  return snap;
}

AgentState Restore(const AgentSnapshot& snapshot) {
  if (Sha256Hex(snapshot.payload.dump()) != snapshot.digest) {
    Corrupt("/digest", "payload digest mismatch");
  }
  return AgentState::FromJson(snapshot.payload);
}

AgentState RestoreFromText(std::string_view text) {
  return Restore(AgentSnapshot::Parse(text));
}

std::string AlertLogJsonl(const std::vector<AlertEvent>& alerts) {
  std::string out;
  for (const AlertEvent& a : alerts) out += ToJson(a).dump() + "\n";
  return out;
}

}  // namespace sentinel
