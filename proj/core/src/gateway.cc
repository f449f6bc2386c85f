#include "sentinel/gateway.h"

#include <algorithm>
#include <cstdlib>
#include <set>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "sentinel/analytics.h"
#include "sentinel/io.h"
#include "sentinel/linalg.h"

namespace sentinel {
namespace {

using nlohmann::json;

constexpr size_t kDefaultClusters = 7;
constexpr size_t kDefaultPeers = 5;

json DeviationToJson(const DeviationReport& report) {
  json flagged = json::array();
  for (const FeatureDeviation& d : report.flagged) {
    flagged.push_back({{"feature_id", d.feature_id},
                       {"value", d.value},
                       {"locality_mean", d.locality_mean},
                       {"locality_stddev", d.locality_stddev},
                       {"deviation", d.deviation}});
  }
  return {{"insufficient_context", report.insufficient_context}, {"flagged", flagged}};
}

json AlertsToJson(const std::vector<AlertEvent>& alerts) {
  json out = json::array();
  for (const AlertEvent& a : alerts) out.push_back(ToJson(a));
  return out;
}

std::string RequiredString(const json& payload, const char* key) {
  if (!payload.contains(key) || !payload.at(key).is_string()) {
    throw Error(ErrorCode::kInvalidArgument, fmt::format("'{}' must be a string", key),
                key);
  }
  return payload.at(key).get<std::string>();
}

// Non-negative integer field with a default.
int64_t OptionalCount(const json& payload, const char* key, int64_t fallback) {
  if (!payload.contains(key) || payload.at(key).is_null()) return fallback;
  const json& v = payload.at(key);
  if (!v.is_number_integer() || v.get<int64_t>() < 0) {
    throw Error(ErrorCode::kInvalidArgument,
                fmt::format("'{}' must be a non-negative integer", key), key);
  }
  return v.get<int64_t>();
}

// Converts parse failures of a payload into InvalidArgument errors.
template <typename F>
auto ParsePayload(const char* what, F&& parse) -> decltype(parse()) {
  try {
    return parse();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kInvalidArgument, fmt::format("malformed {}: {}", what, e.what()),
                what);
  }
}

json ClusterView(const AgentState& state, const json& payload) {
  std::vector<SurveyRecord> records;
  for (const auto& [id, r] : state.registry()) records.push_back(r);
  if (records.size() < 2) {
    throw Error(ErrorCode::kInsufficientData,
                fmt::format("cluster view needs at least 2 subjects, registry has {}",
                            records.size()));
  }
  const Matrix data = Matrix::FromRows(NormalizeAll(records, state.schema()));
  const PcaResult pca = Pca(data);
  const size_t dims = static_cast<size_t>(
      OptionalCount(payload, "dims", static_cast<int64_t>(std::min<size_t>(2, pca.dims()))));
  if (dims < 1 || dims > pca.dims()) {
    throw Error(ErrorCode::kInvalidArgument,
                fmt::format("dims must lie in [1, {}]", pca.dims()), "dims");
  }
  const size_t k = static_cast<size_t>(OptionalCount(
      payload, "k", static_cast<int64_t>(std::min(kDefaultClusters, records.size()))));
  const Matrix scores = Project(data, pca, dims);
  const ClusterTree tree = WardCluster(scores);
  const std::vector<int> labels = CutTree(tree, k);

  json points = json::array();
  for (size_t i = 0; i < records.size(); ++i) {
    const auto row = scores.row(i);
    points.push_back({{"subject_id", records[i].subject_id},
                      {"coords", std::vector<double>(row.begin(), row.end())},
                      {"cluster", labels[i]}});
  }
  std::vector<double> evr(pca.explained_variance_ratio.begin(),
                          pca.explained_variance_ratio.begin() + dims);
  return {{"k", k},
          {"dims", dims},
          {"explained_variance_ratio", evr},
          {"degenerate", pca.degenerate},
          {"points", points}};
}

json SimilarityView(const AgentState& state, const json& payload) {
  std::vector<SurveyRecord> records;
  for (const auto& [id, r] : state.registry()) records.push_back(r);
  const SimilarityStats stats = ComputeSimilarityStats(records, state.schema());
  double tau = 0.70;
  if (payload.contains("tau")) {
    if (!payload.at("tau").is_number()) {
      throw Error(ErrorCode::kInvalidArgument, "'tau' must be a number", "tau");
    }
    tau = payload.at("tau").get<double>();
  }
  json bins = json::array();
  for (int i = 0; i < SimilarityStats::kBins; ++i) {
    bins.push_back({{"low", i * SimilarityStats::kBinWidth},
                    {"high", (i + 1) * SimilarityStats::kBinWidth},
                    {"count", stats.pair_histogram[i]}});
  }
  return {{"record_count", stats.record_count},
          {"pair_count", stats.pair_count()},
          {"histogram", bins},
          {"duplicate_partner_fraction", stats.duplicate_partner_fraction},
          {"tau", tau},
          {"low_similarity_pair_fraction", stats.LowSimilarityPairFraction(tau)}};
}

}  // namespace

json ApiResponse::ToJson() const {
  json out = {{"request_id", request_id}, {"ok", ok}, {"result", result}};
  if (error) {
    out["error"] = {{"code", ErrorCodeName(error->code)},
                    {"message", error->message},
                    {"field", error->field}};
  } else {
    out["error"] = nullptr;
  }
  return out;
}

ApiRequest ApiRequestFromJson(const json& doc) {
  if (!doc.is_object()) {
    throw Error(ErrorCode::kInvalidArgument, "request is not a JSON object");
  }
  ApiRequest r;
  r.request_id = doc.value("request_id", std::string());
  r.agent_id = doc.value("agent_id", std::string());
  r.operation = doc.value("operation", std::string());
  if (doc.contains("payload")) r.payload = doc.at("payload");
  return r;
}

int HttpStatusFor(const ApiResponse& response) {
  if (response.ok || !response.error) return 200;
  switch (response.error->code) {
    case ErrorCode::kUnknownSubject:
    case ErrorCode::kUnknownAgent:
      return 404;
    case ErrorCode::kConflict:
      return 409;
    case ErrorCode::kIo:
    case ErrorCode::kStorage:
      return 500;
    case ErrorCode::kSchemaMismatch:
    case ErrorCode::kRangeViolation:
    case ErrorCode::kInsufficientData:
    case ErrorCode::kBadK:
    case ErrorCode::kEmptyTrainingSet:
    case ErrorCode::kCorruptSnapshot:
      return 422;
    default:
      return 400;
  }
}

GatewayConfig GatewayConfig::FromEnvironment() {
  GatewayConfig config;
  if (const char* dir = std::getenv("SENTINEL_DATA_DIR"); dir && *dir) {
    config.data_dir = dir;
  }
  return config;
}

void ValidateAgentId(const std::string& agent_id) {
  const bool ok = !agent_id.empty() && agent_id.size() <= 64 && agent_id.front() != '.' &&
                  std::all_of(agent_id.begin(), agent_id.end(), [](unsigned char c) {
                    return std::isalnum(c) || c == '_' || c == '-' || c == '.';
                  });
  if (!ok) {
    throw Error(ErrorCode::kInvalidArgument,
                fmt::format("invalid agent id '{}'", agent_id), "agent_id");
  }
}

Gateway::Gateway(GatewayConfig config)
    : config_(std::move(config)),
      models_(config_.models ? *config_.models
                             : ModelBundle::Defaults(config_.schema.size())) {
  if (!config_.writer) {
    config_.writer = [](const std::filesystem::path& path, std::string_view contents) {
      WriteFileAtomic(path, std::string(contents));
    };
  }
  std::error_code ec;
  std::filesystem::create_directories(config_.data_dir / "agents", ec);
  if (ec) {
    throw Error(ErrorCode::kStorage,
                fmt::format("cannot create data directory {}: {}",
                            config_.data_dir.string(), ec.message()));
  }
}

std::filesystem::path Gateway::SnapshotPath(const std::string& agent_id) const {
  return config_.data_dir / "agents" / (agent_id + ".snapshot.json");
}

ApiResponse Gateway::Handle(const ApiRequest& request) {
  ApiResponse response;
  response.request_id = request.request_id;
  try {
    response.result = Dispatch(request);
    response.ok = true;
  } catch (const Error& e) {
    response.error = ApiError{e.code(), e.what(), e.field()};
  } catch (const json::exception& e) {
    response.error = ApiError{ErrorCode::kInvalidArgument, e.what(), "payload"};
  }
  return response;
}

json Gateway::Dispatch(const ApiRequest& request) {
  const std::string& op = request.operation;
  const json& payload = request.payload;
  if (!payload.is_object()) {
    throw Error(ErrorCode::kInvalidArgument, "payload must be a JSON object", "payload");
  }
  if (op == "schema") return SchemaToJson(config_.schema);
  if (op == "list_agents") return {{"agents", AgentIds()}};

  static const std::set<std::string> kAgentOperations = {
      "enroll",       "report_incident", "restore",          "get_prediction",
      "list_alerts",  "safety_peers",    "cluster_view",     "similarity_stats",
      "snapshot"};
  if (!kAgentOperations.contains(op)) {
    throw Error(ErrorCode::kInvalidArgument, fmt::format("unknown operation '{}'", op),
                "operation");
  }
  ValidateAgentId(request.agent_id);
  const std::string& agent = request.agent_id;

  if (op == "enroll") {
    const SurveyRecord record =
        ParsePayload("record", [&] { return RecordFromJson(payload); });
    return Mutate(agent, /*create=*/true, [&](AgentState& state) {
      EnrollResult r = state.Enroll(record);
      return json{{"prediction", ToJson(r.prediction)},
                  {"outlier_alert", r.outlier_alert ? ToJson(*r.outlier_alert) : json()},
                  {"deviation", DeviationToJson(r.deviation)},
                  {"registry_changed", r.registry_changed}};
    });
  }
  if (op == "report_incident") {
    const IncidentLabel label =
        ParsePayload("label", [&] { return LabelFromJson(payload); });
    return Mutate(agent, false, [&](AgentState& state) {
      IncidentResult r = state.ReportIncident(label);
      return json{{"alerts", AlertsToJson(r.alerts)},
                  {"downgraded", r.downgraded},
                  {"retrained", r.retrained},
                  {"degenerate_single_class", r.degenerate_single_class},
                  {"model_version", state.learned().version}};
    });
  }
  if (op == "restore") {
    if (!payload.contains("snapshot")) {
      throw Error(ErrorCode::kInvalidArgument, "missing 'snapshot'", "snapshot");
    }
    const json& snap = payload.at("snapshot");
    AgentState restored =
        RestoreFromText(snap.is_string() ? snap.get<std::string>() : snap.dump());
    if (restored.agent_id() != agent) {
      throw Error(ErrorCode::kInvalidArgument,
                  fmt::format("snapshot belongs to agent '{}'", restored.agent_id()),
                  "agent_id");
    }
    return Mutate(agent, true, [&](AgentState& state) {
      state = restored;
      return json{{"digest", TakeSnapshot(state).digest},
                  {"registry_size", state.registry().size()}};
    });
  }

  const std::shared_ptr<const AgentState> state = Committed(agent);
  if (op == "get_prediction") {
    return ToJson(state->PredictionFor(RequiredString(payload, "subject_id")));
  }
  if (op == "list_alerts") {
    const int64_t since = OptionalCount(payload, "since", 0);
    const std::vector<AlertEvent> alerts = state->AlertsSince(since);
    return {{"alerts", AlertsToJson(alerts)},
            {"cursor", alerts.empty() ? since : alerts.back().alert_id}};
  }
  if (op == "safety_peers") {
    const std::string subject = RequiredString(payload, "subject_id");
    const auto top = static_cast<size_t>(
        OptionalCount(payload, "top", static_cast<int64_t>(kDefaultPeers)));
    json peers = json::array();
    for (const auto& [id, sim] : state->SafetyPeers(subject, top)) {
      peers.push_back({{"subject_id", id}, {"similarity", sim}});
    }
    return {{"subject_id", subject}, {"peers", peers}};
  }
  if (op == "cluster_view") return ClusterView(*state, payload);
  if (op == "similarity_stats") return SimilarityView(*state, payload);
  if (op == "snapshot") {
    const AgentSnapshot snap = TakeSnapshot(*state);
    return {{"digest", snap.digest}, {"snapshot", json::parse(snap.Serialize())}};
  }
  throw Error(ErrorCode::kInvalidArgument, fmt::format("unknown operation '{}'", op),
              "operation");
}

json Gateway::Mutate(const std::string& agent_id, bool create,
                     const std::function<json(AgentState&)>& apply) {
  Slot& slot = SlotFor(agent_id, create);
  std::lock_guard writer(slot.writer);
  std::shared_ptr<const AgentState> current;
  {
    std::shared_lock read(slot.guard);
    current = slot.state;
  }
  if (!current) {
    // A slot created by a failed first enrollment holds no state yet.
    if (!create) {
      throw Error(ErrorCode::kUnknownAgent, fmt::format("unknown agent '{}'", agent_id),
                  "agent_id");
    }
    current = std::make_shared<const AgentState>(agent_id, config_.schema, models_,
                                                 config_.engine);
  }
  auto next = std::make_shared<AgentState>(*current);
  json result = apply(*next);
  Persist(*next);
  {
    std::unique_lock write(slot.guard);
    slot.state = std::move(next);
  }
  return result;
}

std::shared_ptr<const AgentState> Gateway::Committed(const std::string& agent_id) {
  Slot& slot = SlotFor(agent_id, false);
  std::shared_lock read(slot.guard);
  if (!slot.state) {
    throw Error(ErrorCode::kUnknownAgent, fmt::format("unknown agent '{}'", agent_id),
                "agent_id");
  }
  return slot.state;
}

Gateway::Slot& Gateway::SlotFor(const std::string& agent_id, bool create) {
  std::lock_guard lock(slots_mu_);
  auto it = slots_.find(agent_id);
  if (it != slots_.end()) return *it->second;
  std::shared_ptr<const AgentState> loaded = LoadOrCreate(agent_id, create);
  auto slot = std::make_unique<Slot>();
  slot->state = std::move(loaded);
  Slot& ref = *slot;
  slots_.emplace(agent_id, std::move(slot));
  return ref;
}

std::shared_ptr<const AgentState> Gateway::LoadOrCreate(const std::string& agent_id,
                                                        bool create) const {
  const std::filesystem::path path = SnapshotPath(agent_id);
  if (std::filesystem::exists(path)) {
    AgentState state = RestoreFromText(ReadFile(path));
    if (state.agent_id() != agent_id) {
      throw Error(ErrorCode::kCorruptSnapshot,
                  fmt::format("{} holds agent '{}'", path.string(), state.agent_id()),
                  "/payload/agent_id");
    }
    spdlog::info("loaded agent '{}' from {}", agent_id, path.string());
    return std::make_shared<const AgentState>(std::move(state));
  }
  if (!create) {
    throw Error(ErrorCode::kUnknownAgent, fmt::format("unknown agent '{}'", agent_id),
                "agent_id");
  }
  // Created lazily by the first successful mutation.
  return nullptr;
}

void Gateway::Persist(const AgentState& state) const {
  const std::string text = TakeSnapshot(state).Serialize();
  try {
    config_.writer(SnapshotPath(state.agent_id()), text);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kStorage) throw;
    throw Error(ErrorCode::kStorage, e.what());
  } catch (const std::exception& e) {
    throw Error(ErrorCode::kStorage,
                fmt::format("persisting agent '{}' failed: {}", state.agent_id(), e.what()));
  }
}

std::vector<std::string> Gateway::AgentIds() const {
  std::vector<std::string> ids;
  {
    std::lock_guard lock(slots_mu_);
    for (const auto& [id, slot] : slots_) {
      std::shared_lock read(slot->guard);
      if (slot->state) ids.push_back(id);
    }
  }
  std::error_code ec;
  for (const auto& entry :
       std::filesystem::directory_iterator(config_.data_dir / "agents", ec)) {
    const std::string name = entry.path().filename().string();
    constexpr std::string_view kSuffix = ".snapshot.json";
    if (name.size() > kSuffix.size() && name.ends_with(kSuffix)) {
      ids.push_back(name.substr(0, name.size() - kSuffix.size()));
    }
  }
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return ids;
}

}  // namespace sentinel
