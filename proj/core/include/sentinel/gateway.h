#ifndef SENTINEL_GATEWAY_H_
#define SENTINEL_GATEWAY_H_

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "sentinel/engine.h"
#include "sentinel/error.h"

namespace sentinel {

struct ApiRequest {
  std::string request_id;
  std::string agent_id;
  std::string operation;
  nlohmann::json payload = nlohmann::json::object();
};

struct ApiError {
  ErrorCode code = ErrorCode::kInvalidArgument;
  std::string message;
  std::string field;
};

struct ApiResponse {
  std::string request_id;
  bool ok = false;
  nlohmann::json result;  // null on error
  std::optional<ApiError> error;

  nlohmann::json ToJson() const;
};

ApiRequest ApiRequestFromJson(const nlohmann::json& doc);
// HTTP status used for an error code (200 for success).
int HttpStatusFor(const ApiResponse& response);

// Writes `contents` to `path` so that a crash leaves either the old or the
// new file. Must throw on failure.
using SnapshotWriter =
    std::function<void(const std::filesystem::path& path, std::string_view contents)>;

struct GatewayConfig {
  std::filesystem::path data_dir = "sentinel-data";
  FeatureSchema schema = FeatureSchema::Default();
  std::optional<ModelBundle> models;  // defaults to ModelBundle::Defaults
  EngineConfig engine;
  SnapshotWriter writer;              // defaults to WriteFileAtomic

  // data_dir from SENTINEL_DATA_DIR when set.
  static GatewayConfig FromEnvironment();
};

// Transport-free service core. Operations:
//   enroll            payload: survey record
//   report_incident   payload: {subject_id, outcome, observed_at}
//   get_prediction    payload: {subject_id}
//   list_alerts       payload: {since?}
//   safety_peers      payload: {subject_id, top?}
//   cluster_view      payload: {k?, dims?}
//   similarity_stats  payload: {tau?}
//   snapshot          payload: {}
//   restore           payload: {snapshot}
//   schema            (no agent)
//   list_agents       (no agent)
// Mutations for one agent are serialized; each is applied to a copy of the
// committed state, persisted, and only then committed and acknowledged.
class Gateway {
 public:
  explicit Gateway(GatewayConfig config);

  ApiResponse Handle(const ApiRequest& request);

  const GatewayConfig& config() const { return config_; }
  std::filesystem::path SnapshotPath(const std::string& agent_id) const;

 private:
  struct Slot {
    std::mutex writer;               // serializes mutations
    mutable std::shared_mutex guard; // protects `state`
    std::shared_ptr<const AgentState> state;
  };

  nlohmann::json Dispatch(const ApiRequest& request);
  nlohmann::json Mutate(const std::string& agent_id, bool create,
                        const std::function<nlohmann::json(AgentState&)>& apply);
  std::shared_ptr<const AgentState> Committed(const std::string& agent_id);
  Slot& SlotFor(const std::string& agent_id, bool create);
  std::shared_ptr<const AgentState> LoadOrCreate(const std::string& agent_id,
                                                 bool create) const;
  void Persist(const AgentState& state) const;
  std::vector<std::string> AgentIds() const;

  GatewayConfig config_;
  ModelBundle models_;
  mutable std::mutex slots_mu_;
  std::map<std::string, std::unique_ptr<Slot>> slots_;
};

// Throws Error(kInvalidArgument, "agent_id") unless the id is 1-64 characters
// of [A-Za-z0-9_.-] not starting with '.'.
void ValidateAgentId(const std::string& agent_id);

}  // namespace sentinel

#endif  // SENTINEL_GATEWAY_H_
