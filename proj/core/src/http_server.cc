#include "sentinel/http_server.h"

#include <atomic>

#include <fmt/format.h>
#include <httplib.h>
#include <spdlog/spdlog.h>

namespace sentinel {
namespace {

using nlohmann::json;

constexpr const char* kJson = "application/json";

std::string RequestId(const httplib::Request& req) {
  static std::atomic<uint64_t> counter{0};
  if (req.has_header("X-Request-Id")) return req.get_header_value("X-Request-Id");
  return fmt::format("req-{}", ++counter);
}

void Reply(httplib::Response& res, const ApiResponse& response) {
  res.status = HttpStatusFor(response);
  res.set_header("X-Request-Id", response.request_id);
  res.set_content(response.ToJson().dump(), kJson);
}

void ReplyError(httplib::Response& res, const std::string& request_id, ErrorCode code,
                const std::string& message, const std::string& field) {
  ApiResponse response;
  response.request_id = request_id;
  response.error = ApiError{code, message, field};
  Reply(res, response);
}

// Parses the body as JSON; writes an error reply and returns false on failure.
bool ParseBody(const httplib::Request& req, httplib::Response& res,
               const std::string& request_id, json& out) {
  if (req.body.empty()) {
    out = json::object();
    return true;
  }
  out = json::parse(req.body, nullptr, /*allow_exceptions=*/false);
  if (out.is_discarded()) {
    ReplyError(res, request_id, ErrorCode::kInvalidArgument, "request body is not JSON",
               "payload");
    return false;
  }
  return true;
}

// Query parameter as a JSON integer, when present and numeric.
void CopyIntParam(const httplib::Request& req, const char* name, json& payload) {
  if (!req.has_param(name)) return;
  const std::string text = req.get_param_value(name);
  try {
    size_t used = 0;
    const long long v = std::stoll(text, &used);
    payload[name] = used == text.size() ? json(v) : json(text);
  } catch (const std::exception&) {
    payload[name] = text;  // rejected by the gateway with a field error
  }
}

}  // namespace

struct HttpServer::Impl {
  explicit Impl(Gateway& g) : gateway(g) {}

  void Call(const httplib::Request& req, httplib::Response& res, std::string agent,
            std::string operation, json payload) {
    ApiRequest request{RequestId(req), std::move(agent), std::move(operation),
                       std::move(payload)};
    Reply(res, gateway.Handle(request));
  }

  void Routes() {
    server.Get("/v1/schema", [this](const httplib::Request& req, httplib::Response& res) {
      Call(req, res, "", "schema", json::object());
    });
    server.Get("/v1/agents", [this](const httplib::Request& req, httplib::Response& res) {
      Call(req, res, "", "list_agents", json::object());
    });
    server.Post("/v1/rpc", [this](const httplib::Request& req, httplib::Response& res) {
      json body;
      const std::string fallback_id = RequestId(req);
      if (!ParseBody(req, res, fallback_id, body)) return;
      ApiRequest request;
      try {
        request = ApiRequestFromJson(body);
      } catch (const Error& e) {
        ReplyError(res, fallback_id, e.code(), e.what(), e.field());
        return;
      }
      if (request.request_id.empty()) request.request_id = fallback_id;
      Reply(res, gateway.Handle(request));
    });

    auto post = [this](const char* pattern, const char* operation) {
      server.Post(pattern, [this, operation](const httplib::Request& req,
                                             httplib::Response& res) {
        json body;
        const std::string id = RequestId(req);
        if (!ParseBody(req, res, id, body)) return;
        ApiRequest request{id, req.matches[1], operation, std::move(body)};
        Reply(res, gateway.Handle(request));
      });
    };
    post(R"(/v1/agents/([^/]+)/enroll)", "enroll");
    post(R"(/v1/agents/([^/]+)/incidents)", "report_incident");
    post(R"(/v1/agents/([^/]+)/restore)", "restore");

    server.Get(R"(/v1/agents/([^/]+)/predictions/([^/]+))",
               [this](const httplib::Request& req, httplib::Response& res) {
                 Call(req, res, req.matches[1], "get_prediction",
                      {{"subject_id", req.matches[2]}});
               });
    server.Get(R"(/v1/agents/([^/]+)/alerts)",
               [this](const httplib::Request& req, httplib::Response& res) {
                 json payload = json::object();
                 CopyIntParam(req, "since", payload);
                 Call(req, res, req.matches[1], "list_alerts", std::move(payload));
               });
    server.Get(R"(/v1/agents/([^/]+)/peers/([^/]+))",
               [this](const httplib::Request& req, httplib::Response& res) {
                 json payload = {{"subject_id", req.matches[2]}};
                 CopyIntParam(req, "top", payload);
                 Call(req, res, req.matches[1], "safety_peers", std::move(payload));
               });
    server.Get(R"(/v1/agents/([^/]+)/clusters)",
               [this](const httplib::Request& req, httplib::Response& res) {
                 json payload = json::object();
                 CopyIntParam(req, "k", payload);
                 CopyIntParam(req, "dims", payload);
                 Call(req, res, req.matches[1], "cluster_view", std::move(payload));
               });
    server.Get(R"(/v1/agents/([^/]+)/similarity)",
               [this](const httplib::Request& req, httplib::Response& res) {
                 json payload = json::object();
                 if (req.has_param("tau")) {
                   try {
                     payload["tau"] = std::stod(req.get_param_value("tau"));
                   } catch (const std::exception&) {
                     payload["tau"] = req.get_param_value("tau");
                   }
                 }
                 Call(req, res, req.matches[1], "similarity_stats", std::move(payload));
               });
    server.Get(R"(/v1/agents/([^/]+)/snapshot)",
               [this](const httplib::Request& req, httplib::Response& res) {
                 Call(req, res, req.matches[1], "snapshot", json::object());
               });
    server.set_exception_handler(
        [](const httplib::Request& req, httplib::Response& res, std::exception_ptr ep) {
          std::string what = "internal error";
          try {
            std::rethrow_exception(ep);
          } catch (const std::exception& e) {
            what = e.what();
          } catch (...) {
          }
          spdlog::error("{} {}: {}", req.method, req.path, what);
          ReplyError(res, RequestId(req), ErrorCode::kIo, what, "");
          res.status = 500;
        });
  }

  Gateway& gateway;
  httplib::Server server;
};

HttpServer::HttpServer(Gateway& gateway) : impl_(std::make_unique<Impl>(gateway)) {
  impl_->Routes();
}

HttpServer::~HttpServer() { Stop(); }

int HttpServer::Bind(const std::string& host, int port) {
  if (port == 0) return impl_->server.bind_to_any_port(host);
  return impl_->server.bind_to_port(host, port) ? port : -1;
}

bool HttpServer::Serve() { return impl_->server.listen_after_bind(); }

void HttpServer::Stop() {
  if (impl_ && impl_->server.is_running()) impl_->server.stop();
}

bool HttpServer::running() const { return impl_->server.is_running(); }

}  // namespace sentinel
