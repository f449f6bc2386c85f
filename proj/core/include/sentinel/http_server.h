#ifndef SENTINEL_HTTP_SERVER_H_
#define SENTINEL_HTTP_SERVER_H_

#include <memory>
#include <string>

#include "sentinel/gateway.h"

namespace sentinel {

// JSON-over-HTTP binding of a Gateway. Routes (all bodies and replies are
// the ApiResponse envelope; X-Request-Id is echoed as request_id):
//   GET  /v1/schema
//   GET  /v1/agents
//   POST /v1/rpc                                 full ApiRequest envelope
//   POST /v1/agents/{agent}/enroll               survey record
//   POST /v1/agents/{agent}/incidents            incident label
//   GET  /v1/agents/{agent}/predictions/{subject}
//   GET  /v1/agents/{agent}/alerts?since=N
//   GET  /v1/agents/{agent}/peers/{subject}?top=M
//   GET  /v1/agents/{agent}/clusters?k=K&dims=D
//   GET  /v1/agents/{agent}/similarity?tau=T
//   GET  /v1/agents/{agent}/snapshot
//   POST /v1/agents/{agent}/restore              {snapshot}
class HttpServer {
 public:
  explicit HttpServer(Gateway& gateway);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  // Binds and returns the port (an ephemeral one when `port` is 0), or -1.
  int Bind(const std::string& host, int port);
  // Serves until Stop(); call after a successful Bind.
  bool Serve();
  void Stop();
  bool running() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace sentinel

#endif  // SENTINEL_HTTP_SERVER_H_
