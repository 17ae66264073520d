#pragma once

#include <atomic>
#include <memory>
#include <string>
#include <thread>

#include "mnn/protocol.hpp"

namespace httplib {
class Server;
}

namespace mnn::service {

/// HTTP transport for the session protocol.
///
///   POST /v1/messages               request/response, one JSON message each way
///   GET  /v1/sessions/{id}/events   server-sent events, one state_update per accepted edit
///   GET  /v1/health                 "ok"
class Server {
 public:
  explicit Server(SessionManager& sessions);
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  bool bind(const std::string& host, int port);
  int bind_to_any_port(const std::string& host);
  /// Blocks until stop().
  bool listen_after_bind();
  /// Runs listen_after_bind on a background thread.
  void start_background();
  void stop();

 private:
  void install_routes();

  Protocol protocol_;
  std::unique_ptr<httplib::Server> http_;
  std::atomic<bool> stopping_{false};
  std::thread thread_;
};

}  // namespace mnn::service
