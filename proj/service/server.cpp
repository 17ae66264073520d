#include "mnn/server.hpp"

#include <httplib.h>

namespace mnn::service {

Server::Server(SessionManager& sessions) : protocol_(sessions), http_(std::make_unique<httplib::Server>()) {
  install_routes();
}

Server::~Server() { stop(); }

void Server::install_routes() {
  http_->set_default_headers({{"Access-Control-Allow-Origin", "*"},
                              {"Access-Control-Allow-Headers", "Content-Type"},
                              {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"}});

  http_->Options(R"(/v1/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

  http_->Get("/v1/health", [](const httplib::Request&, httplib::Response& res) { res.set_content("ok", "text/plain"); });

  http_->Post("/v1/messages", [this](const httplib::Request& req, httplib::Response& res) {
    res.set_content(protocol_.handle_text(req.body), "application/json");
  });

  http_->Get(R"(/v1/sessions/([^/]+)/events)", [this](const httplib::Request& req, httplib::Response& res) {
    const std::string id = req.matches[1];
    std::shared_ptr<Subscription> sub;
    std::string first;
    std::uint64_t first_revision = 0;
    try {
      sub = protocol_.sessions().subscribe(id);
      const auto snapshot = protocol_.sessions().find(id)->snapshot();
      first_revision = snapshot.revision;
      first = state_update(snapshot, nullptr).dump();
    } catch (const UnknownSession& e) {
      res.status = 404;
      res.set_content(error_message("unknown_session", e.what(), id).dump(), "application/json");
      return;
    }
    res.set_header("Cache-Control", "no-cache");
    res.set_chunked_content_provider(
        "text/event-stream",
        [this, sub, first, first_revision, sent_first = false, idle = 0](std::size_t, httplib::DataSink& sink) mutable {
          if (!sent_first) {
            const std::string event = "data: " + first + "\n\n";
            sent_first = true;
            return sink.write(event.data(), event.size());
          }
          if (stopping_ || sub->closed()) {
            sink.done();
            return true;
          }
          if (auto msg = sub->next(std::chrono::milliseconds(200))) {
            idle = 0;
            // Committed between subscribe and snapshot: already in `first`.
            if (nlohmann::json::parse(*msg).value("revision", std::uint64_t{0}) <= first_revision) {
              return true;
            }
            const std::string event = "data: " + *msg + "\n\n";
            return sink.write(event.data(), event.size());
          }
          // Comment line every ~5 s so dead clients are noticed.
          if (++idle < 25) {
            return sink.is_writable();
          }
          idle = 0;
          static constexpr char keepalive[] = ": keepalive\n\n";
          return sink.write(keepalive, sizeof keepalive - 1);
        },
        [sub](bool) { sub->close(); });
  });
}

bool Server::bind(const std::string& host, int port) { return http_->bind_to_port(host, port); }

int Server::bind_to_any_port(const std::string& host) { return http_->bind_to_any_port(host); }

bool Server::listen_after_bind() { return http_->listen_after_bind(); }

void Server::start_background() {
  thread_ = std::thread([this] { http_->listen_after_bind(); });
  http_->wait_until_ready();
}

void Server::stop() {
  stopping_ = true;
  if (http_) {
    http_->stop();
  }
  if (thread_.joinable()) {
    thread_.join();
  }
}

}  // namespace mnn::service
