#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>

#include "moje/moje.hpp"

namespace moje {

/// A loaded model plus the id reported to clients.
struct ModelSnapshot {
  MojeModel model;
  std::string version;
};

struct ServiceOptions {
  std::size_t max_prompt_bytes = 32768;
  /// Receives one JSON line per moderation request; null disables logging.
  std::function<void(std::string_view)> log;
};

struct HttpReply {
  int status = 200;
  std::string body;  // JSON
};

/// Transport-independent request handling over an atomically swappable
/// model snapshot. Thread-safe.
class ModerationService {
 public:
  ModerationService(std::shared_ptr<const ModelSnapshot> snapshot, ServiceOptions options);

  static std::shared_ptr<const ModelSnapshot> make_snapshot(MojeModel model);

  std::shared_ptr<const ModelSnapshot> snapshot() const;

  /// POST /v1/moderate: {"prompt": "...", "id": "..."}.
  HttpReply moderate(std::string_view body) const;
  /// GET /v1/health.
  HttpReply health() const;
  /// POST /v1/admin/reload: {"path": "..."}. The old model stays live if the
  /// new bundle fails validation; 503 if another reload is in progress.
  HttpReply reload(std::string_view body);
  /// Loads and publishes a bundle. Throws on failure, leaving the current
  /// snapshot in place.
  void reload_from(const std::filesystem::path& path);

 private:
  void publish(std::shared_ptr<const ModelSnapshot> next);

  mutable std::mutex snapshot_mutex_;
  std::shared_ptr<const ModelSnapshot> snapshot_;
  std::mutex reload_mutex_;
  ServiceOptions options_;
};

struct ServerOptions {
  std::string host = "127.0.0.1";
  int port = 8080;  // 0 picks a free port
  std::size_t workers = 4;
};

/// cpp-httplib front end for a ModerationService.
class HttpServer {
 public:
  HttpServer(ModerationService& service, ServerOptions options);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  /// Binds the socket; returns the bound port. Throws Error on failure.
  int bind();
  /// Serves until stop(); requires bind().
  void run();
  /// Blocks until run() is accepting connections.
  void wait_until_ready() const;
  /// Stops accepting, drains in-flight requests. Safe from any thread.
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace moje
