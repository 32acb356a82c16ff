#pragma once

// HTTP front end for interactive warping. Sessions hold an uploaded image and
// its depth in memory and expire after a period of inactivity.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>

#include "dragwarp/grid.hpp"

namespace dragwarp {

struct Session {
  std::string id;
  std::shared_ptr<const FeatureGrid> image;
  std::shared_ptr<const DepthMap> depth;  // as uploaded, resized per warp
  std::chrono::steady_clock::time_point created_at;
  std::chrono::steady_clock::time_point last_used;
};

class SessionStore {
 public:
  using Clock = std::function<std::chrono::steady_clock::time_point()>;

  explicit SessionStore(std::chrono::seconds ttl, Clock clock = {});

  /// Depth may have any shape; it is resized to the image at warp time.
  std::string create(FeatureGrid image, DepthMap depth);

  /// Refreshes the idle timer. Throws NoSuchSession.
  Session get(const std::string& id);

  std::size_t size();
  /// Drops sessions idle for longer than the TTL; returns how many.
  std::size_t evict_expired();

 private:
  std::chrono::steady_clock::time_point now() const;

  std::chrono::seconds ttl_;
  Clock clock_;
  std::mutex mu_;
  std::unordered_map<std::string, Session> sessions_;
};

struct ServiceOptions {
  std::string host = "127.0.0.1";
  int port = 8080;  // 0 picks a free port
  std::optional<std::filesystem::path> assets;
  std::chrono::seconds ttl{30 * 60};
  int workers = 0;  // 0 means hardware concurrency
  std::chrono::milliseconds budget{10'000};
};

/// Overrides from DRAGWARP_BIND (host:port), DRAGWARP_TTL_SECONDS and
/// DRAGWARP_WORKERS. Throws InvalidArgument on malformed values.
ServiceOptions options_from_env(ServiceOptions base = {});

/// Splits "host:port". Throws InvalidArgument.
void parse_bind(const std::string& bind, std::string& host, int& port);

class Server {
 public:
  explicit Server(ServiceOptions options);
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  /// Binds the socket; returns the port. Throws InvalidArgument on failure.
  int bind();
  /// Serves until stop(). bind() must have succeeded.
  void run();
  void stop();

  SessionStore& sessions();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace dragwarp
