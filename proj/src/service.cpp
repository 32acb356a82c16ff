#include "dragwarp/service.hpp"

#include <cstdlib>
#include <future>
#include <random>
#include <semaphore>
#include <thread>

#include "dragwarp/error.hpp"
#include "dragwarp/io.hpp"
#include "dragwarp/pipeline.hpp"
#include "json_util.hpp"

// After Eigen: <resolv.h> defines a `_res` macro that collides with Eigen
// parameter names.
#include "httplib.h"

namespace dragwarp {
namespace {

using detail::json;
using WorkerSlots = std::counting_semaphore<4096>;

std::string random_id() {
  static std::mutex mu;
  static std::mt19937_64 gen{std::random_device{}()};
  std::lock_guard lock(mu);
  char buf[33];
  std::snprintf(buf, sizeof buf, "%016llx%016llx", static_cast<unsigned long long>(gen()),
                static_cast<unsigned long long>(gen()));
  return buf;
}

int parse_int_env(const char* name, const char* value, int lo) {
  char* end = nullptr;
  const long v = std::strtol(value, &end, 10);
  if (end == value || *end != '\0' || v < lo || v > 1'000'000'000L) {
    throw Error(ErrorCode::InvalidArgument, std::string(name) + " must be an integer >= " +
                                                std::to_string(lo));
  }
  return static_cast<int>(v);
}

int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::NoSuchSession: return 404;
    case ErrorCode::Busy: return 503;
    default: return 400;
  }
}

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, std::string_view error, std::string_view detail) {
  send_json(res, status, json{{"error", error}, {"detail", detail}});
}

template <typename F>
void guarded(httplib::Response& res, F&& body) {
  try {
    body();
  } catch (const Error& e) {
    send_error(res, http_status(e.code()), e.name(), e.what());
  } catch (const std::exception& e) {
    send_error(res, 500, "internal", e.what());
  }
}

Bytes as_bytes(const std::string& s) { return Bytes(s.begin(), s.end()); }

struct WarpRequest {
  std::string id;
  DragSpec spec;
};

WarpRequest parse_warp_request(const std::string& body) {
  const json root = detail::parse_json(body);
  if (!root.is_object()) throw Error(ErrorCode::BadJson, "request must be a JSON object");
  detail::reject_unknown(root, {"id", "drags", "params"}, "");
  WarpRequest req;
  const auto id = root.find("id");
  if (id == root.end() || !id->is_string()) {
    throw Error(ErrorCode::InvalidArgument, "'id' must be a string");
  }
  req.id = id->get<std::string>();
  const auto drags = root.find("drags");
  if (drags == root.end() || !drags->is_object()) {
    throw Error(ErrorCode::InvalidArgument, "'drags' must be an object");
  }
  req.spec = parse_drag_spec(drags->dump());
  if (const auto params = root.find("params"); params != root.end()) {
    apply_params_json(params->dump(), req.spec.params);
  }
  if (req.spec.mask.empty()) throw Error(ErrorCode::InvalidArgument, "drag spec has no mask");
  return req;
}

}  // namespace

SessionStore::SessionStore(std::chrono::seconds ttl, Clock clock)
    : ttl_(ttl), clock_(std::move(clock)) {}

std::chrono::steady_clock::time_point SessionStore::now() const {
  return clock_ ? clock_() : std::chrono::steady_clock::now();
}

std::string SessionStore::create(FeatureGrid image, DepthMap depth) {
  validate_grid(image);
  validate_depth(depth);
  Session s;
  s.image = std::make_shared<const FeatureGrid>(std::move(image));
  s.depth = std::make_shared<const DepthMap>(std::move(depth));
  s.created_at = s.last_used = now();
  std::lock_guard lock(mu_);
  do {
    s.id = random_id();
  } while (sessions_.count(s.id) != 0);
  sessions_.emplace(s.id, s);
  return s.id;
}

Session SessionStore::get(const std::string& id) {
  const auto t = now();
  std::lock_guard lock(mu_);
  const auto it = sessions_.find(id);
  if (it == sessions_.end() || t - it->second.last_used > ttl_) {
    if (it != sessions_.end()) sessions_.erase(it);
    throw Error(ErrorCode::NoSuchSession, "no session with id '" + id + "'");
  }
  it->second.last_used = t;
  return it->second;
}

std::size_t SessionStore::size() {
  std::lock_guard lock(mu_);
  return sessions_.size();
}

std::size_t SessionStore::evict_expired() {
  const auto t = now();
  std::lock_guard lock(mu_);
  return std::erase_if(sessions_, [&](const auto& kv) { return t - kv.second.last_used > ttl_; });
}

void parse_bind(const std::string& bind, std::string& host, int& port) {
  const auto colon = bind.rfind(':');
  if (colon == std::string::npos || colon == 0 || colon + 1 == bind.size()) {
    throw Error(ErrorCode::InvalidArgument, "bind address must look like host:port");
  }
  const std::string port_text = bind.substr(colon + 1);
  const int p = parse_int_env("port", port_text.c_str(), 0);
  if (p > 65535) throw Error(ErrorCode::InvalidArgument, "port must be at most 65535");
  host = bind.substr(0, colon);
  port = p;
}

ServiceOptions options_from_env(ServiceOptions base) {
  if (const char* v = std::getenv("DRAGWARP_BIND"); v && *v) parse_bind(v, base.host, base.port);
  if (const char* v = std::getenv("DRAGWARP_TTL_SECONDS"); v && *v) {
    base.ttl = std::chrono::seconds(parse_int_env("DRAGWARP_TTL_SECONDS", v, 1));
  }
  if (const char* v = std::getenv("DRAGWARP_WORKERS"); v && *v) {
    base.workers = parse_int_env("DRAGWARP_WORKERS", v, 1);
  }
  return base;
}

struct Server::Impl {
  ServiceOptions options;
  SessionStore store;
  std::shared_ptr<WorkerSlots> slots;
  httplib::Server http;
  bool bound = false;

  explicit Impl(ServiceOptions o)
      : options(std::move(o)),
        store(options.ttl),
        slots(std::make_shared<WorkerSlots>(std::clamp(
            options.workers > 0 ? options.workers
                                : static_cast<int>(std::max(1u, std::thread::hardware_concurrency())),
            1, 4096))) {
    routes();
  }

  void routes() {
    http.Get("/healthz", [](const httplib::Request&, httplib::Response& res) {
      res.set_content("ok", "text/plain");
    });

    http.Post("/api/session", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        store.evict_expired();
        if (!req.has_file("image")) {
          throw Error(ErrorCode::InvalidArgument, "multipart field 'image' is required");
        }
        FeatureGrid image = image_to_grid(as_bytes(req.get_file_value("image").content));
        DepthMap depth = req.has_file("depth")
                             ? read_depth_fgrid(as_bytes(req.get_file_value("depth").content))
                             : auto_depth(image);
        const int h = image.height;
        const int w = image.width;
        const std::string id = store.create(std::move(image), std::move(depth));
        send_json(res, 200, json{{"id", id}, {"h", h}, {"w", w}});
      });
    });

    http.Post("/api/warp", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] { warp(req.body, res); });
    });

    http.Get(R"(/api/session/([0-9a-zA-Z]+)/depth\.png)",
             [this](const httplib::Request& req, httplib::Response& res) {
               guarded(res, [&] {
                 const Session s = store.get(req.matches[1]);
                 const Bytes png = depth_to_png(*s.depth);
                 res.set_content(std::string(png.begin(), png.end()), "image/png");
               });
             });

    if (options.assets && !http.set_mount_point("/", options.assets->string())) {
      throw Error(ErrorCode::FileNotFound, "asset directory not found: " + options.assets->string());
    }

    http.set_error_handler([](const httplib::Request&, httplib::Response& res) {
      if (!res.body.empty()) return;
      const char* name = res.status == 404 ? "not_found" : "http_error";
      send_error(res, res.status, name, "status " + std::to_string(res.status));
    });
    http.set_exception_handler(
        [](const httplib::Request&, httplib::Response& res, std::exception_ptr) {
          send_error(res, 500, "internal", "unhandled exception");
        });
  }

  void warp(const std::string& body, httplib::Response& res) {
    const auto deadline = std::chrono::steady_clock::now() + options.budget;
    store.evict_expired();
    const WarpRequest request = parse_warp_request(body);
    const Session session = store.get(request.id);
    const Mask mask = png_to_mask(base64_decode(request.spec.mask));

    if (!slots->try_acquire_until(deadline)) {
      throw Error(ErrorCode::Busy, "no worker became free within the time budget");
    }
    // The computation owns copies of everything it touches, so a request that
    // times out can leave it running to completion in the background.
    std::packaged_task<json()> task([session, mask, spec = request.spec] {
      const WarpOutput out = warp_grid(*session.image, *session.depth, mask, spec.pairs, spec.params);
      const Bytes png = grid_to_png(out.grid);
      return json{{"png", base64_encode(png)},
                  {"displacements", json::parse(displacements_to_json(out.displacements))},
                  {"diagnostics", json::parse(diagnostics_to_json(out.diagnostics))}};
    });
    auto result = task.get_future();
    std::thread([task = std::move(task), slots = slots]() mutable {
      task();
      slots->release();
    }).detach();

    if (result.wait_until(deadline) != std::future_status::ready) {
      throw Error(ErrorCode::Busy, "warp exceeded the time budget");
    }
    send_json(res, 200, result.get());
  }
};

Server::Server(ServiceOptions options) : impl_(std::make_unique<Impl>(std::move(options))) {}

Server::~Server() { stop(); }

int Server::bind() {
  auto& o = impl_->options;
  if (o.port == 0) {
    const int port = impl_->http.bind_to_any_port(o.host);
    if (port < 0) throw Error(ErrorCode::InvalidArgument, "cannot bind " + o.host);
    o.port = port;
  } else if (!impl_->http.bind_to_port(o.host, o.port)) {
    throw Error(ErrorCode::InvalidArgument,
                "cannot bind " + o.host + ":" + std::to_string(o.port));
  }
  impl_->bound = true;
  return o.port;
}

void Server::run() {
  if (!impl_->bound) throw Error(ErrorCode::InvalidArgument, "server is not bound");
  impl_->http.listen_after_bind();
}

void Server::stop() {
  if (impl_ && impl_->http.is_running()) impl_->http.stop();
}

SessionStore& Server::sessions() { return impl_->store; }

}  // namespace dragwarp
