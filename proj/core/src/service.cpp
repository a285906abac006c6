#include "moje/service.hpp"

#include <chrono>

#include <fmt/format.h>

#include "httplib.h"
#include "json.hpp"
#include "moje/error.hpp"
#include "moje/modelstore.hpp"

namespace moje {
namespace {

using nlohmann::json;

HttpReply error_reply(int status, std::string_view message) {
  return {status, json{{"error", message}}.dump()};
}

json verdict_json(const Verdict& v) {
  json per_expert = json::object();
  for (const auto& [category, p] : v.per_expert) per_expert[category] = p;
  return {{"label", to_string(v.label)},
          {"score", v.score},
          {"rule", to_string(v.rule)},
          {"per_expert", std::move(per_expert)}};
}

}  // namespace

ModerationService::ModerationService(std::shared_ptr<const ModelSnapshot> snapshot,
                                     ServiceOptions options)
    : snapshot_(std::move(snapshot)), options_(std::move(options)) {}

std::shared_ptr<const ModelSnapshot> ModerationService::make_snapshot(MojeModel model) {
  auto snap = std::make_shared<ModelSnapshot>();
  snap->version = model_id(model);
  snap->model = std::move(model);
  return snap;
}

std::shared_ptr<const ModelSnapshot> ModerationService::snapshot() const {
  std::lock_guard lock(snapshot_mutex_);
  return snapshot_;
}

void ModerationService::publish(std::shared_ptr<const ModelSnapshot> next) {
  std::shared_ptr<const ModelSnapshot> old;
  {
    std::lock_guard lock(snapshot_mutex_);
    old = std::exchange(snapshot_, std::move(next));
  }
  // `old` is released outside the lock; in-flight requests keep their own
  // reference until they finish.
}

HttpReply ModerationService::moderate(std::string_view body) const {
  const auto start = std::chrono::steady_clock::now();
  json request;
  try {
    request = json::parse(body);
  } catch (const json::exception&) {
    return error_reply(400, "request body is not valid JSON");
  }
  if (!request.is_object() || !request.contains("prompt") || !request["prompt"].is_string())
    return error_reply(400, "request must be an object with a string 'prompt'");
  const auto& prompt = request["prompt"].get_ref<const std::string&>();
  if (prompt.size() > options_.max_prompt_bytes)
    return error_reply(413, fmt::format("prompt exceeds {} bytes", options_.max_prompt_bytes));
  json id;
  if (auto it = request.find("id"); it != request.end()) {
    if (!it->is_string() && !it->is_number_integer())
      return error_reply(400, "'id' must be a string or integer");
    id = *it;
  }

  const auto snap = snapshot();
  if (!snap) return error_reply(503, "no model loaded");
  Verdict verdict;
  try {
    verdict = infer(snap->model, prompt);
  } catch (const InputError& e) {
    return error_reply(400, e.what());
  }
  const auto latency = std::chrono::duration_cast<std::chrono::microseconds>(
                           std::chrono::steady_clock::now() - start)
                           .count();
  json response = verdict_json(verdict);
  response["model_version"] = snap->version;
  response["latency_us"] = latency;
  if (!id.is_null()) response["id"] = id;
  if (options_.log)
    options_.log(json{{"id", id}, {"label", to_string(verdict.label)}, {"score", verdict.score},
                      {"latency_us", latency}}
                     .dump());
  return {200, response.dump()};
}

HttpReply ModerationService::health() const {
  const auto snap = snapshot();
  if (!snap) return error_reply(503, "no model loaded");
  return {200, json{{"status", "ok"},
                    {"model_version", snap->version},
                    {"format_version", kFormatVersion},
                    {"experts", snap->model.experts().size()}}
                   .dump()};
}

void ModerationService::reload_from(const std::filesystem::path& path) {
  std::unique_lock lock(reload_mutex_, std::try_to_lock);
  if (!lock.owns_lock()) throw Error("a reload is already in progress");
  publish(make_snapshot(load(path)));
}

HttpReply ModerationService::reload(std::string_view body) {
  std::unique_lock lock(reload_mutex_, std::try_to_lock);
  if (!lock.owns_lock()) return error_reply(503, "a reload is already in progress");
  json request;
  try {
    request = json::parse(body);
  } catch (const json::exception&) {
    return error_reply(400, "request body is not valid JSON");
  }
  if (!request.is_object() || !request.contains("path") || !request["path"].is_string())
    return error_reply(400, "request must be an object with a string 'path'");
  try {
    publish(make_snapshot(load(request["path"].get<std::string>())));
  } catch (const BundleError& e) {
    return error_reply(422, e.what());
  }
  return health();
}

struct HttpServer::Impl {
  ModerationService& service;
  ServerOptions options;
  httplib::Server server;
  bool bound = false;

  Impl(ModerationService& s, ServerOptions o) : service(s), options(std::move(o)) {}
};

HttpServer::HttpServer(ModerationService& service, ServerOptions options)
    : impl_(std::make_unique<Impl>(service, std::move(options))) {
  auto& server = impl_->server;
  const auto workers = std::max<std::size_t>(1, impl_->options.workers);
  server.new_task_queue = [workers] { return new httplib::ThreadPool(workers); };
  // Headers and body go out in separate writes; Nagle would hold the second.
  server.set_tcp_nodelay(true);
  auto send = [](httplib::Response& res, const HttpReply& reply) {
    res.status = reply.status;
    res.set_content(reply.body, "application/json");
  };
  auto* svc = &impl_->service;
  server.Post("/v1/moderate", [svc, send](const httplib::Request& req, httplib::Response& res) {
    send(res, svc->moderate(req.body));
  });
  server.Get("/v1/health", [svc, send](const httplib::Request&, httplib::Response& res) {
    send(res, svc->health());
  });
  server.Post("/v1/admin/reload", [svc, send](const httplib::Request& req, httplib::Response& res) {
    send(res, svc->reload(req.body));
  });
  server.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
    std::string what = "internal error";
    try {
      std::rethrow_exception(ep);
    } catch (const std::exception& e) {
      what = e.what();
    } catch (...) {
    }
    res.status = 500;
    res.set_content(json{{"error", what}}.dump(), "application/json");
  });
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind() {
  auto& o = impl_->options;
  int port = o.port;
  if (o.port == 0) {
    port = impl_->server.bind_to_any_port(o.host);
  } else if (!impl_->server.bind_to_port(o.host, o.port)) {
    port = -1;
  }
  if (port < 0) throw Error(fmt::format("cannot bind {}:{}", o.host, o.port));
  impl_->bound = true;
  return port;
}

void HttpServer::run() {
  if (!impl_->bound) throw Error("HttpServer::run called before bind");
  impl_->server.listen_after_bind();
}

void HttpServer::wait_until_ready() const { impl_->server.wait_until_ready(); }

void HttpServer::stop() { impl_->server.stop(); }

}  // namespace moje
