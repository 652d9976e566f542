#include <httplib.h>

#include "storyframe/service.hpp"

namespace storyframe {

namespace {

void send(httplib::Response& res, const ServiceResponse& r) {
  res.status = r.status;
  res.set_content(r.body.dump(), "application/json");
}

// Empty bodies count as {} so clients may POST without a payload.
std::optional<Json> parse_body(const httplib::Request& req, httplib::Response& res) {
  if (req.body.empty()) return Json::object();
  try {
    return Json::parse(req.body);
  } catch (const Json::parse_error& e) {
    send(res, {400, {{"error", "MalformedJson"}, {"message", e.what()}}});
    return std::nullopt;
  }
}

}  // namespace

struct HttpFrontend::Impl {
  httplib::Server server;
};

HttpFrontend::HttpFrontend(StoryService& service) : impl_(std::make_unique<Impl>()) {
  auto& srv = impl_->server;
  srv.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                           {"Access-Control-Allow-Methods", "GET, POST, PATCH, OPTIONS"},
                           {"Access-Control-Allow-Headers", "Content-Type"}});
  srv.Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

  srv.Post("/frames", [&service](const httplib::Request& req, httplib::Response& res) {
    if (auto body = parse_body(req, res)) send(res, service.create_frame(*body));
  });
  srv.Get(R"(/frames/([^/]+))", [&service](const httplib::Request& req, httplib::Response& res) {
    send(res, service.get_frame(req.matches[1]));
  });
  srv.Patch(R"(/frames/([^/]+))", [&service](const httplib::Request& req, httplib::Response& res) {
    if (auto body = parse_body(req, res)) send(res, service.patch_frame(req.matches[1], *body));
  });
  srv.Post(R"(/frames/([^/]+)/generate)", [&service](const httplib::Request& req, httplib::Response& res) {
    if (auto body = parse_body(req, res)) send(res, service.generate(req.matches[1], *body));
  });
  srv.Post(R"(/frames/([^/]+)/evaluate)", [&service](const httplib::Request& req, httplib::Response& res) {
    if (auto body = parse_body(req, res)) send(res, service.evaluate(req.matches[1], *body));
  });
  srv.Post(R"(/frames/([^/]+)/regenerate)",
           [&service](const httplib::Request& req, httplib::Response& res) {
             if (auto body = parse_body(req, res)) send(res, service.regenerate(req.matches[1], *body));
           });
  srv.Get(R"(/frames/([^/]+)/export)", [&service](const httplib::Request& req, httplib::Response& res) {
    send(res, service.export_bundle(req.matches[1]));
  });
  srv.Get("/health", [](const httplib::Request&, httplib::Response& res) {
    res.set_content(R"({"status":"ok"})", "application/json");
  });

  srv.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
    std::string message = "unknown error";
    try {
      std::rethrow_exception(ep);
    } catch (const std::exception& e) {
      message = e.what();
    } catch (...) {
    }
    send(res, {500, {{"error", "InternalError"}, {"message", message}}});
  });
  srv.set_error_handler([](const httplib::Request&, httplib::Response& res) {
    if (res.body.empty() && res.status == 404) {
      send(res, {404, {{"error", "NotFound"}, {"message", "no such route"}}});
    }
  });
}

HttpFrontend::~HttpFrontend() { stop(); }

int HttpFrontend::start(const std::string& host, int port) {
  auto& srv = impl_->server;
  const int bound = port == 0 ? srv.bind_to_any_port(host) : (srv.bind_to_port(host, port) ? port : -1);
  if (bound < 0) throw std::runtime_error("cannot bind " + host + ":" + std::to_string(port));
  thread_ = std::thread([&srv] { srv.listen_after_bind(); });
  srv.wait_until_ready();
  return bound;
}

void HttpFrontend::listen(const std::string& host, int port) {
  if (!impl_->server.listen(host, port)) {
    throw std::runtime_error("cannot listen on " + host + ":" + std::to_string(port));
  }
}

void HttpFrontend::stop() {
  impl_->server.stop();
  if (thread_.joinable()) thread_.join();
}

}  // namespace storyframe
