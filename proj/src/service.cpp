#include "fdi/service.hpp"

#include <httplib.h>
#include <json.hpp>

#include <fmt/format.h>

#include "fdi/model.hpp"

namespace fdi {

using nlohmann::json;

namespace {

RejectReason reason_from_string(std::string_view s) {
  for (auto r : {RejectReason::none, RejectReason::quality_rule, RejectReason::duplicate, RejectReason::not_novel,
                 RejectReason::over_revised, RejectReason::syntax, RejectReason::dismissed}) {
    if (s == to_string(r)) return r;
  }
  throw Error(ErrorKind::parse, fmt::format("unknown reject reason '{}'", s));
}

void reply_error(httplib::Response& res, int status, const std::string& what) {
  res.status = status;
  res.set_content(json{{"error", what}}.dump(), "application/json");
}

}  // namespace

SystemServer::SystemServer(TargetSystem& system) : system_(system), server_(std::make_unique<httplib::Server>()) {
  server_->Post("/query", [this](const httplib::Request& req, httplib::Response& res) {
    try {
      const json in = json::parse(req.body);
      const std::string completion = system_.query(in.at("prompt").get<std::string>(), in.value("temperature", 0.2),
                                                   in.value("seed", std::uint64_t{0}));
      res.set_content(json{{"completion", completion}, {"version", system_.version()}}.dump(), "application/json");
    } catch (const json::exception& e) {
      reply_error(res, 400, e.what());
    } catch (const std::exception& e) {
      reply_error(res, 500, e.what());
    }
  });
  server_->Post("/feedback", [this](const httplib::Request& req, httplib::Response& res) {
    try {
      const json in = json::parse(req.body);
      FeedbackSample s;
      s.query_text = in.at("query").get<std::string>();
      s.suggestion_text = in.at("suggestion").get<std::string>();
      s.revised_text = in.at("revised").get<std::string>();
      s.reaction = reaction_from_string(in.value("reaction", std::string("revise")));
      s.account_id = in.value("account", std::string());
      s.round = in.value("round", 0);
      s.origin = origin_from_string(in.value("origin", std::string("benign")));
      const AdmissionDecision d = system_.submit_feedback(s);
      json decision = {{"admitted", d.admitted}, {"reason", to_string(d.reason)}, {"rule", d.rule}};
      res.set_content(json{{"decision", decision}, {"version", system_.version()}}.dump(), "application/json");
    } catch (const json::exception& e) {
      reply_error(res, 400, e.what());
    } catch (const Error& e) {
      reply_error(res, e.kind() == ErrorKind::invalid_argument ? 400 : 500, e.what());
    } catch (const std::exception& e) {
      reply_error(res, 500, e.what());
    }
  });
  server_->Post("/update", [this](const httplib::Request&, httplib::Response& res) {
    try {
      res.set_content(json{{"version", system_.update()}}.dump(), "application/json");
    } catch (const std::exception& e) {
      reply_error(res, 500, e.what());
    }
  });
}

SystemServer::~SystemServer() { stop(); }

int SystemServer::start(const std::string& host, int port) {
  const int bound = port == 0 ? server_->bind_to_any_port(host) : (server_->bind_to_port(host, port) ? port : -1);
  if (bound < 0) throw Error(ErrorKind::io, fmt::format("cannot bind {}:{}", host, port));
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
  return bound;
}

void SystemServer::stop() {
  if (server_) server_->stop();
  if (thread_.joinable()) thread_.join();
}

// ---------------------------------------------------------------------------

HttpSystemClient::HttpSystemClient(std::string base_url, std::chrono::milliseconds timeout)
    : base_url_(std::move(base_url)), timeout_(timeout) {}

std::string HttpSystemClient::post(const std::string& path, const std::string& body) {
  httplib::Client client(base_url_);
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(timeout_);
  const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(timeout_ - secs);
  client.set_connection_timeout(secs.count(), usecs.count());
  client.set_read_timeout(secs.count(), usecs.count());
  auto res = client.Post(path, body, "application/json");
  if (!res) {
    throw RemoteError(RemoteFailure::network, fmt::format("{}{} failed: {}", base_url_, path, httplib::to_string(res.error())));
  }
  if (res->status < 200 || res->status >= 300) {
    throw RemoteError(RemoteFailure::status, fmt::format("{}{} returned HTTP {}", base_url_, path, res->status),
                      res->status);
  }
  return res->body;
}

std::string HttpSystemClient::query(std::string_view user_query, double temperature, std::uint64_t seed) {
  const json req = {{"prompt", user_query}, {"temperature", temperature}, {"seed", seed}};
  try {
    const json out = json::parse(post("/query", req.dump()));
    version_ = out.value("version", version_);
    return out.at("completion").get<std::string>();
  } catch (const json::exception& e) {
    throw RemoteError(RemoteFailure::schema, std::string("bad /query reply: ") + e.what());
  }
}

AdmissionDecision HttpSystemClient::submit_feedback(const FeedbackSample& s) {
  const json req = {{"query", s.query_text},   {"suggestion", s.suggestion_text}, {"revised", s.revised_text},
                    {"reaction", to_string(s.reaction)}, {"account", s.account_id}, {"round", s.round},
                    {"origin", to_string(s.origin)}};
  try {
    const json out = json::parse(post("/feedback", req.dump()));
    version_ = out.value("version", version_);
    const json& d = out.at("decision");
    AdmissionDecision decision;
    decision.admitted = d.at("admitted").get<bool>();
    decision.reason = reason_from_string(d.at("reason").get<std::string>());
    decision.rule = d.value("rule", std::string());
    return decision;
  } catch (const json::exception& e) {
    throw RemoteError(RemoteFailure::schema, std::string("bad /feedback reply: ") + e.what());
  }
}

std::uint64_t HttpSystemClient::update() {
  try {
    const json out = json::parse(post("/update", "{}"));
    version_ = out.at("version").get<std::uint64_t>();
    return version_;
  } catch (const json::exception& e) {
    throw RemoteError(RemoteFailure::schema, std::string("bad /update reply: ") + e.what());
  }
}

}  // namespace fdi
