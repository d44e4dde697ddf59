#include "fdi/model.hpp"

#include <algorithm>

#include <httplib.h>
#include <json.hpp>

#include <fmt/format.h>

namespace fdi {

namespace {

struct Endpoint {
  std::string base;  // scheme://host[:port]
  std::string path;
};

Endpoint split_endpoint(const std::string& url) {
  const std::size_t scheme = url.find("://");
  if (scheme == std::string::npos || url.compare(0, scheme, "http") != 0) {
    throw Error(ErrorKind::invalid_argument, "remote endpoint must be an http:// URL: " + url);
  }
  const std::size_t slash = url.find('/', scheme + 3);
  if (slash == std::string::npos) return {url, "/"};
  return {url.substr(0, slash), url.substr(slash)};
}

class SlotGuard {
 public:
  explicit SlotGuard(std::counting_semaphore<1024>& s) : s_(s) { s_.acquire(); }
  ~SlotGuard() { s_.release(); }
  SlotGuard(const SlotGuard&) = delete;
  SlotGuard& operator=(const SlotGuard&) = delete;

 private:
  std::counting_semaphore<1024>& s_;
};

std::string post_generate(const std::string& base, const std::string& path,
                          std::chrono::milliseconds timeout, const GenerationRequest& request) {
  httplib::Client client(base);
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(timeout);
  const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(timeout - secs);
  client.set_connection_timeout(secs.count(), usecs.count());
  client.set_read_timeout(secs.count(), usecs.count());
  client.set_write_timeout(secs.count(), usecs.count());

  const nlohmann::json body = {{"prompt", request.prompt},
                               {"temperature", request.temperature},
                               {"max_tokens", request.max_tokens}};
  const auto start = std::chrono::steady_clock::now();
  auto res = client.Post(path, body.dump(), "application/json");
  const auto elapsed =
      std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start);

  if (!res) {
    const auto err = res.error();
    const bool timed_out = err == httplib::Error::ConnectionTimeout ||
                           (err == httplib::Error::Read && elapsed >= timeout * 9 / 10);
    if (timed_out) {
      throw RemoteError(RemoteFailure::timeout,
                        fmt::format("remote model timed out after {} ms", elapsed.count()), 0,
                        elapsed);
    }
    throw RemoteError(RemoteFailure::network,
                      "remote model request failed: " + httplib::to_string(err), 0, elapsed);
  }
  if (res->status < 200 || res->status >= 300) {
    throw RemoteError(RemoteFailure::status, fmt::format("remote model returned HTTP {}", res->status),
                      res->status, elapsed);
  }
  try {
    const auto reply = nlohmann::json::parse(res->body);
    return reply.at("completion").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw RemoteError(RemoteFailure::schema,
                      std::string("remote model reply does not match schema: ") + e.what(),
                      res->status, elapsed);
  }
}

}  // namespace

RemoteModel::RemoteModel(RemoteConfig config)
    : config_(std::move(config)), slots_(std::clamp(config_.max_in_flight, 1, 1024)) {
  if (config_.max_in_flight < 1 || config_.max_in_flight > 1024) {
    throw Error(ErrorKind::invalid_argument, "max_in_flight must be in [1, 1024]");
  }
  if (config_.timeout.count() <= 0) throw Error(ErrorKind::invalid_argument, "timeout must be positive");
  const Endpoint ep = split_endpoint(config_.endpoint);
  host_ = ep.base;
  path_ = ep.path;
}

RemoteModel::~RemoteModel() = default;

std::string RemoteModel::generate(const GenerationRequest& request) const {
  SlotGuard guard(slots_);
  return post_generate(host_, path_, config_.timeout, request);
}

std::string remote_generate(const RemoteConfig& config, const GenerationRequest& request) {
  const Endpoint ep = split_endpoint(config.endpoint);
  return post_generate(ep.base, ep.path, config.timeout, request);
}

}  // namespace fdi
