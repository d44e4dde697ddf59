#pragma once

// Local HTTP front-end for a target system (POST /query, /feedback, /update)
// and a client that drives a remote one through the same TargetSystem surface.

#include <chrono>
#include <cstdint>
#include <memory>
#include <string>
#include <thread>

#include "fdi/system.hpp"

namespace httplib {
class Server;
}

namespace fdi {

class SystemServer {
 public:
  explicit SystemServer(TargetSystem& system);
  ~SystemServer();
  SystemServer(const SystemServer&) = delete;
  SystemServer& operator=(const SystemServer&) = delete;

  /// Binds and serves in a background thread. Port 0 picks a free port; the
  /// bound port is returned.
  int start(const std::string& host = "127.0.0.1", int port = 0);
  void stop();

 private:
  TargetSystem& system_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
};

class HttpSystemClient final : public TargetSystem {
 public:
  explicit HttpSystemClient(std::string base_url, std::chrono::milliseconds timeout = std::chrono::seconds(30));

  std::string query(std::string_view user_query, double temperature, std::uint64_t seed) override;
  AdmissionDecision submit_feedback(const FeedbackSample& sample) override;
  std::uint64_t update() override;
  /// Last version reported by the server.
  std::uint64_t version() const override { return version_; }

 private:
  std::string post(const std::string& path, const std::string& body);

  std::string base_url_;
  std::chrono::milliseconds timeout_;
  std::uint64_t version_ = 0;
};

}  // namespace fdi
