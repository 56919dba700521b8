#pragma once

#include <atomic>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

namespace autocode::llm {

struct StubReply {
  int status = 200;
  std::string content;
  std::string finish_reason = "stop";
  std::optional<std::vector<double>> token_logprobs;
  int delay_ms = 0;
};

// Scripted in-process OpenAI-compatible endpoint on 127.0.0.1. The script
// sees the decoded request body and the zero-based call index. Instruments
// the number of concurrently served requests.
class StubServer {
 public:
  using Script = std::function<StubReply(const nlohmann::json& request, int call_index)>;

  explicit StubServer(Script script, int server_threads = 64);
  ~StubServer();
  StubServer(const StubServer&) = delete;
  StubServer& operator=(const StubServer&) = delete;

  int port() const { return port_; }
  std::string base_url() const { return "http://127.0.0.1:" + std::to_string(port_); }
  int calls() const { return calls_.load(); }
  int max_in_flight() const { return max_in_flight_.load(); }
  std::vector<nlohmann::json> requests() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  Script script_;
  int port_ = 0;
  std::atomic<int> calls_{0};
  std::atomic<int> in_flight_{0};
  std::atomic<int> max_in_flight_{0};
  std::atomic<bool> stopping_{false};
  mutable std::mutex mu_;
  std::vector<nlohmann::json> requests_;
  std::thread thread_;
};

}  // namespace autocode::llm
