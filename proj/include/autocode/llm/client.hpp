#pragma once

#include <atomic>
#include <condition_variable>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "autocode/config.hpp"
#include "autocode/error.hpp"

namespace autocode::llm {

// Connection failures, timeouts and exhausted retries on 429/5xx.
class TransportError : public Error {
 public:
  using Error::Error;
};

// Non-retryable 4xx answers.
class RequestError : public Error {
 public:
  RequestError(const std::string& what, int status) : Error(what), status_(status) {}
  int status() const { return status_; }

 private:
  int status_;
};

struct Completion {
  std::string text;
  std::string finish_reason;
  std::optional<double> logprob_sum;  // present when the endpoint reports token logprobs
  int retry_count = 0;
};

// One chat turn to complete. `prefill` is the partial assistant message to
// continue; when the endpoint is configured without prefill support it is
// prepended to the user prompt instead.
struct GenerateRequest {
  std::string prompt;
  std::string prefill;
  std::vector<std::string> stop;
};

// Counting gate on in-flight requests.
class Gate {
 public:
  explicit Gate(int limit) : limit_(limit) {}
  void acquire();
  void release();

 private:
  std::mutex mu_;
  std::condition_variable cv_;
  int limit_;
  int in_use_ = 0;
};

// Client for an OpenAI-compatible /v1/chat/completions endpoint. Thread
// safe; at most `max_parallel` requests are on the wire at any time.
class Client {
 public:
  explicit Client(EndpointConfig cfg);

  Completion generate(const GenerateRequest& req);
  const EndpointConfig& config() const { return cfg_; }

  // Request body for `req`, exposed for tests.
  std::string request_body(const GenerateRequest& req) const;

 private:
  Completion attempt(const std::string& body) const;

  EndpointConfig cfg_;
  std::string scheme_host_port_;
  std::string path_;
  std::string token_;
  mutable Gate gate_;
};

// Splits "http://host:port/prefix" into ("http://host:port", "/prefix/v1/chat/completions").
std::pair<std::string, std::string> split_endpoint(const std::string& base_url);

}  // namespace autocode::llm
