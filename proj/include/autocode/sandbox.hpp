#pragma once

#include <chrono>
#include <condition_variable>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "autocode/config.hpp"
#include "autocode/core.hpp"
#include "autocode/error.hpp"

// Client side of the interpreter worker protocol: line-delimited JSON over
// the worker's stdin/stdout. The worker announces {"ready":true,"protocol":1},
// answers each request with exactly one response line in order, and
// acknowledges {"type":"reset"} with {"type":"ack"}.
namespace autocode::sandbox {

inline constexpr int kProtocolVersion = 1;

struct ExecRequest {
  std::string id;
  std::string code;
  int timeout_ms = 10000;
  int max_output_bytes = 65536;
};

struct ExecResponse {
  std::string id;
  ExecStatus status = ExecStatus::ok;
  std::string stdout_text;
  bool truncated = false;
  std::string stderr_text;
  double duration_ms = 0.0;
};

nlohmann::json to_json(const ExecRequest& r);
ExecResponse response_from_json(const nlohmann::json& j);

class WorkerError : public Error {
 public:
  using Error::Error;
};

class Executor {
 public:
  virtual ~Executor() = default;
  virtual ExecResponse execute(const std::string& code) = 0;
  virtual void reset() = 0;
};

// One worker child process. A worker that misses its deadline (request
// timeout plus a grace period) is killed and respawned, and the request is
// reported as a timeout.
class WorkerProcess : public Executor {
 public:
  WorkerProcess(std::vector<std::string> argv, SandboxConfig cfg, int grace_ms = 1000);
  ~WorkerProcess() override;
  WorkerProcess(const WorkerProcess&) = delete;
  WorkerProcess& operator=(const WorkerProcess&) = delete;

  ExecResponse execute(const std::string& code) override;
  ExecResponse execute(const ExecRequest& req);
  void reset() override;
  int restarts() const { return restarts_; }

 private:
  void spawn();
  void kill_child();
  void send_line(const std::string& line);
  // Reads one line before the deadline; false on timeout.
  bool read_line(std::string& line, std::chrono::steady_clock::time_point deadline);

  std::vector<std::string> argv_;
  SandboxConfig cfg_;
  int grace_ms_;
  int pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  std::string buffer_;
  long next_id_ = 0;
  int restarts_ = 0;
};

// Splits a command line on whitespace (no shell, no quoting).
std::vector<std::string> split_command(const std::string& command);

// Pool of executors leased exclusively per request.
class ExecutorPool {
 public:
  using Factory = std::function<std::unique_ptr<Executor>()>;
  ExecutorPool(Factory factory, int size);

  class Lease {
   public:
    Lease(ExecutorPool& pool, std::unique_ptr<Executor> ex) : pool_(&pool), ex_(std::move(ex)) {}
    Lease(Lease&&) = default;
    ~Lease();
    Executor& operator*() { return *ex_; }
    Executor* operator->() { return ex_.get(); }

   private:
    ExecutorPool* pool_;
    std::unique_ptr<Executor> ex_;
  };

  Lease acquire();
  int size() const { return size_; }

 private:
  friend class Lease;
  std::mutex mu_;
  std::condition_variable cv_;
  std::vector<std::unique_ptr<Executor>> idle_;
  int size_;
};

}  // namespace autocode::sandbox
