#include "autocode/sandbox.hpp"

#include <cerrno>
#include <csignal>
#include <cstring>
#include <sstream>

#include <fcntl.h>
#include <poll.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

extern char** environ;

namespace autocode::sandbox {

using json = nlohmann::json;

json to_json(const ExecRequest& r) {
  return {{"id", r.id}, {"code", r.code}, {"timeout_ms", r.timeout_ms}, {"max_output_bytes", r.max_output_bytes}};
}

ExecResponse response_from_json(const json& j) {
  ExecResponse r;
  r.id = j.at("id").get<std::string>();
  r.status = parse_exec_status(j.at("status").get<std::string>());
  r.stdout_text = j.value("stdout", "");
  r.truncated = j.value("truncated", false);
  r.stderr_text = j.value("stderr", "");
  r.duration_ms = j.value("duration_ms", 0.0);
  return r;
}

std::vector<std::string> split_command(const std::string& command) {
  std::istringstream in(command);
  std::vector<std::string> out;
  for (std::string w; in >> w;) out.push_back(w);
  if (out.empty()) throw InvalidArgument("empty sandbox command");
  return out;
}

WorkerProcess::WorkerProcess(std::vector<std::string> argv, SandboxConfig cfg, int grace_ms)
    : argv_(std::move(argv)), cfg_(std::move(cfg)), grace_ms_(grace_ms) {
  spawn();
}

WorkerProcess::~WorkerProcess() { kill_child(); }

void WorkerProcess::spawn() {
  // A worker that dies mid-request must surface as an error, not kill us.
  static const bool sigpipe_ignored = [] { return std::signal(SIGPIPE, SIG_IGN) != SIG_ERR; }();
  (void)sigpipe_ignored;
  int in_pipe[2], out_pipe[2];
  if (pipe2(in_pipe, O_CLOEXEC) != 0 || pipe2(out_pipe, O_CLOEXEC) != 0)
    throw WorkerError(std::string("pipe: ") + std::strerror(errno));
  posix_spawn_file_actions_t fa;
  posix_spawn_file_actions_init(&fa);
  posix_spawn_file_actions_adddup2(&fa, in_pipe[0], STDIN_FILENO);
  posix_spawn_file_actions_adddup2(&fa, out_pipe[1], STDOUT_FILENO);
  std::vector<char*> args;
  for (auto& a : argv_) args.push_back(a.data());
  args.push_back(nullptr);
  pid_t pid;
  const int rc = posix_spawnp(&pid, args[0], &fa, nullptr, args.data(), environ);
  posix_spawn_file_actions_destroy(&fa);
  close(in_pipe[0]);
  close(out_pipe[1]);
  if (rc != 0) {
    close(in_pipe[1]);
    close(out_pipe[0]);
    throw WorkerError("cannot start sandbox worker '" + argv_[0] + "': " + std::strerror(rc));
  }
  pid_ = pid;
  to_child_ = in_pipe[1];
  from_child_ = out_pipe[0];
  buffer_.clear();

  std::string line;
  const auto deadline = std::chrono::steady_clock::now() + std::chrono::milliseconds(10000);
  if (!read_line(line, deadline)) {
    kill_child();
    throw WorkerError("sandbox worker did not announce readiness");
  }
  const auto hello = json::parse(line, nullptr, false);
  if (hello.is_discarded() || !hello.value("ready", false) || hello.value("protocol", 0) != kProtocolVersion) {
    kill_child();
    throw WorkerError("unexpected sandbox handshake: " + line);
  }
}

void WorkerProcess::kill_child() {
  if (to_child_ >= 0) close(to_child_);
  if (from_child_ >= 0) close(from_child_);
  to_child_ = from_child_ = -1;
  if (pid_ > 0) {
    ::kill(pid_, SIGKILL);
    int status;
    waitpid(pid_, &status, 0);
  }
  pid_ = -1;
}

void WorkerProcess::send_line(const std::string& line) {
  std::string data = line + "\n";
  std::size_t off = 0;
  while (off < data.size()) {
    const auto n = ::write(to_child_, data.data() + off, data.size() - off);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw WorkerError(std::string("write to sandbox worker: ") + std::strerror(errno));
    }
    off += static_cast<std::size_t>(n);
  }
}

bool WorkerProcess::read_line(std::string& line, std::chrono::steady_clock::time_point deadline) {
  for (;;) {
    const auto nl = buffer_.find('\n');
    if (nl != std::string::npos) {
      line = buffer_.substr(0, nl);
      buffer_.erase(0, nl + 1);
      return true;
    }
    const auto left =
        std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now()).count();
    if (left <= 0) return false;
    pollfd pfd{from_child_, POLLIN, 0};
    const int rc = poll(&pfd, 1, static_cast<int>(left));
    if (rc < 0 && errno == EINTR) continue;
    if (rc == 0) return false;
    if (rc < 0) throw WorkerError(std::string("poll on sandbox worker: ") + std::strerror(errno));
    char buf[4096];
    const auto n = ::read(from_child_, buf, sizeof buf);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) throw WorkerError("sandbox worker closed its output");
    buffer_.append(buf, static_cast<std::size_t>(n));
  }
}

ExecResponse WorkerProcess::execute(const std::string& code) {
  return execute(ExecRequest{"r" + std::to_string(next_id_++), code, cfg_.timeout_ms, cfg_.max_output_bytes});
}

ExecResponse WorkerProcess::execute(const ExecRequest& req) {
  const auto start = std::chrono::steady_clock::now();
  auto elapsed = [&] { return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count(); };
  auto replace_worker = [&] {
    kill_child();
    ++restarts_;
    spawn();
  };
  if (pid_ < 0) spawn();
  std::string line;
  try {
    send_line(to_json(req).dump());
    const auto deadline = start + std::chrono::milliseconds(req.timeout_ms + grace_ms_);
    if (!read_line(line, deadline)) {
      // The worker failed to enforce its own limit; replace it.
      replace_worker();
      ExecResponse r;
      r.id = req.id;
      r.status = ExecStatus::timeout;
      r.duration_ms = elapsed();
      return r;
    }
  } catch (const WorkerError& e) {
    // The worker died while serving the request.
    replace_worker();
    ExecResponse r;
    r.id = req.id;
    r.status = ExecStatus::error;
    r.stderr_text = std::string("WorkerExited: ") + e.what();
    r.duration_ms = elapsed();
    return r;
  }
  const auto j = json::parse(line, nullptr, false);
  if (j.is_discarded()) throw WorkerError("malformed sandbox response: " + line);
  auto r = response_from_json(j);
  if (r.id != req.id) throw WorkerError("sandbox response id '" + r.id + "' does not match request '" + req.id + "'");
  return r;
}

void WorkerProcess::reset() {
  if (pid_ < 0) spawn();
  send_line(R"({"type":"reset"})");
  std::string line;
  if (!read_line(line, std::chrono::steady_clock::now() + std::chrono::milliseconds(cfg_.timeout_ms + grace_ms_)))
    throw WorkerError("sandbox worker did not acknowledge reset");
  const auto j = json::parse(line, nullptr, false);
  if (j.is_discarded() || j.value("type", "") != "ack") throw WorkerError("unexpected reset answer: " + line);
}

ExecutorPool::ExecutorPool(Factory factory, int size) : size_(size) {
  if (size < 1) throw InvalidArgument("executor pool size must be >= 1");
  for (int i = 0; i < size; ++i) idle_.push_back(factory());
}

ExecutorPool::Lease ExecutorPool::acquire() {
  std::unique_lock lock(mu_);
  cv_.wait(lock, [&] { return !idle_.empty(); });
  auto ex = std::move(idle_.back());
  idle_.pop_back();
  return Lease(*this, std::move(ex));
}

ExecutorPool::Lease::~Lease() {
  if (!ex_) return;
  {
    std::lock_guard lock(pool_->mu_);
    pool_->idle_.push_back(std::move(ex_));
  }
  pool_->cv_.notify_one();
}

}  // namespace autocode::sandbox
