#include "autocode/llm/stub_server.hpp"

#include <chrono>

#include <httplib.h>

#include "autocode/error.hpp"

namespace autocode::llm {

using json = nlohmann::json;

struct StubServer::Impl {
  httplib::Server server;
};

StubServer::StubServer(Script script, int server_threads) : impl_(std::make_unique<Impl>()), script_(std::move(script)) {
  impl_->server.new_task_queue = [server_threads] { return new httplib::ThreadPool(server_threads); };
  impl_->server.Post(R"(/v1/chat/completions)", [this](const httplib::Request& req, httplib::Response& res) {
    const int now = ++in_flight_;
    int prev = max_in_flight_.load();
    while (now > prev && !max_in_flight_.compare_exchange_weak(prev, now)) {
    }
    const int index = calls_++;
    json body = json::parse(req.body, nullptr, false);
    {
      std::lock_guard lock(mu_);
      requests_.push_back(body);
    }
    StubReply reply = script_(body, index);
    for (int waited = 0; waited < reply.delay_ms && !stopping_; waited += 5)
      std::this_thread::sleep_for(std::chrono::milliseconds(5));
    if (reply.status != 200) {
      res.status = reply.status;
      res.set_content(R"({"error":"scripted failure"})", "application/json");
    } else {
      json choice = {{"index", 0},
                     {"message", {{"role", "assistant"}, {"content", reply.content}}},
                     {"finish_reason", reply.finish_reason}};
      if (reply.token_logprobs) {
        json content = json::array();
        for (double lp : *reply.token_logprobs) content.push_back({{"token", "t"}, {"logprob", lp}});
        choice["logprobs"] = {{"content", content}};
      } else {
        choice["logprobs"] = nullptr;
      }
      res.set_content(json{{"id", "stub-" + std::to_string(index)}, {"object", "chat.completion"},
                           {"choices", json::array({choice})}}
                          .dump(),
                      "application/json");
    }
    --in_flight_;
  });
  port_ = impl_->server.bind_to_any_port("127.0.0.1");
  if (port_ <= 0) throw IoError("stub server could not bind a port");
  thread_ = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
}

StubServer::~StubServer() {
  stopping_ = true;
  impl_->server.stop();
  if (thread_.joinable()) thread_.join();
}

std::vector<json> StubServer::requests() const {
  std::lock_guard lock(mu_);
  return requests_;
}

}  // namespace autocode::llm
