#include "autocode/llm/client.hpp"

#include <chrono>
#include <cstdlib>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

namespace autocode::llm {

using json = nlohmann::json;

void Gate::acquire() {
  std::unique_lock lock(mu_);
  cv_.wait(lock, [&] { return in_use_ < limit_; });
  ++in_use_;
}

void Gate::release() {
  {
    std::lock_guard lock(mu_);
    --in_use_;
  }
  cv_.notify_one();
}

std::pair<std::string, std::string> split_endpoint(const std::string& base_url) {
  const auto scheme_end = base_url.find("://");
  if (scheme_end == std::string::npos) throw InvalidArgument("endpoint base_url needs a scheme: '" + base_url + "'");
  // Built without TLS support; local and proxied servers speak plain HTTP.
  if (base_url.substr(0, scheme_end) != "http")
    throw InvalidArgument("endpoint base_url must use http://: '" + base_url + "'");
  const auto path_start = base_url.find('/', scheme_end + 3);
  std::string host = base_url.substr(0, path_start);
  std::string prefix = path_start == std::string::npos ? "" : base_url.substr(path_start);
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  if (!prefix.ends_with("/v1")) prefix += "/v1";
  return {host, prefix + "/chat/completions"};
}

Client::Client(EndpointConfig cfg) : cfg_(std::move(cfg)), gate_(std::max(1, cfg_.max_parallel)) {
  std::tie(scheme_host_port_, path_) = split_endpoint(cfg_.base_url);
  if (!cfg_.api_key_env.empty())
    if (const char* tok = std::getenv(cfg_.api_key_env.c_str())) token_ = tok;
}

std::string Client::request_body(const GenerateRequest& req) const {
  json messages = json::array();
  const bool prefill = cfg_.assistant_prefill && !req.prefill.empty();
  std::string prompt = req.prompt;
  if (!cfg_.assistant_prefill && !req.prefill.empty()) prompt = req.prefill + "\n\n" + prompt;
  messages.push_back({{"role", "user"}, {"content", prompt}});
  if (prefill) messages.push_back({{"role", "assistant"}, {"content", req.prefill}});
  json body = {{"model", cfg_.model},
               {"messages", messages},
               {"temperature", cfg_.temperature},
               {"top_p", cfg_.top_p},
               {"max_tokens", cfg_.max_tokens}};
  std::vector<std::string> stop = cfg_.stop;
  stop.insert(stop.end(), req.stop.begin(), req.stop.end());
  if (!stop.empty()) body["stop"] = stop;
  if (cfg_.request_logprobs) body["logprobs"] = true;
  if (prefill) {
    // vLLM / SGLang style continuation of the final assistant message.
    body["continue_final_message"] = true;
    body["add_generation_prompt"] = false;
  }
  return body.dump();
}

Completion Client::attempt(const std::string& body) const {
  httplib::Client cli(scheme_host_port_);
  const auto ms = std::chrono::milliseconds(cfg_.timeout_ms);
  cli.set_connection_timeout(ms);
  cli.set_read_timeout(ms);
  cli.set_write_timeout(ms);
  httplib::Headers headers;
  if (!token_.empty()) headers.emplace("Authorization", "Bearer " + token_);
  auto res = cli.Post(path_, headers, body, "application/json");
  if (!res) throw TransportError("request to " + scheme_host_port_ + path_ + " failed: " + httplib::to_string(res.error()));
  if (res->status == 429 || res->status >= 500)
    throw TransportError("endpoint answered HTTP " + std::to_string(res->status));
  if (res->status >= 400)
    throw RequestError("endpoint rejected request with HTTP " + std::to_string(res->status) + ": " + res->body,
                       res->status);
  json j;
  try {
    j = json::parse(res->body);
  } catch (const json::exception& e) {
    throw TransportError(std::string("malformed endpoint response: ") + e.what());
  }
  if (!j.contains("choices") || j["choices"].empty()) throw TransportError("endpoint response without choices");
  const auto& choice = j["choices"][0];
  Completion out;
  if (choice.contains("message") && choice["message"].contains("content") && choice["message"]["content"].is_string())
    out.text = choice["message"]["content"].get<std::string>();
  else if (choice.contains("text"))
    out.text = choice["text"].get<std::string>();
  out.finish_reason = choice.value("finish_reason", json("")).is_string() ? choice.value("finish_reason", "") : "";
  if (choice.contains("logprobs") && choice["logprobs"].is_object() && choice["logprobs"].contains("content") &&
      choice["logprobs"]["content"].is_array()) {
    double s = 0.0;
    for (const auto& tok : choice["logprobs"]["content"]) s += tok.at("logprob").get<double>();
    out.logprob_sum = s;
  }
  return out;
}

Completion Client::generate(const GenerateRequest& req) {
  const auto body = request_body(req);
  for (int attempt_no = 0;; ++attempt_no) {
    try {
      gate_.acquire();
      struct Release {
        Gate& g;
        ~Release() { g.release(); }
      } release{gate_};
      auto out = attempt(body);
      out.retry_count = attempt_no;
      return out;
    } catch (const TransportError& e) {
      if (attempt_no >= cfg_.max_retries)
        throw TransportError(std::string(e.what()) + " (after " + std::to_string(attempt_no) + " retries)");
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(static_cast<long long>(cfg_.backoff_base_ms) << attempt_no));
  }
}

}  // namespace autocode::llm
