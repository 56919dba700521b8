#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "autocode/core.hpp"

namespace autocode {

enum class StrategyVariant { main_text, appendix_prior };
enum class RatioGranularity { sequence, per_step };
enum class ClipForm { paper_literal, ppo_min };
enum class Coupling { first_step, free };

std::string_view to_string(StrategyVariant v);
std::string_view to_string(RatioGranularity g);
std::string_view to_string(ClipForm f);
std::string_view to_string(Coupling c);

// OpenAI-compatible endpoint settings. The token itself is never stored; only
// the name of the environment variable that holds it.
struct EndpointConfig {
  std::string base_url = "http://127.0.0.1:8000";
  std::string model = "default";
  std::string api_key_env = "AUTOCODE_API_KEY";
  double temperature = 1.0;
  double top_p = 0.9;
  int max_tokens = 1024;
  std::vector<std::string> stop;
  int timeout_ms = 60000;
  int max_parallel = 4;
  int max_retries = 3;
  int backoff_base_ms = 200;
  bool assistant_prefill = true;
  bool request_logprobs = true;
};

struct SandboxConfig {
  std::string command = "python3 -m autocode_sandbox";
  int timeout_ms = 10000;
  int max_output_bytes = 65536;
  int pool_size = 2;
};

// Every knob of a run. Defaults follow the reference setup (K = 8 rollouts
// per decision, temperature 1.0, top-p 0.9, three epochs per iteration);
// the rest are documented in docs/config.md.
struct Config {
  // E-step
  int K = 8;
  double alpha = 4.0;
  int subsample_size = 4;  // M, default K/2
  StrategyVariant strategy_variant = StrategyVariant::main_text;
  std::string prefix_guidance = "Let’s first analyze the problem, then consider if python code could help";
  int branch_cap = 0;  // mid-reasoning branch points probed per query (0 = off)

  // M-step
  double clip_eps = 0.2;
  ClipForm clip_form = ClipForm::paper_literal;
  RatioGranularity ratio_granularity = RatioGranularity::sequence;
  double std_floor = 1e-6;
  double ce_weight = 1.0;
  double learning_rate = 0.1;
  int epochs = 3;
  bool refresh_ref_per_epoch = false;

  // Loop
  int iterations = 10;
  std::uint64_t seed = 0;
  int workers = 0;  // 0 = OpenMP default
  bool exact_mode = false;
  int exact_inner_steps = 5;
  bool record_wallclock = false;

  // Simulation
  std::string profile = "balanced";
  int n_queries = 200;
  Coupling coupling = Coupling::first_step;
  std::string init = "uniform";  // uniform | base | imitation
  double base_trigger_bias = 4.0;
  double base_reason_bias = 1.0;
  int rollouts_per_query = 0;  // on-policy group size, 0 = 2K (matched to the E-step)
  int demos_per_query = 32;
  double demo_trigger_confidence = 0.95;
  int sft_iterations = 40;
  double sft_learning_rate = 0.5;

  // Rollout / analysis
  int max_rounds = 3;
  int eval_samples = 16;
  double extremity_low = 0.1;
  double extremity_high = 0.9;

  EndpointConfig endpoint;
  SandboxConfig sandbox;
};

// Throws InvalidArgument when an invariant fails (K >= 1, 0 < clip_eps < 1, ...).
void validate(const Config& cfg);

// Flat "key -> value" view of a config. Keys of nested structs are dotted
// ("endpoint.top_p"). Order is stable, so dumps are byte-reproducible.
json config_snapshot(const Config& cfg);
std::vector<std::string> config_keys();
std::string config_help();

// Assigns one key from its textual form ("0.5", "true", "ppo-min", ...).
void set_config_value(Config& cfg, std::string_view key, std::string_view value);
void set_config_json(Config& cfg, std::string_view key, const json& value);

// 16 hex chars of FNV-1a over the canonical snapshot.
std::string config_hash(const Config& cfg);

// Minimal TOML reader: tables, string/number/bool scalars and string arrays.
// Table headers prefix keys ("[endpoint]" + "top_p" -> "endpoint.top_p").
std::map<std::string, json> parse_toml(std::string_view text);
Config load_config(const std::filesystem::path& path);
Config config_from_toml(std::string_view text);
std::string to_toml(const Config& cfg);

}  // namespace autocode
