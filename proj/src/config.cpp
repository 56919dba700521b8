#include "autocode/config.hpp"

#include <charconv>
#include <cmath>
#include <functional>
#include <sstream>

#include "autocode/error.hpp"
#include "autocode/jsonl.hpp"

namespace autocode {

std::string_view to_string(StrategyVariant v) {
  return v == StrategyVariant::main_text ? "main-text" : "appendix-prior";
}
std::string_view to_string(RatioGranularity g) {
  return g == RatioGranularity::sequence ? "sequence" : "per-step";
}
std::string_view to_string(ClipForm f) { return f == ClipForm::paper_literal ? "paper-literal" : "ppo-min"; }
std::string_view to_string(Coupling c) { return c == Coupling::first_step ? "first-step" : "free"; }

namespace {

template <class E>
E parse_enum(const json& v, std::initializer_list<std::pair<std::string_view, E>> options, std::string_view key) {
  const auto s = v.get<std::string>();
  for (const auto& [name, value] : options)
    if (s == name) return value;
  throw InvalidArgument("invalid value '" + s + "' for config key '" + std::string(key) + "'");
}

int as_int(const json& v, std::string_view key) {
  if (v.is_number_integer()) return v.get<int>();
  if (v.is_number_float() && std::floor(v.get<double>()) == v.get<double>()) return static_cast<int>(v.get<double>());
  throw InvalidArgument("config key '" + std::string(key) + "' expects an integer");
}

double as_double(const json& v, std::string_view key) {
  if (v.is_number()) return v.get<double>();
  throw InvalidArgument("config key '" + std::string(key) + "' expects a number");
}

bool as_bool(const json& v, std::string_view key) {
  if (v.is_boolean()) return v.get<bool>();
  throw InvalidArgument("config key '" + std::string(key) + "' expects true or false");
}

std::string as_string(const json& v, std::string_view key) {
  if (v.is_string()) return v.get<std::string>();
  throw InvalidArgument("config key '" + std::string(key) + "' expects a string");
}

struct Field {
  std::string key;
  std::string help;
  std::function<json(const Config&)> get;
  std::function<void(Config&, const json&)> set;
};

#define AC_INT(name, member, help)                                                         \
  Field{name, help, [](const Config& c) { return json(c.member); },                       \
        [](Config& c, const json& v) { c.member = as_int(v, name); }}
#define AC_DBL(name, member, help)                                                         \
  Field{name, help, [](const Config& c) { return json(c.member); },                       \
        [](Config& c, const json& v) { c.member = as_double(v, name); }}
#define AC_BOOL(name, member, help)                                                        \
  Field{name, help, [](const Config& c) { return json(c.member); },                       \
        [](Config& c, const json& v) { c.member = as_bool(v, name); }}
#define AC_STR(name, member, help)                                                         \
  Field{name, help, [](const Config& c) { return json(c.member); },                       \
        [](Config& c, const json& v) { c.member = as_string(v, name); }}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      AC_INT("K", K, "rollouts per (query, decision) in the E-step probe"),
      AC_DBL("alpha", alpha, "reference-strategy temperature (>= 0)"),
      AC_INT("subsample_size", subsample_size, "M: curated examples drawn per query"),
      Field{"strategy_variant", "main-text | appendix-prior",
            [](const Config& c) { return json(to_string(c.strategy_variant)); },
            [](Config& c, const json& v) {
              c.strategy_variant = parse_enum<StrategyVariant>(
                  v, {{"main-text", StrategyVariant::main_text}, {"appendix-prior", StrategyVariant::appendix_prior}},
                  "strategy_variant");
            }},
      AC_STR("prefix_guidance", prefix_guidance, "guidance text for the code-probing arm"),
      AC_INT("branch_cap", branch_cap, "mid-reasoning branch points probed per query (0 = off)"),
      AC_DBL("clip_eps", clip_eps, "ratio clip epsilon, 0 < eps < 1"),
      Field{"clip_form", "paper-literal | ppo-min",
            [](const Config& c) { return json(to_string(c.clip_form)); },
            [](Config& c, const json& v) {
              c.clip_form = parse_enum<ClipForm>(
                  v, {{"paper-literal", ClipForm::paper_literal}, {"ppo-min", ClipForm::ppo_min}}, "clip_form");
            }},
      Field{"ratio_granularity", "sequence | per-step",
            [](const Config& c) { return json(to_string(c.ratio_granularity)); },
            [](Config& c, const json& v) {
              c.ratio_granularity = parse_enum<RatioGranularity>(
                  v, {{"sequence", RatioGranularity::sequence}, {"per-step", RatioGranularity::per_step}},
                  "ratio_granularity");
            }},
      AC_DBL("std_floor", std_floor, "lower bound on the per-query reward std"),
      AC_DBL("ce_weight", ce_weight, "weight of the trigger cross-entropy term"),
      AC_DBL("learning_rate", learning_rate, "gradient-ascent step size"),
      AC_INT("epochs", epochs, "M-step passes over the curated set per iteration"),
      AC_BOOL("refresh_ref_per_epoch", refresh_ref_per_epoch, "re-snapshot the reference policy every epoch"),
      AC_INT("iterations", iterations, "EM (or baseline) iterations"),
      Field{"seed", "master seed", [](const Config& c) { return json(c.seed); },
            [](Config& c, const json& v) {
              if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<long long>() < 0))
                throw InvalidArgument("config key 'seed' expects a non-negative integer");
              c.seed = v.get<std::uint64_t>();
            }},
      AC_INT("workers", workers, "worker threads (0 = OpenMP default)"),
      AC_BOOL("exact_mode", exact_mode, "use exact Q and the exact M-step (simulation only)"),
      AC_INT("exact_inner_steps", exact_inner_steps, "gradient steps per exact M-step"),
      AC_BOOL("record_wallclock", record_wallclock, "fill wallclock_s in the metrics trace"),
      AC_STR("profile", profile, "suite profile: balanced | code-favored | reason-favored | mixed-difficulty | exclusive"),
      AC_INT("n_queries", n_queries, "queries in a generated suite"),
      Field{"coupling", "first-step | free",
            [](const Config& c) { return json(to_string(c.coupling)); },
            [](Config& c, const json& v) {
              c.coupling = parse_enum<Coupling>(v, {{"first-step", Coupling::first_step}, {"free", Coupling::free}},
                                                "coupling");
            }},
      AC_STR("init", init, "initial policy: uniform | base | imitation"),
      AC_DBL("base_trigger_bias", base_trigger_bias, "base init: logit margin against triggering code"),
      AC_DBL("base_reason_bias", base_reason_bias, "base init: reasoning-mode logit margin"),
      AC_INT("rollouts_per_query", rollouts_per_query, "on-policy group size (0 = 2K)"),
      AC_INT("demos_per_query", demos_per_query, "demonstrations sampled per query for imitation"),
      AC_DBL("demo_trigger_confidence", demo_trigger_confidence, "demonstrator probability of its preferred decision"),
      AC_INT("sft_iterations", sft_iterations, "imitation steps used for the imitation init"),
      AC_DBL("sft_learning_rate", sft_learning_rate, "imitation step size"),
      AC_INT("max_rounds", max_rounds, "execution rounds per episode"),
      AC_INT("eval_samples", eval_samples, "samples per query and arm in eval"),
      AC_DBL("extremity_low", extremity_low, "invocation rate at or below which a query counts as extreme"),
      AC_DBL("extremity_high", extremity_high, "invocation rate at or above which a query counts as extreme"),
      AC_STR("endpoint.base_url", endpoint.base_url, "OpenAI-compatible server root"),
      AC_STR("endpoint.model", endpoint.model, "model name sent with each request"),
      AC_STR("endpoint.api_key_env", endpoint.api_key_env, "environment variable holding the bearer token"),
      AC_DBL("endpoint.temperature", endpoint.temperature, "sampling temperature"),
      AC_DBL("endpoint.top_p", endpoint.top_p, "nucleus sampling mass"),
      AC_INT("endpoint.max_tokens", endpoint.max_tokens, "completion token cap"),
      Field{"endpoint.stop", "extra stop sequences", [](const Config& c) { return json(c.endpoint.stop); },
            [](Config& c, const json& v) {
              if (!v.is_array()) throw InvalidArgument("config key 'endpoint.stop' expects an array of strings");
              c.endpoint.stop = v.get<std::vector<std::string>>();
            }},
      AC_INT("endpoint.timeout_ms", endpoint.timeout_ms, "request timeout"),
      AC_INT("endpoint.max_parallel", endpoint.max_parallel, "in-flight request cap"),
      AC_INT("endpoint.max_retries", endpoint.max_retries, "retries on transient failures"),
      AC_INT("endpoint.backoff_base_ms", endpoint.backoff_base_ms, "exponential backoff base"),
      AC_BOOL("endpoint.assistant_prefill", endpoint.assistant_prefill, "send guidance as assistant prefill"),
      AC_BOOL("endpoint.request_logprobs", endpoint.request_logprobs, "ask the server for token logprobs"),
      AC_STR("sandbox.command", sandbox.command, "interpreter worker command line"),
      AC_INT("sandbox.timeout_ms", sandbox.timeout_ms, "per-snippet wall-clock limit"),
      AC_INT("sandbox.max_output_bytes", sandbox.max_output_bytes, "stdout cap per snippet"),
      AC_INT("sandbox.pool_size", sandbox.pool_size, "worker processes"),
  };
  return table;
}

#undef AC_INT
#undef AC_DBL
#undef AC_BOOL
#undef AC_STR

const Field& field(std::string_view key) {
  for (const auto& f : fields())
    if (f.key == key) return f;
  throw InvalidArgument("unknown config key '" + std::string(key) + "'");
}

// Parses a scalar written on the command line. Quoted or non-numeric text is
// a string; "true"/"false" are booleans.
json scalar_from_text(std::string_view text) {
  if (text == "true") return true;
  if (text == "false") return false;
  if (text.size() >= 2 && text.front() == '"' && text.back() == '"') return std::string(text.substr(1, text.size() - 2));
  if (!text.empty() && text.front() == '[') return json::parse(text);
  long long i = 0;
  auto [p1, e1] = std::from_chars(text.data(), text.data() + text.size(), i);
  if (e1 == std::errc{} && p1 == text.data() + text.size()) return i;
  double d = 0;
  auto [p2, e2] = std::from_chars(text.data(), text.data() + text.size(), d);
  if (e2 == std::errc{} && p2 == text.data() + text.size()) return d;
  return std::string(text);
}

}  // namespace

void validate(const Config& c) {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw InvalidArgument(std::string("invalid config: ") + what);
  };
  require(c.K >= 1, "K must be >= 1");
  require(c.subsample_size >= 1, "subsample_size must be >= 1");
  require(c.alpha >= 0 && std::isfinite(c.alpha), "alpha must be finite and >= 0");
  require(c.clip_eps > 0 && c.clip_eps < 1, "clip_eps must lie in (0, 1)");
  require(c.std_floor > 0, "std_floor must be > 0");
  require(c.learning_rate >= 0, "learning_rate must be >= 0");
  require(c.epochs >= 0, "epochs must be >= 0");
  require(c.iterations >= 0, "iterations must be >= 0");
  require(c.max_rounds >= 1, "max_rounds must be >= 1");
  require(c.eval_samples >= 1, "eval_samples must be >= 1");
  require(c.n_queries >= 1, "n_queries must be >= 1");
  require(c.extremity_low >= 0 && c.extremity_low < c.extremity_high && c.extremity_high <= 1,
          "extremity thresholds must satisfy 0 <= low < high <= 1");
  require(c.demo_trigger_confidence >= 0 && c.demo_trigger_confidence <= 1,
          "demo_trigger_confidence must lie in [0, 1]");
  require(c.endpoint.temperature >= 0, "endpoint.temperature must be >= 0");
  require(c.endpoint.top_p > 0 && c.endpoint.top_p <= 1, "endpoint.top_p must lie in (0, 1]");
  require(c.endpoint.max_parallel >= 1, "endpoint.max_parallel must be >= 1");
  require(c.endpoint.max_retries >= 0, "endpoint.max_retries must be >= 0");
  require(c.sandbox.timeout_ms > 0 && c.sandbox.max_output_bytes > 0, "sandbox limits must be positive");
  require(c.init == "uniform" || c.init == "base" || c.init == "imitation", "init must be uniform, base or imitation");
}

json config_snapshot(const Config& cfg) {
  json out = json::object();
  for (const auto& f : fields()) out[f.key] = f.get(cfg);
  return out;
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& f : fields()) keys.push_back(f.key);
  return keys;
}

std::string config_help() {
  std::ostringstream os;
  const Config defaults;
  for (const auto& f : fields()) os << "  " << f.key << " = " << f.get(defaults).dump() << "    # " << f.help << "\n";
  return os.str();
}

void set_config_json(Config& cfg, std::string_view key, const json& value) { field(key).set(cfg, value); }

void set_config_value(Config& cfg, std::string_view key, std::string_view value) {
  const auto& f = field(key);
  json v = scalar_from_text(value);
  // String-typed keys accept bare words that happen to look numeric.
  if (f.get(Config{}).is_string() && !v.is_string()) v = std::string(value);
  if (f.get(Config{}).is_number_float() && v.is_number_integer()) v = v.get<double>();
  f.set(cfg, v);
}

std::string config_hash(const Config& cfg) {
  const auto text = config_snapshot(cfg).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace {

std::string_view trim_ws(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// Reads a basic TOML string starting at s[pos] == '"'; advances pos past it.
std::string read_toml_string(std::string_view s, std::size_t& pos, std::size_t line) {
  std::string out;
  ++pos;
  while (pos < s.size() && s[pos] != '"') {
    char ch = s[pos++];
    if (ch == '\\') {
      if (pos >= s.size()) break;
      char esc = s[pos++];
      switch (esc) {
        case 'n': out += '\n'; break;
        case 't': out += '\t'; break;
        case 'r': out += '\r'; break;
        case '"': out += '"'; break;
        case '\\': out += '\\'; break;
        default: throw ParseError("unsupported escape in TOML string", line);
      }
    } else {
      out += ch;
    }
  }
  if (pos >= s.size()) throw ParseError("unterminated TOML string", line);
  ++pos;
  return out;
}

json read_toml_value(std::string_view s, std::size_t line) {
  s = trim_ws(s);
  if (s.empty()) throw ParseError("missing TOML value", line);
  std::size_t pos = 0;
  json value;
  if (s[0] == '"') {
    value = read_toml_string(s, pos, line);
  } else if (s[0] == '[') {
    value = json::array();
    ++pos;
    while (true) {
      while (pos < s.size() && (s[pos] == ' ' || s[pos] == '\t')) ++pos;
      if (pos < s.size() && s[pos] == ']') {
        ++pos;
        break;
      }
      if (pos >= s.size() || s[pos] != '"') throw ParseError("only arrays of strings are supported", line);
      value.push_back(read_toml_string(s, pos, line));
      while (pos < s.size() && (s[pos] == ' ' || s[pos] == '\t')) ++pos;
      if (pos < s.size() && s[pos] == ',') ++pos;
    }
  } else {
    auto end = s.find('#');
    auto word = trim_ws(s.substr(0, end));
    pos = s.size();
    if (word == "true") return true;
    if (word == "false") return false;
    std::string cleaned;
    for (char ch : word)
      if (ch != '_') cleaned += ch;
    long long i = 0;
    auto [p1, e1] = std::from_chars(cleaned.data(), cleaned.data() + cleaned.size(), i);
    if (e1 == std::errc{} && p1 == cleaned.data() + cleaned.size()) return i;
    double d = 0;
    const char* begin = cleaned.data();
    if (!cleaned.empty() && cleaned[0] == '+') ++begin;
    auto [p2, e2] = std::from_chars(begin, cleaned.data() + cleaned.size(), d);
    if (e2 == std::errc{} && p2 == cleaned.data() + cleaned.size()) return d;
    throw ParseError("unrecognized TOML value '" + std::string(word) + "'", line);
  }
  auto rest = trim_ws(s.substr(pos));
  if (!rest.empty() && rest[0] != '#') throw ParseError("trailing characters after TOML value", line);
  return value;
}

}  // namespace

std::map<std::string, json> parse_toml(std::string_view text) {
  std::map<std::string, json> out;
  std::string table;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    auto line = trim_ws(text.substr(pos, end - pos));
    pos = end + 1;
    ++line_no;
    if (line.empty() || line[0] == '#') {
      if (end == text.size()) break;
      continue;
    }
    if (line[0] == '[') {
      auto close = line.find(']');
      if (close == std::string_view::npos) throw ParseError("unterminated TOML table header", line_no);
      table = std::string(trim_ws(line.substr(1, close - 1)));
    } else {
      auto eq = line.find('=');
      if (eq == std::string_view::npos) throw ParseError("expected key = value", line_no);
      auto key = std::string(trim_ws(line.substr(0, eq)));
      if (key.size() >= 2 && key.front() == '"' && key.back() == '"') key = key.substr(1, key.size() - 2);
      if (!table.empty()) key = table + "." + key;
      if (out.count(key)) throw ParseError("duplicate TOML key '" + key + "'", line_no);
      out[key] = read_toml_value(line.substr(eq + 1), line_no);
    }
    if (end == text.size()) break;
  }
  return out;
}

Config config_from_toml(std::string_view text) {
  Config cfg;
  for (const auto& [key, value] : parse_toml(text)) {
    json v = value;
    if (field(key).get(Config{}).is_number_float() && v.is_number_integer()) v = v.get<double>();
    set_config_json(cfg, key, v);
  }
  validate(cfg);
  return cfg;
}

Config load_config(const std::filesystem::path& path) { return config_from_toml(read_text_file(path)); }

std::string to_toml(const Config& cfg) {
  std::ostringstream os;
  std::string current;
  for (const auto& f : fields()) {
    auto dot = f.key.find('.');
    std::string table = dot == std::string::npos ? "" : f.key.substr(0, dot);
    std::string name = dot == std::string::npos ? f.key : f.key.substr(dot + 1);
    if (table != current) {
      os << "\n[" << table << "]\n";
      current = table;
    }
    os << name << " = " << f.get(cfg).dump() << "\n";
  }
  return os.str();
}

}  // namespace autocode
