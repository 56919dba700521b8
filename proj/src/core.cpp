#include "autocode/core.hpp"

#include <charconv>
#include <cmath>

#include "autocode/error.hpp"

namespace autocode {

std::string_view to_string(SegmentKind kind) {
  switch (kind) {
    case SegmentKind::reasoning: return "reasoning";
    case SegmentKind::code: return "code";
    case SegmentKind::exec_result: return "exec_result";
    case SegmentKind::final_answer: return "final_answer";
  }
  return "reasoning";
}

std::string_view to_string(ExecStatus status) {
  switch (status) {
    case ExecStatus::ok: return "ok";
    case ExecStatus::error: return "error";
    case ExecStatus::timeout: return "timeout";
  }
  return "ok";
}

SegmentKind parse_segment_kind(std::string_view s) {
  if (s == "reasoning") return SegmentKind::reasoning;
  if (s == "code") return SegmentKind::code;
  if (s == "exec_result") return SegmentKind::exec_result;
  if (s == "final_answer") return SegmentKind::final_answer;
  throw InvalidArgument("unknown segment kind '" + std::string(s) + "'");
}

ExecStatus parse_exec_status(std::string_view s) {
  if (s == "ok") return ExecStatus::ok;
  if (s == "error") return ExecStatus::error;
  if (s == "timeout") return ExecStatus::timeout;
  throw InvalidArgument("unknown exec status '" + std::string(s) + "'");
}

std::string Guidance::to_string() const {
  switch (kind) {
    case GuidanceKind::vanilla: return "vanilla";
    case GuidanceKind::prefix_code: return "prefix-code";
    case GuidanceKind::forced_c: return "forced-c";
    case GuidanceKind::branch: return "branch(" + std::to_string(branch_index) + ")";
  }
  return "vanilla";
}

Guidance Guidance::parse(std::string_view s) {
  if (s == "vanilla") return {GuidanceKind::vanilla, 0};
  if (s == "prefix-code") return {GuidanceKind::prefix_code, 0};
  if (s == "forced-c") return {GuidanceKind::forced_c, 0};
  if (s.starts_with("branch(") && s.ends_with(")")) {
    auto digits = s.substr(7, s.size() - 8);
    int idx = 0;
    auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), idx);
    if (ec == std::errc{} && ptr == digits.data() + digits.size() && idx >= 0)
      return {GuidanceKind::branch, idx};
  }
  throw InvalidArgument("unknown guidance '" + std::string(s) + "'");
}

bool segments_well_formed(std::span<const Segment> segments) {
  for (std::size_t i = 0; i < segments.size(); ++i) {
    const auto& s = segments[i];
    if (s.kind == SegmentKind::exec_result) {
      if (i == 0 || segments[i - 1].kind != SegmentKind::code) return false;
      if (!s.status) return false;
    } else if (s.status) {
      return false;
    }
    if (s.kind == SegmentKind::final_answer && i + 1 != segments.size()) return false;
  }
  return true;
}

int count_exec_results(std::span<const Segment> segments) {
  int n = 0;
  for (const auto& s : segments) n += s.kind == SegmentKind::exec_result;
  return n;
}

void validate(const Trajectory& t) {
  if (t.reward != 0 && t.reward != 1) throw InvalidArgument("trajectory reward must be 0 or 1");
  if (t.gen_logprob && !(*t.gen_logprob <= 1e-12))
    throw InvalidArgument("trajectory gen_logprob must be <= 0");
  if (t.decision.c != 0 && t.decision.c != 1) throw InvalidArgument("decision c must be 0 or 1");
  if (t.decision.position < 0 ||
      static_cast<std::size_t>(t.decision.position) > t.segments.size())
    throw InvalidArgument("decision position out of range");
  if (!segments_well_formed(t.segments)) throw InvalidArgument("segment grammar violated");
  if (t.rounds != count_exec_results(t.segments))
    throw InvalidArgument("rounds does not match the number of exec_result segments");
}

namespace {

std::string_view trim(std::string_view s) {
  const auto ws = " \t\r\n\f\v";
  auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

// Strips one wrapper layer if the whole string is wrapped; returns false otherwise.
bool strip_wrapper(std::string_view& s) {
  constexpr std::string_view boxed = "\\boxed{";
  if (s.starts_with(boxed) && s.ends_with("}")) {
    int depth = 0;
    for (std::size_t i = boxed.size() - 1; i < s.size(); ++i) {
      if (s[i] == '{') ++depth;
      if (s[i] == '}' && --depth == 0) {
        if (i + 1 != s.size()) return false;  // "\boxed{a} + \boxed{b}"
        s = trim(s.substr(boxed.size(), s.size() - boxed.size() - 1));
        return true;
      }
    }
    return false;
  }
  if (s.size() >= 2 && s.front() == '$' && s.back() == '$') {
    s = trim(s.substr(1, s.size() - 2));
    return true;
  }
  if (s.starts_with("\\(") && s.ends_with("\\)") && s.size() >= 4) {
    s = trim(s.substr(2, s.size() - 4));
    return true;
  }
  return false;
}

std::optional<double> parse_decimal(std::string_view s) {
  s = trim(s);
  if (s.empty()) return std::nullopt;
  bool negate = false;
  if (s.front() == '+' || s.front() == '-') {
    negate = s.front() == '-';
    s.remove_prefix(1);
  }
  if (s.empty() || !(std::isdigit(static_cast<unsigned char>(s.front())) || s.front() == '.'))
    return std::nullopt;
  double v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return negate ? -v : v;
}

}  // namespace

std::string normalize_answer(std::string_view s) {
  s = trim(s);
  while (strip_wrapper(s)) {
  }
  return std::string(s);
}

std::optional<double> parse_number(std::string_view s) {
  auto slash = s.find('/');
  if (slash == std::string_view::npos) return parse_decimal(s);
  if (s.find('/', slash + 1) != std::string_view::npos) return std::nullopt;
  auto num = parse_decimal(s.substr(0, slash));
  auto den = parse_decimal(s.substr(slash + 1));
  if (!num || !den || *den == 0.0) return std::nullopt;
  return *num / *den;
}

int grade(std::string_view pred, std::string_view gold) {
  const auto a = normalize_answer(pred);
  const auto b = normalize_answer(gold);
  const auto x = parse_number(a);
  const auto y = parse_number(b);
  if (x && y) return std::abs(*x - *y) <= 1e-9 ? 1 : 0;
  return a == b ? 1 : 0;
}

void to_json(json& j, const Segment& s) {
  j = json{{"kind", to_string(s.kind)}, {"text", s.text}};
  if (s.status) j["status"] = to_string(*s.status);
}

void from_json(const json& j, Segment& s) {
  s.kind = parse_segment_kind(j.at("kind").get<std::string>());
  s.text = j.at("text").get<std::string>();
  s.status.reset();
  if (auto it = j.find("status"); it != j.end() && !it->is_null())
    s.status = parse_exec_status(it->get<std::string>());
}

void to_json(json& j, const Decision& d) { j = json{{"c", d.c}, {"position", d.position}}; }

void from_json(const json& j, Decision& d) {
  d.c = j.at("c").get<int>();
  d.position = j.at("position").get<int>();
}

void to_json(json& j, const Trajectory& t) {
  j = json{{"query_id", t.query_id},
           {"decision", t.decision},
           {"guidance", t.guidance.to_string()},
           {"segments", t.segments},
           {"reward", t.reward},
           {"gen_logprob", t.gen_logprob ? json(*t.gen_logprob) : json(nullptr)},
           {"policy_tag", t.policy_tag},
           {"rounds", t.rounds}};
}

void from_json(const json& j, Trajectory& t) {
  t.query_id = j.at("query_id").get<std::string>();
  t.decision = j.at("decision").get<Decision>();
  t.guidance = Guidance::parse(j.at("guidance").get<std::string>());
  t.segments = j.at("segments").get<std::vector<Segment>>();
  t.reward = j.at("reward").get<int>();
  const auto& lp = j.at("gen_logprob");
  t.gen_logprob = lp.is_null() ? std::nullopt : std::optional<double>(lp.get<double>());
  t.policy_tag = j.at("policy_tag").get<std::string>();
  t.rounds = j.at("rounds").get<int>();
}

void to_json(json& j, const Query& q) {
  j = json{{"id", q.id}, {"prompt", q.prompt}, {"gold_answer", q.gold_answer}};
  if (q.env_ref) j["env_ref"] = *q.env_ref;
}

void from_json(const json& j, Query& q) {
  q.id = j.at("id").get<std::string>();
  q.prompt = j.value("prompt", std::string{});
  q.gold_answer = j.at("gold_answer").get<std::string>();
  if (q.gold_answer.empty()) throw InvalidArgument("query '" + q.id + "' has an empty gold_answer");
  q.env_ref.reset();
  if (auto it = j.find("env_ref"); it != j.end() && !it->is_null()) q.env_ref = it->get<std::size_t>();
}

std::string format_double(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

}  // namespace autocode
