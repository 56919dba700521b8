#include "autocode/env.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string_view>

#include "autocode/error.hpp"
#include "autocode/jsonl.hpp"

namespace autocode::env {

void validate(const SynthQuerySpec& spec) {
  const int T = spec.steps();
  if (T < 1 || T > kMaxSteps) throw InvalidArgument("query '" + spec.query_id + "': T must lie in [1, 16]");
  if (spec.p_code.size() != spec.p_reason.size())
    throw InvalidArgument("query '" + spec.query_id + "': p_reason and p_code lengths differ");
  auto in_unit = [](double p) { return p >= 0.0 && p <= 1.0; };
  if (!in_unit(spec.gap)) throw InvalidArgument("query '" + spec.query_id + "': gap outside [0, 1]");
  for (int t = 0; t < T; ++t)
    if (!in_unit(spec.p_reason[t]) || !in_unit(spec.p_code[t]))
      throw InvalidArgument("query '" + spec.query_id + "': step probability outside [0, 1]");
}

double step_success(const SynthQuerySpec& spec, int t, Mode mode) {
  return mode == Mode::reason ? spec.p_reason[t] : spec.p_code[t] * (1.0 - spec.gap);
}

double success_prob(const SynthQuerySpec& spec, const ModeSequence& modes) {
  if (static_cast<int>(modes.size()) != spec.steps())
    throw InvalidArgument("mode sequence length " + std::to_string(modes.size()) + " does not match T = " +
                          std::to_string(spec.steps()));
  double p = 1.0;
  for (int t = 0; t < spec.steps(); ++t) p *= step_success(spec, t, modes[t]);
  return p;
}

void sample_step_outcomes(const SynthQuerySpec& spec, const ModeSequence& modes, int from,
                          std::vector<std::uint8_t>& out, Rng& rng) {
  out.resize(modes.size());
  for (int t = from; t < spec.steps(); ++t) out[t] = rng.bernoulli(step_success(spec, t, modes[t])) ? 1 : 0;
}

int sample_outcome(const SynthQuerySpec& spec, const ModeSequence& modes, Rng& rng) {
  if (static_cast<int>(modes.size()) != spec.steps()) throw InvalidArgument("mode sequence length mismatch");
  std::vector<std::uint8_t> ok;
  sample_step_outcomes(spec, modes, 0, ok, rng);
  return std::all_of(ok.begin(), ok.end(), [](std::uint8_t v) { return v == 1; }) ? 1 : 0;
}

double optimal_success(const SynthQuerySpec& spec) {
  double p = 1.0;
  for (int t = 0; t < spec.steps(); ++t)
    p *= std::max(step_success(spec, t, Mode::reason), step_success(spec, t, Mode::code));
  return p;
}

double optimal_success_given(const SynthQuerySpec& spec, int step, Mode mode) {
  double p = 1.0;
  for (int t = 0; t < spec.steps(); ++t)
    p *= t == step ? step_success(spec, t, mode)
                   : std::max(step_success(spec, t, Mode::reason), step_success(spec, t, Mode::code));
  return p;
}

int optimal_first_mode(const SynthQuerySpec& spec) {
  return step_success(spec, 0, Mode::code) > step_success(spec, 0, Mode::reason) ? 1 : 0;
}

ModeSequence optimal_modes(const SynthQuerySpec& spec) {
  ModeSequence m(spec.steps());
  for (int t = 0; t < spec.steps(); ++t)
    m[t] = step_success(spec, t, Mode::code) > step_success(spec, t, Mode::reason) ? Mode::code : Mode::reason;
  return m;
}

Profile parse_profile(std::string_view s) {
  if (s == "balanced") return Profile::balanced;
  if (s == "code-favored") return Profile::code_favored;
  if (s == "reason-favored") return Profile::reason_favored;
  if (s == "mixed-difficulty") return Profile::mixed_difficulty;
  if (s == "exclusive") return Profile::exclusive;
  throw InvalidArgument("unknown suite profile '" + std::string(s) + "'");
}

std::string_view to_string(Profile p) {
  switch (p) {
    case Profile::balanced: return "balanced";
    case Profile::code_favored: return "code-favored";
    case Profile::reason_favored: return "reason-favored";
    case Profile::mixed_difficulty: return "mixed-difficulty";
    case Profile::exclusive: return "exclusive";
  }
  return "balanced";
}

namespace {

std::string make_query_id(int i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "q%05d", i);
  return buf;
}

struct ProfileShape {
  int t_min, t_max;
  double first_code_share;  // P(code is the better first-step mode)
  double later_code_share;  // P(code is the better mode at a later step)
  double best_lo, best_hi;  // effective success of the better mode
  double other_lo, other_hi;
  double first_other_lo, first_other_hi;
};

ProfileShape shape_of(Profile p) {
  switch (p) {
    case Profile::balanced: return {3, 6, 0.5, 0.5, 0.88, 0.99, 0.35, 0.75, 0.25, 0.6};
    case Profile::code_favored: return {3, 6, 0.85, 0.75, 0.88, 0.99, 0.35, 0.75, 0.25, 0.6};
    case Profile::reason_favored: return {3, 6, 0.15, 0.25, 0.88, 0.99, 0.35, 0.75, 0.25, 0.6};
    case Profile::mixed_difficulty: return {1, 8, 0.5, 0.5, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0};
    case Profile::exclusive: return {3, 6, 0.5, 0.5, 0.88, 0.99, 0.35, 0.75, 0.02, 0.15};
  }
  return {};
}

}  // namespace

std::vector<SynthQuerySpec> generate_suite(std::uint64_t seed, int n_queries, Profile profile) {
  if (n_queries < 1) throw InvalidArgument("generate_suite needs n_queries >= 1");
  const auto shape = shape_of(profile);
  std::vector<SynthQuerySpec> suite;
  suite.reserve(n_queries);
  for (int i = 0; i < n_queries; ++i) {
    Rng rng(derive_seed(seed, {0x5017e, static_cast<std::uint64_t>(i)}));
    SynthQuerySpec s;
    s.query_id = make_query_id(i);
    const int T = shape.t_min + static_cast<int>(rng.below(shape.t_max - shape.t_min + 1));
    s.gap = rng.uniform(0.0, 0.05);
    s.p_reason.resize(T);
    s.p_code.resize(T);
    // Per-query difficulty only varies for mixed-difficulty.
    const double difficulty = rng.uniform();
    for (int t = 0; t < T; ++t) {
      const bool first = t == 0;
      const bool code_better = rng.bernoulli(first ? shape.first_code_share : shape.later_code_share);
      double best, other;
      if (profile == Profile::mixed_difficulty) {
        best = 1.0 - rng.uniform(0.005, 0.03 + 0.3 * difficulty);
        other = best * rng.uniform(0.3, 0.8);
      } else {
        best = rng.uniform(shape.best_lo, shape.best_hi);
        other = first ? rng.uniform(shape.first_other_lo, shape.first_other_hi)
                      : rng.uniform(shape.other_lo, shape.other_hi);
      }
      const double eff_code = code_better ? best : other;
      const double eff_reason = code_better ? other : best;
      s.p_reason[t] = eff_reason;
      s.p_code[t] = std::min(1.0, eff_code / (1.0 - s.gap));
    }
    suite.push_back(std::move(s));
  }
  return suite;
}

std::string gold_answer(const SynthQuerySpec& spec) {
  std::uint64_t h = 0;
  for (unsigned char ch : spec.query_id) h = mix64(h ^ ch);
  return std::to_string(1000 + h % 9000);
}

std::vector<Query> suite_queries(std::span<const SynthQuerySpec> suite) {
  std::vector<Query> out;
  out.reserve(suite.size());
  for (std::size_t i = 0; i < suite.size(); ++i) {
    const auto& s = suite[i];
    out.push_back(Query{s.query_id,
                        "Synthetic problem " + s.query_id + " with " + std::to_string(s.steps()) + " steps.",
                        gold_answer(s), i});
  }
  return out;
}

void to_json(json& j, const SynthQuerySpec& s) {
  j = json{{"query_id", s.query_id}, {"T", s.steps()}, {"p_reason", s.p_reason}, {"p_code", s.p_code}, {"gap", s.gap}};
}

void from_json(const json& j, SynthQuerySpec& s) {
  s.query_id = j.at("query_id").get<std::string>();
  s.p_reason = j.at("p_reason").get<std::vector<double>>();
  s.p_code = j.at("p_code").get<std::vector<double>>();
  s.gap = j.at("gap").get<double>();
  if (auto it = j.find("T"); it != j.end() && it->get<int>() != s.steps())
    throw InvalidArgument("query '" + s.query_id + "': T disagrees with the probability vectors");
  validate(s);
}

void write_suite(std::span<const SynthQuerySpec> suite, const std::filesystem::path& path) {
  write_jsonl(to_json_records(suite), path);
}

std::vector<SynthQuerySpec> read_suite(const std::filesystem::path& path) {
  auto records = read_jsonl(path);
  std::vector<SynthQuerySpec> out;
  for (std::size_t i = 0; i < records.size(); ++i) {
    try {
      out.push_back(records[i].get<SynthQuerySpec>());
    } catch (const json::exception& e) {
      throw ParseError(std::string("invalid suite record: ") + e.what(), i + 1);
    }
  }
  return out;
}

// --- simulated trajectories -------------------------------------------------

namespace {

constexpr std::string_view kOk = "ok";
constexpr std::string_view kFail = "fail";

std::string step_label(int t, Mode m) {
  return "step " + std::to_string(t) + (m == Mode::reason ? " reason" : " code");
}

}  // namespace

std::vector<Segment> render_steps(const SynthQuerySpec& spec, const SimPath& path) {
  std::vector<Segment> segs;
  bool all_ok = true;
  for (std::size_t t = 0; t < path.modes.size(); ++t) {
    const bool ok = path.step_ok[t] != 0;
    all_ok = all_ok && ok;
    if (path.modes[t] == Mode::reason) {
      segs.push_back(Segment::reasoning(step_label(static_cast<int>(t), Mode::reason) + ": " +
                                        std::string(ok ? kOk : kFail)));
    } else {
      segs.push_back(Segment::code(step_label(static_cast<int>(t), Mode::code)));
      segs.push_back(Segment::exec_result(std::string(ok ? kOk : kFail), ExecStatus::ok));
    }
  }
  const auto gold = gold_answer(spec);
  segs.push_back(Segment::final_answer(all_ok ? gold : std::to_string(std::stoll(gold) + 1)));
  return segs;
}

int segment_index_of_step(const SimPath& path, int step) {
  int idx = 0;
  for (int t = 0; t < step; ++t) idx += path.modes[t] == Mode::reason ? 1 : 2;
  return idx;
}

DecodedPath decode_segments(std::span<const Segment> segments) {
  DecodedPath d;
  for (std::size_t i = 0; i < segments.size(); ++i) {
    const auto& s = segments[i];
    switch (s.kind) {
      case SegmentKind::reasoning: {
        if (!s.text.starts_with("step ")) throw InvalidArgument("not a simulated reasoning step: '" + s.text + "'");
        d.step_start.push_back(static_cast<int>(i));
        d.path.modes.push_back(Mode::reason);
        d.path.step_ok.push_back(s.text.ends_with(kOk) ? 1 : 0);
        break;
      }
      case SegmentKind::code: {
        if (i + 1 >= segments.size() || segments[i + 1].kind != SegmentKind::exec_result)
          throw InvalidArgument("simulated code step without its result");
        d.step_start.push_back(static_cast<int>(i));
        d.path.modes.push_back(Mode::code);
        d.path.step_ok.push_back(segments[i + 1].text == kOk ? 1 : 0);
        ++i;
        break;
      }
      case SegmentKind::exec_result:
        throw InvalidArgument("exec_result without a preceding code step");
      case SegmentKind::final_answer:
        d.has_final = true;
        break;
    }
  }
  return d;
}

int step_of_position(const DecodedPath& decoded, int position) {
  for (std::size_t t = 0; t < decoded.step_start.size(); ++t)
    if (decoded.step_start[t] == position) return static_cast<int>(t);
  // A position just past the last step (at the final answer) means no steps remain.
  const int n = static_cast<int>(decoded.step_start.size());
  int end = n == 0 ? 0 : decoded.step_start.back() + (decoded.path.modes.back() == Mode::reason ? 1 : 2);
  if (position == end) return n;
  throw InvalidArgument("position " + std::to_string(position) + " is not a step boundary");
}

}  // namespace autocode::env
