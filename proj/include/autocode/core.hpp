#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace autocode {

using json = nlohmann::json;

// A problem instance. `env_ref` indexes into a synthetic suite and is absent
// for queries loaded from a file in LLM mode.
struct Query {
  std::string id;
  std::string prompt;
  std::string gold_answer;
  std::optional<std::size_t> env_ref;

  bool operator==(const Query&) const = default;
};

enum class SegmentKind { reasoning, code, exec_result, final_answer };
enum class ExecStatus { ok, error, timeout };

std::string_view to_string(SegmentKind kind);
std::string_view to_string(ExecStatus status);
SegmentKind parse_segment_kind(std::string_view s);
ExecStatus parse_exec_status(std::string_view s);

struct Segment {
  SegmentKind kind = SegmentKind::reasoning;
  std::string text;
  std::optional<ExecStatus> status;  // set for exec_result only

  static Segment reasoning(std::string text) { return {SegmentKind::reasoning, std::move(text), {}}; }
  static Segment code(std::string text) { return {SegmentKind::code, std::move(text), {}}; }
  static Segment exec_result(std::string text, ExecStatus status) {
    return {SegmentKind::exec_result, std::move(text), status};
  }
  static Segment final_answer(std::string text) { return {SegmentKind::final_answer, std::move(text), {}}; }

  bool operator==(const Segment&) const = default;
};

// Code-trigger decision: c = 0 pure reasoning, c = 1 code integration.
// `position` is the segment index at which the decision applies.
struct Decision {
  int c = 0;
  int position = 0;

  bool operator==(const Decision&) const = default;
};

enum class GuidanceKind { vanilla, prefix_code, forced_c, branch };

// How a trajectory was elicited. Only `vanilla` trajectories have a
// policy-sampled trigger; for the others the decision was imposed.
struct Guidance {
  GuidanceKind kind = GuidanceKind::vanilla;
  int branch_index = 0;  // prefix segment index for `branch`

  std::string to_string() const;
  static Guidance parse(std::string_view s);
  bool operator==(const Guidance&) const = default;
};

struct Trajectory {
  std::string query_id;
  Decision decision;
  Guidance guidance;
  std::vector<Segment> segments;
  int reward = 0;
  std::optional<double> gen_logprob;  // absent when the endpoint reports none
  std::string policy_tag;
  int rounds = 0;

  bool operator==(const Trajectory&) const = default;
};

// Segment grammar: an exec_result directly follows a code segment, and a
// final_answer, if present, is unique and last.
bool segments_well_formed(std::span<const Segment> segments);
int count_exec_results(std::span<const Segment> segments);

// Throws InvalidArgument if any Trajectory invariant is violated.
void validate(const Trajectory& t);

// Binary reward: 1 iff the normalized answers match. Numeric answers
// (integers, decimals, p/q rationals) compare with absolute tolerance 1e-9;
// anything else compares as exact strings after trimming and unboxing.
int grade(std::string_view pred, std::string_view gold);

// Exposed for tests: trim + strip \boxed{...} / $...$ wrappers.
std::string normalize_answer(std::string_view s);
std::optional<double> parse_number(std::string_view s);

// Shortest decimal text that reads back to the same double.
std::string format_double(double v);

void to_json(json& j, const Segment& s);
void from_json(const json& j, Segment& s);
void to_json(json& j, const Decision& d);
void from_json(const json& j, Decision& d);
void to_json(json& j, const Trajectory& t);
void from_json(const json& j, Trajectory& t);
void to_json(json& j, const Query& q);
void from_json(const json& j, Query& q);

}  // namespace autocode
