#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "autocode/core.hpp"
#include "autocode/rng.hpp"

namespace autocode::env {

enum class Mode : std::uint8_t { reason = 0, code = 1 };
using ModeSequence = std::vector<Mode>;

inline constexpr int kMaxSteps = 16;

// One synthetic query: T solution steps, each solved by reasoning with
// probability p_reason[t] or by code with p_code[t] * (1 - gap).
struct SynthQuerySpec {
  std::string query_id;
  std::vector<double> p_reason;
  std::vector<double> p_code;
  double gap = 0.0;

  int steps() const { return static_cast<int>(p_reason.size()); }
  bool operator==(const SynthQuerySpec&) const = default;
};

void validate(const SynthQuerySpec& spec);

// Success probability of step t under `mode`.
double step_success(const SynthQuerySpec& spec, int t, Mode mode);

// Product of per-step success probabilities. Throws InvalidArgument on a
// length mismatch.
double success_prob(const SynthQuerySpec& spec, const ModeSequence& modes);

// Bernoulli draw with success_prob, realised as per-step draws so that
// partial solutions carry their own outcomes.
int sample_outcome(const SynthQuerySpec& spec, const ModeSequence& modes, Rng& rng);

// Per-step outcomes for steps [from, T); earlier entries of `out` are kept.
void sample_step_outcomes(const SynthQuerySpec& spec, const ModeSequence& modes, int from,
                          std::vector<std::uint8_t>& out, Rng& rng);

// Best achievable success probability: max over all 2^T mode sequences.
double optimal_success(const SynthQuerySpec& spec);
// Best achievable when the mode at `step` is pinned (first-step coupling).
double optimal_success_given(const SynthQuerySpec& spec, int step, Mode mode);
// 1 if code is the better mode for the first step.
int optimal_first_mode(const SynthQuerySpec& spec);
ModeSequence optimal_modes(const SynthQuerySpec& spec);

enum class Profile { balanced, code_favored, reason_favored, mixed_difficulty, exclusive };
Profile parse_profile(std::string_view s);
std::string_view to_string(Profile p);

// Deterministic suite under `seed`. "balanced" makes the better first-step
// mode code for about half the queries, with a clear margin either way;
// "exclusive" is balanced with the worse first-step mode rarely succeeding,
// so only one decision is viable per query.
std::vector<SynthQuerySpec> generate_suite(std::uint64_t seed, int n_queries, Profile profile);

// Query records for a suite: id, a templated prompt and the gold answer.
std::vector<Query> suite_queries(std::span<const SynthQuerySpec> suite);
std::string gold_answer(const SynthQuerySpec& spec);

void to_json(json& j, const SynthQuerySpec& s);
void from_json(const json& j, SynthQuerySpec& s);
void write_suite(std::span<const SynthQuerySpec> suite, const std::filesystem::path& path);
std::vector<SynthQuerySpec> read_suite(const std::filesystem::path& path);

// --- simulated trajectories -------------------------------------------------
//
// A simulated solution renders each step as segments: a reasoning step is one
// Reasoning segment, a code step is a Code segment followed by its ExecResult.
// Step outcomes are embedded in the text so that a prefix of a trajectory
// carries the outcomes of the steps it contains.

struct SimPath {
  ModeSequence modes;
  std::vector<std::uint8_t> step_ok;  // per step, 1 = succeeded
};

std::vector<Segment> render_steps(const SynthQuerySpec& spec, const SimPath& path);
// Segment index where step `step` starts (== segments before it).
int segment_index_of_step(const SimPath& path, int step);

// Recovers modes, outcomes and the step index of every segment boundary.
struct DecodedPath {
  SimPath path;
  std::vector<int> step_start;  // segment index where each step begins
  bool has_final = false;
};
DecodedPath decode_segments(std::span<const Segment> segments);

// Step index at which a decision placed at segment `position` applies.
int step_of_position(const DecodedPath& decoded, int position);

}  // namespace autocode::env
