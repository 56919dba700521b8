#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "autocode/config.hpp"
#include "autocode/core.hpp"
#include "autocode/env.hpp"
#include "autocode/kernels.hpp"
#include "autocode/llm/client.hpp"
#include "autocode/policy.hpp"
#include "autocode/sandbox.hpp"

namespace autocode::rollout {

struct BranchPoint {
  std::size_t source = 0;  // index into the probe's own trajectories
  int prefix_index = 0;    // segment index where the fresh decision applies
};

// Probing plan for one query: K rollouts for each decision arm, with the
// arm's guidance, plus optional branch points.
struct ProbePlan {
  std::string query_id;
  int K = 8;
  std::array<Guidance, 2> guidance{Guidance{GuidanceKind::vanilla, 0}, Guidance{GuidanceKind::prefix_code, 0}};
  std::vector<BranchPoint> branches;
};

void validate(const ProbePlan& plan);

struct SimBackend {
  std::span<const env::SynthQuerySpec> suite;  // indexed like the policy layout
};

struct LlmBackend {
  llm::Client* client = nullptr;
  sandbox::ExecutorPool* executors = nullptr;  // may be null: code is then never executed
  std::span<const Query> queries;
  std::string prefix_guidance;
  int max_rounds = 3;
};

using Backend = std::variant<SimBackend, LlmBackend>;

struct ProbeResult {
  std::vector<Trajectory> trajectories;
  std::array<bool, 2> incomplete{false, false};  // an LLM arm hit a backend failure
  std::vector<std::string> errors;
};

std::string policy_tag(const policy::PolicyParams& p);

// Simulated solution of query q under decision c applied at
// `decision_step`; earlier steps are copied from `prefix` with their
// outcomes. gen_logprob covers the sampled steps only.
Trajectory simulate(const env::SynthQuerySpec& spec, const policy::PolicyParams& p, std::size_t q, int c,
                    Guidance guidance, Rng& rng, int decision_step = 0, const env::SimPath* prefix = nullptr);

// The policy choosing its own trigger; gen_logprob includes the trigger.
Trajectory simulate_vanilla(const env::SynthQuerySpec& spec, const policy::PolicyParams& p, std::size_t q, Rng& rng);

// K trajectories per arm (plus branch rollouts for the plan's branch
// points, run for both arms).
ProbeResult probe(const ProbePlan& plan, const policy::PolicyParams& p, const Backend& backend, Rng& rng);

// K continuations of `source` that share segments [0, t) verbatim with a
// fresh decision at position t: `c` when given, else drawn from the
// trigger head. The imposed or drawn decision is not part of gen_logprob.
std::vector<Trajectory> branch_rollouts(const Trajectory& source, int t, const policy::PolicyParams& p,
                                        const Backend& backend, int K, Rng& rng, std::optional<int> c = {});

// Segment indices after which a branch may start: after each reasoning step
// that is followed by more work than the final answer.
std::vector<int> branch_boundaries(const Trajectory& source);

// Multi-round episode against an endpoint: generate until a code block
// closes, execute it, append the result and continue, up to max_rounds
// executions. `prefill` seeds the assistant turn (prefix guidance).
Trajectory run_episode(const Query& query, llm::Client& client, sandbox::Executor* executor, int max_rounds,
                       const std::string& prefill = "");

// Per-query probing over a whole simulated suite; seeds are derived from
// (seed, query index) so the parallel path matches the serial one.
std::vector<ProbeResult> probe_suite(std::span<const env::SynthQuerySpec> suite, const policy::PolicyParams& p,
                                     int K, int branch_cap, std::uint64_t seed, const kernels::ExecPolicy& ex);

// `n` vanilla rollouts per query.
std::vector<std::vector<Trajectory>> sample_suite(std::span<const env::SynthQuerySpec> suite,
                                                  const policy::PolicyParams& p, int n, std::uint64_t seed,
                                                  const kernels::ExecPolicy& ex);

}  // namespace autocode::rollout
