#include "autocode/rollout.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <thread>

#include "autocode/error.hpp"
#include "autocode/llm/segments.hpp"

namespace autocode::rollout {

void validate(const ProbePlan& plan) {
  if (plan.K < 1) throw InvalidArgument("probe plan K must be >= 1");
  if (plan.query_id.empty()) throw InvalidArgument("probe plan without query id");
}

std::string policy_tag(const policy::PolicyParams& p) { return "v" + std::to_string(p.version); }

Trajectory simulate(const env::SynthQuerySpec& spec, const policy::PolicyParams& p, std::size_t q, int c,
                    Guidance guidance, Rng& rng, int decision_step, const env::SimPath* prefix) {
  if (decision_step > 0 && (!prefix || static_cast<int>(prefix->modes.size()) < decision_step))
    throw InvalidArgument("simulate: prefix shorter than the decision step");
  std::span<const env::Mode> prefix_modes;
  if (prefix) prefix_modes = std::span<const env::Mode>(prefix->modes.data(), decision_step);
  auto sol = policy::sample_solution(p, q, c, rng, decision_step, prefix_modes);

  env::SimPath path;
  path.modes = std::move(sol.modes);
  path.step_ok.assign(path.modes.size(), 0);
  for (int t = 0; t < decision_step; ++t) path.step_ok[t] = prefix->step_ok[t];
  env::sample_step_outcomes(spec, path.modes, decision_step, path.step_ok, rng);

  Trajectory tr;
  tr.query_id = spec.query_id;
  tr.decision = {c, env::segment_index_of_step(path, decision_step)};
  tr.guidance = guidance;
  tr.segments = env::render_steps(spec, path);
  tr.reward = grade(tr.segments.back().text, env::gold_answer(spec));
  tr.gen_logprob = sol.gen_logprob;
  tr.policy_tag = policy_tag(p);
  tr.rounds = count_exec_results(tr.segments);
  return tr;
}

Trajectory simulate_vanilla(const env::SynthQuerySpec& spec, const policy::PolicyParams& p, std::size_t q, Rng& rng) {
  const int c = policy::sample_decision(p, q, rng);
  auto tr = simulate(spec, p, q, c, Guidance{GuidanceKind::vanilla, 0}, rng);
  *tr.gen_logprob += std::log(p.decision_prob(q)[c]);
  return tr;
}

std::vector<int> branch_boundaries(const Trajectory& source) {
  std::vector<int> out;
  const int n = static_cast<int>(source.segments.size());
  for (int i = 0; i + 1 < n; ++i)
    if (source.segments[i].kind == SegmentKind::reasoning && source.segments[i + 1].kind != SegmentKind::final_answer)
      out.push_back(i + 1);
  return out;
}

namespace {

const Query& find_query(std::span<const Query> queries, const std::string& id) {
  for (const auto& q : queries)
    if (q.id == id) return q;
  throw UnknownQuery(id);
}

// Runs `n` LLM episodes with at most the client's parallelism in flight.
void run_llm_arm(const LlmBackend& b, const Query& query, const std::string& prefill, int n, int c, Guidance g,
                 std::vector<Trajectory>& out, bool& incomplete, std::vector<std::string>& errors) {
  std::vector<std::optional<Trajectory>> slots(n);
  std::vector<std::string> slot_errors(n);
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int i = next++; i < n; i = next++) {
      try {
        Trajectory tr;
        if (b.executors) {
          auto lease = b.executors->acquire();
          tr = run_episode(query, *b.client, &*lease, b.max_rounds, prefill);
        } else {
          tr = run_episode(query, *b.client, nullptr, b.max_rounds, prefill);
        }
        tr.decision.c = c;
        tr.guidance = g;
        slots[i] = std::move(tr);
      } catch (const Error& e) {
        slot_errors[i] = e.what();
      }
    }
  };
  const int threads = std::min(n, std::max(1, b.client->config().max_parallel));
  std::vector<std::thread> pool;
  for (int i = 0; i < threads; ++i) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  for (int i = 0; i < n; ++i) {
    if (slots[i]) {
      out.push_back(std::move(*slots[i]));
    } else {
      incomplete = true;
      errors.push_back(query.id + " arm c=" + std::to_string(c) + ": " + slot_errors[i]);
    }
  }
}

}  // namespace

std::vector<Trajectory> branch_rollouts(const Trajectory& source, int t, const policy::PolicyParams& p,
                                        const Backend& backend, int K, Rng& rng, std::optional<int> c) {
  if (t <= 0 || t >= static_cast<int>(source.segments.size()))
    throw InvalidArgument("branch prefix index " + std::to_string(t) + " outside (0, " +
                          std::to_string(source.segments.size()) + ")");
  if (K < 1) throw InvalidArgument("branch K must be >= 1");
  const Guidance g{GuidanceKind::branch, t};
  std::vector<Trajectory> out;
  if (const auto* sim = std::get_if<SimBackend>(&backend)) {
    const auto q = p.layout->find(source.query_id);
    const auto decoded = env::decode_segments(source.segments);
    const int step = env::step_of_position(decoded, t);
    for (int k = 0; k < K; ++k) {
      const int ck = c ? *c : policy::sample_decision(p, q, rng);
      out.push_back(simulate(sim->suite[q], p, q, ck, g, rng, step, &decoded.path));
    }
    return out;
  }
  const auto& b = std::get<LlmBackend>(backend);
  const auto& query = find_query(b.queries, source.query_id);
  std::string prefill =
      llm::render_segments(std::span<const Segment>(source.segments.data(), static_cast<std::size_t>(t))) + "\n";
  if (c && *c == 1) prefill += b.prefix_guidance;
  bool incomplete = false;
  std::vector<std::string> errors;
  run_llm_arm(b, query, prefill, K, c.value_or(0), g, out, incomplete, errors);
  if (!c)
    for (auto& tr : out) tr.decision.c = count_exec_results(tr.segments) > 0 ? 1 : 0;
  for (auto& tr : out) tr.decision.position = t;
  if (incomplete) throw llm::TransportError("branch rollouts failed: " + errors.front());
  return out;
}

ProbeResult probe(const ProbePlan& plan, const policy::PolicyParams& p, const Backend& backend, Rng& rng) {
  validate(plan);
  ProbeResult res;
  if (const auto* sim = std::get_if<SimBackend>(&backend)) {
    const auto q = p.layout->find(plan.query_id);
    for (int c = 0; c < 2; ++c) {
      // In simulation the c = 0 arm imposes its decision rather than letting
      // the trigger head sample it, so it is tagged forced-c.
      Guidance g = plan.guidance[c];
      if (g.kind == GuidanceKind::vanilla) g.kind = GuidanceKind::forced_c;
      for (int k = 0; k < plan.K; ++k) res.trajectories.push_back(simulate(sim->suite[q], p, q, c, g, rng));
    }
  } else {
    const auto& b = std::get<LlmBackend>(backend);
    const auto& query = find_query(b.queries, plan.query_id);
    for (int c = 0; c < 2; ++c) {
      const std::string prefill = plan.guidance[c].kind == GuidanceKind::prefix_code ? b.prefix_guidance : "";
      run_llm_arm(b, query, prefill, plan.K, c, plan.guidance[c], res.trajectories, res.incomplete[c], res.errors);
    }
  }
  const auto base = res.trajectories;
  for (const auto& bp : plan.branches) {
    if (bp.source >= base.size()) throw InvalidArgument("branch source index out of range");
    for (int c = 0; c < 2; ++c) {
      try {
        auto more = branch_rollouts(base[bp.source], bp.prefix_index, p, backend, plan.K, rng, c);
        res.trajectories.insert(res.trajectories.end(), more.begin(), more.end());
      } catch (const llm::TransportError& e) {
        res.incomplete[c] = true;
        res.errors.push_back(e.what());
      }
    }
  }
  return res;
}

Trajectory run_episode(const Query& query, llm::Client& client, sandbox::Executor* executor, int max_rounds,
                       const std::string& prefill) {
  if (max_rounds < 1) throw InvalidArgument("max_rounds must be >= 1");
  std::string assistant = prefill;
  int rounds = 0;
  double logprob = 0.0;
  bool have_logprob = true;
  for (;;) {
    const auto comp = client.generate({query.prompt, assistant, {"```output"}});
    if (comp.logprob_sum)
      logprob += *comp.logprob_sum;
    else
      have_logprob = false;
    assistant += comp.text;
    const auto parsed = llm::parse_segments(assistant);
    const bool closed_code = !parsed.segments.empty() && parsed.segments.back().kind == SegmentKind::code &&
                             !parsed.flags.unterminated_fence;
    if (!closed_code || comp.finish_reason != "stop" || comp.text.empty() || rounds >= max_rounds || !executor)
      break;
    const auto res = executor->execute(parsed.segments.back().text);
    if (!assistant.ends_with("\n")) assistant += "\n";
    std::string shown = res.stdout_text;
    if (res.status != ExecStatus::ok && !res.stderr_text.empty()) shown += res.stderr_text;
    if (shown.ends_with("\n")) shown.pop_back();
    assistant += llm::render_exec_result(shown, res.status) + "\n";
    ++rounds;
  }
  Trajectory tr;
  tr.query_id = query.id;
  tr.segments = llm::parse_segments(assistant).segments;
  tr.rounds = count_exec_results(tr.segments);
  int first_code = -1;
  for (std::size_t i = 0; i < tr.segments.size(); ++i)
    if (tr.segments[i].kind == SegmentKind::code) {
      first_code = static_cast<int>(i);
      break;
    }
  tr.decision = {first_code >= 0 ? 1 : 0, std::max(first_code, 0)};
  tr.guidance = Guidance{prefill.empty() ? GuidanceKind::vanilla : GuidanceKind::prefix_code, 0};
  if (!tr.segments.empty() && tr.segments.back().kind == SegmentKind::final_answer)
    tr.reward = grade(tr.segments.back().text, query.gold_answer);
  if (have_logprob) tr.gen_logprob = std::min(0.0, logprob);
  tr.policy_tag = client.config().model;
  return tr;
}

std::vector<ProbeResult> probe_suite(std::span<const env::SynthQuerySpec> suite, const policy::PolicyParams& p,
                                     int K, int branch_cap, std::uint64_t seed, const kernels::ExecPolicy& ex) {
  if (suite.size() != p.layout->size()) throw ShapeMismatch("suite and policy differ in size");
  std::vector<ProbeResult> out(suite.size());
  const Backend backend = SimBackend{suite};
  kernels::for_each_index(suite.size(), ex, [&](std::size_t q) {
    Rng rng(derive_seed(seed, {q}));
    ProbePlan plan;
    plan.query_id = suite[q].query_id;
    plan.K = K;
    auto res = probe(plan, p, backend, rng);
    for (int b = 0; b < branch_cap; ++b) {
      const auto& source = res.trajectories[rng.below(2 * static_cast<std::uint64_t>(K))];
      const auto bounds = branch_boundaries(source);
      if (bounds.empty()) continue;
      const int t = bounds[rng.below(bounds.size())];
      const auto src = source;
      for (int c = 0; c < 2; ++c) {
        auto more = branch_rollouts(src, t, p, backend, K, rng, c);
        res.trajectories.insert(res.trajectories.end(), more.begin(), more.end());
      }
    }
    out[q] = std::move(res);
  });
  return out;
}

std::vector<std::vector<Trajectory>> sample_suite(std::span<const env::SynthQuerySpec> suite,
                                                  const policy::PolicyParams& p, int n, std::uint64_t seed,
                                                  const kernels::ExecPolicy& ex) {
  if (suite.size() != p.layout->size()) throw ShapeMismatch("suite and policy differ in size");
  std::vector<std::vector<Trajectory>> out(suite.size());
  kernels::for_each_index(suite.size(), ex, [&](std::size_t q) {
    Rng rng(derive_seed(seed, {q}));
    out[q].reserve(n);
    for (int i = 0; i < n; ++i) out[q].push_back(simulate_vanilla(suite[q], p, q, rng));
  });
  return out;
}

}  // namespace autocode::rollout
