#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "autocode/config.hpp"
#include "autocode/curation.hpp"
#include "autocode/env.hpp"
#include "autocode/kernels.hpp"
#include "autocode/policy.hpp"

namespace autocode::optim {

// --- advantages -------------------------------------------------------------

struct GroupStats {
  std::string group;
  double mean = 0.0;
  double std = 0.0;  // population
  std::size_t size = 0;
};

struct AdvantageBatch {
  std::vector<double> A;
  std::vector<GroupStats> groups;  // in order of first appearance
};

// A_i = (r_i - mean_g) / max(std_g, std_floor) within each group g; groups
// of size one get A = 0.
AdvantageBatch advantages(std::span<const double> rewards, std::span<const std::string> groups, double std_floor);

// --- off-policy objective ------------------------------------------------------

struct TrainExample {
  policy::SolutionPath path;
  double advantage = 0.0;
  double weight = 1.0;
  // log pi_ref over the counted choices, total and per choice. When absent
  // the ratio is pinned to 1 (denominator = current policy, held constant).
  std::optional<double> ref_logprob;
  std::vector<double> ref_step_logprobs;
};

struct Batch {
  std::vector<TrainExample> examples;
  // Per layout query: reference strategy for the trigger cross-entropy term.
  std::vector<std::optional<std::array<double, 2>>> ce_target;
};

// Builds the M-step batch from a curated dataset: solution choices given the
// decision, advantages over each query's examples, pi_ref log-probs.
Batch make_em_batch(const policy::PolicyParams& ref, const curation::CuratedDataset& d, double std_floor);

// On-policy batch from the policy's own vanilla rollouts: the trigger is part
// of the ratio and there is no cross-entropy term.
Batch make_onpolicy_batch(const policy::PolicyParams& ref, std::span<const std::vector<Trajectory>> per_query,
                          double std_floor);

// Recomputes ref log-probs against a new reference snapshot.
void rebase(Batch& b, const policy::PolicyParams& ref);

struct ObjectiveOptions {
  double clip_eps = 0.2;
  ClipForm clip_form = ClipForm::paper_literal;
  RatioGranularity granularity = RatioGranularity::sequence;
  double ce_weight = 1.0;
};

ObjectiveOptions objective_options(const Config& cfg);

struct ObjectiveValue {
  double total = 0.0;        // sum over queries of per-query objectives
  double reward_term = 0.0;  // sum over queries
  double ce_term = 0.0;
  std::size_t queries = 0;
  std::size_t skipped = 0;   // examples with a non-finite ratio
  std::size_t clipped = 0;   // ratio (or any per-step ratio) outside the interval
  std::vector<std::string> skipped_examples;

  double mean() const { return queries ? total / static_cast<double>(queries) : 0.0; }
};

// J = sum_q [ mean_{i in q} w_i * g(rho_i, A_i) + ce_weight * sum_c s_q(c) log pi(c|q) ]
// with g the clipped surrogate (paper-literal clip(rho)*A, or ppo-min),
// at sequence or per-choice granularity. Adds dJ/dtheta into `grad` when
// given. Per-query work runs in parallel; each query touches only its own
// parameter block and the sum is taken in query order.
ObjectiveValue offpolicy_objective(const policy::PolicyParams& p, const Batch& b, const ObjectiveOptions& opt,
                                   policy::Gradient* grad, const kernels::ExecPolicy& ex = {});

// Per-example surrogate value and its derivative with respect to rho.
double surrogate(double rho, double A, double eps, ClipForm form, double* d_rho);

// --- training state ------------------------------------------------------------

struct MetricRow {
  int iteration = 0;
  std::string phase;
  std::optional<double> objective;
  std::optional<double> elbo;
  std::optional<double> j_mle;
  double mean_invocation_rate = 0.0;
  double pass1_dev = 0.0;
  std::optional<double> wallclock_s;
  long interactions = 0;
};

// Code-trigger counts of the rollouts (or curated examples) produced in one
// iteration, used for the invocation-phase histograms.
struct InvocationSlice {
  long interactions_begin = 0;
  long interactions_end = 0;
  std::vector<int> code;   // per query
  std::vector<int> total;  // per query
};

struct TrainState {
  policy::PolicyParams policy;
  policy::PolicyParams ref_policy;
  int iteration = 0;
  long interactions = 0;
  std::vector<MetricRow> metrics;
  std::vector<InvocationSlice> invocations;
  std::size_t skipped_nonfinite = 0;
  std::uint64_t seed = 0;
};

// One full-batch ascent step on the off-policy objective.
TrainState offpolicy_step(const TrainState& state, const Batch& batch, double lr, const ObjectiveOptions& opt,
                          ObjectiveValue* value = nullptr, const kernels::ExecPolicy& ex = {});

// --- exact (enumeration) mode ----------------------------------------------------
//
// Likelihood model behind the EM guarantee: P(r = 1 | x, c) is proportional to
// exp(alpha * pi(c|x) * Q(c)), normalised over c, so that
//   J_MLE = sum_q log sum_c pi(c|x_q) exp(E_q(c)) / Z_q,  E_q(c) = alpha pi(c) Q(c),
// and the exact posterior over c is the appendix-prior reference strategy.

double exact_j_mle(std::span<const env::SynthQuerySpec> suite, const policy::PolicyParams& p, double alpha,
                   const kernels::ExecPolicy& ex = {});

// Exact E-step: posterior s(c | x_q) for every query.
std::vector<std::array<double, 2>> exact_estep(std::span<const env::SynthQuerySpec> suite,
                                               const policy::PolicyParams& p, double alpha,
                                               const kernels::ExecPolicy& ex = {});

// ELBO(theta, s) = sum_q sum_c s(c) [log pi(c) + E(c) - log Z - log s(c)];
// adds its gradient into `grad` when given.
double exact_elbo(std::span<const env::SynthQuerySpec> suite, const policy::PolicyParams& p,
                  std::span<const std::array<double, 2>> s, double alpha, policy::Gradient* grad,
                  const kernels::ExecPolicy& ex = {});

struct ExactStepReport {
  double elbo_before = 0.0;
  double elbo_after = 0.0;
  int accepted = 0;
};

// n_inner gradient-ascent steps on the exact ELBO with a backtracking line
// search that never accepts a decrease.
TrainState exact_mstep(const TrainState& state, std::span<const env::SynthQuerySpec> suite,
                       std::span<const std::array<double, 2>> s, int n_inner, double lr, double alpha,
                       ExactStepReport* report = nullptr, const kernels::ExecPolicy& ex = {});

// --- training loops ------------------------------------------------------------------

// Where per-iteration artifacts go; empty dir = keep nothing on disk.
struct ArtifactSink {
  std::filesystem::path dir;
  bool write_rollouts = true;
  std::vector<std::filesystem::path> written;

  bool enabled() const { return !dir.empty(); }
  void write(const std::filesystem::path& rel, std::string_view text);
};

enum class BaselineKind { onpolicy_rl, imitation, base_rl };
BaselineKind parse_baseline(std::string_view s);
std::string_view to_string(BaselineKind k);

// Initial policy per cfg.init ("uniform", "base" or "imitation").
policy::PolicyParams initial_policy(const Config& cfg, std::span<const env::SynthQuerySpec> suite,
                                    std::span<const Trajectory> demos);

// EM: snapshot pi_ref -> curate -> advantages -> `epochs` off-policy steps,
// or, with cfg.exact_mode, exact posterior -> exact M-step.
TrainState em_train(const Config& cfg, std::span<const env::SynthQuerySpec> suite, const policy::PolicyParams& init,
                    ArtifactSink* sink = nullptr);

// Baselines. onpolicy_rl and base_rl run clipped policy-gradient updates
// on the policy's own rollouts (cfg.rollouts_per_query per query, default
// 2K so the interaction budget matches EM). imitation maximises the
// log-likelihood of `demos`.
TrainState baseline_train(BaselineKind kind, const Config& cfg, std::span<const env::SynthQuerySpec> suite,
                          const policy::PolicyParams& init, std::span<const Trajectory> demos,
                          ArtifactSink* sink = nullptr);

// Imitation objective (sum over queries of mean demo log-likelihood) and gradient.
double imitation_objective(const policy::PolicyParams& p, std::span<const policy::SolutionPath> demos,
                           policy::Gradient* grad);

// Simulated demonstrator: per query a preferred decision drawn
// independently of which decision is optimal, followed with probability
// cfg.demo_trigger_confidence; solutions under the preferred decision use
// the optimal remaining modes, the others are uniform.
std::vector<Trajectory> make_demonstrations(std::span<const env::SynthQuerySpec> suite, const Config& cfg,
                                            std::uint64_t seed);

// Metrics CSV: iteration,phase,objective,elbo,j_mle,mean_invocation_rate,pass1_dev,wallclock_s,interactions
std::string metrics_csv(std::span<const MetricRow> rows);
std::vector<MetricRow> parse_metrics_csv(std::string_view text);

std::string invocations_text(std::span<const InvocationSlice> slices, std::span<const std::string> query_ids);
std::vector<InvocationSlice> parse_invocations(std::string_view text);

}  // namespace autocode::optim
