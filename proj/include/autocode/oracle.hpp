#pragma once

#include <array>
#include <span>

#include "autocode/config.hpp"
#include "autocode/env.hpp"
#include "autocode/policy.hpp"

// Exact quantities of the synthetic environment by brute-force enumeration.
// These are the ground truth the sampled pipeline is tested against.
namespace autocode::env {

inline constexpr int kEnumerationCap = kMaxSteps;

// Q(x_q, c) = sum over mode sequences m of pi(m | q, c) * success_prob(m),
// by enumerating every sequence of the free steps. `q` indexes the policy
// layout. Throws EnumerationCap when T exceeds the cap.
double exact_Q(const SynthQuerySpec& spec, const policy::PolicyParams& p, std::size_t q, int c);

// Same quantity via the per-step product form (the policy factorises over
// steps). Used to cross-check the enumeration and in the exact M-step.
double product_Q(const SynthQuerySpec& spec, const policy::PolicyParams& p, std::size_t q, int c);

// Q of a branch: steps before `decision_step` are the fixed prefix (with
// its realised outcomes), the decision c applies at `decision_step`.
double exact_branch_Q(const SynthQuerySpec& spec, const policy::PolicyParams& p, std::size_t q, int c,
                      int decision_step, const SimPath& prefix);

struct Posterior {
  std::array<double, 2> s{0.5, 0.5};
  double log_z = 0.0;
};

// Exact reference strategy for one query, from exact_Q and the policy's
// trigger head.
Posterior exact_posterior(const SynthQuerySpec& spec, const policy::PolicyParams& p, std::size_t q, double alpha,
                          StrategyVariant variant);

// Expected reward of the policy choosing its own trigger: sum_c pi(c) Q(c).
double exact_expected_reward(const SynthQuerySpec& spec, const policy::PolicyParams& p, std::size_t q);

}  // namespace autocode::env
