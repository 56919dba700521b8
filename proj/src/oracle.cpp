#include "autocode/oracle.hpp"

#include <cmath>

#include "autocode/error.hpp"

namespace autocode::env {

namespace {

void check_cap(const SynthQuerySpec& spec) {
  if (spec.steps() > kEnumerationCap)
    throw EnumerationCap("T = " + std::to_string(spec.steps()) + " exceeds the enumeration cap of " +
                         std::to_string(kEnumerationCap));
}

void check_shape(const SynthQuerySpec& spec, const policy::PolicyParams& p, std::size_t q) {
  if (q >= p.layout->size() || p.layout->steps[q] != spec.steps())
    throw ShapeMismatch("policy layout does not match query '" + spec.query_id + "'");
}

// Sum over the free steps in [from, T) of pi(m) * prod success, with the
// step at `from` pinned under first-step coupling.
double enumerate_from(const SynthQuerySpec& spec, const policy::PolicyParams& p, std::size_t q, int c, int from) {
  const int T = spec.steps();
  const bool pinned = p.coupling == Coupling::first_step && from < T;
  const int first_free = pinned ? from + 1 : from;
  const int n_free = T - first_free;
  double lead = 1.0;
  if (pinned) lead = step_success(spec, from, policy::decision_mode(c));
  double total = 0.0;
  ModeSequence m(T, Mode::reason);
  for (std::uint32_t mask = 0; mask < (1u << n_free); ++mask) {
    double prob = 1.0, succ = 1.0;
    for (int i = 0; i < n_free; ++i) {
      const int t = first_free + i;
      const int k = (mask >> i) & 1u;
      prob *= p.mode_prob(q, c, t)[k];
      succ *= step_success(spec, t, k == 1 ? Mode::code : Mode::reason);
    }
    total += prob * succ;
  }
  return lead * total;
}

}  // namespace

double exact_Q(const SynthQuerySpec& spec, const policy::PolicyParams& p, std::size_t q, int c) {
  check_cap(spec);
  check_shape(spec, p, q);
  return enumerate_from(spec, p, q, c, 0);
}

double product_Q(const SynthQuerySpec& spec, const policy::PolicyParams& p, std::size_t q, int c) {
  check_shape(spec, p, q);
  double v = 1.0;
  for (int t = 0; t < spec.steps(); ++t) {
    if (t == 0 && p.coupling == Coupling::first_step) {
      v *= step_success(spec, 0, policy::decision_mode(c));
      continue;
    }
    const auto pr = p.mode_prob(q, c, t);
    v *= pr[0] * step_success(spec, t, Mode::reason) + pr[1] * step_success(spec, t, Mode::code);
  }
  return v;
}

double exact_branch_Q(const SynthQuerySpec& spec, const policy::PolicyParams& p, std::size_t q, int c,
                      int decision_step, const SimPath& prefix) {
  check_cap(spec);
  check_shape(spec, p, q);
  if (decision_step < 0 || decision_step > spec.steps() || static_cast<int>(prefix.step_ok.size()) < decision_step)
    throw InvalidArgument("branch prefix out of range");
  for (int t = 0; t < decision_step; ++t)
    if (!prefix.step_ok[t]) return 0.0;
  return enumerate_from(spec, p, q, c, decision_step);
}

Posterior exact_posterior(const SynthQuerySpec& spec, const policy::PolicyParams& p, std::size_t q, double alpha,
                          StrategyVariant variant) {
  if (!(alpha >= 0)) throw InvalidArgument("alpha must be >= 0");
  const auto pi = p.decision_prob(q);
  const double q0 = exact_Q(spec, p, q, 0), q1 = exact_Q(spec, p, q, 1);
  double e0 = alpha * pi[0] * q0, e1 = alpha * pi[1] * q1;
  if (variant == StrategyVariant::appendix_prior) {
    e0 += std::log(pi[0]);
    e1 += std::log(pi[1]);
  }
  // Two-point normalisation written as a logistic in the energy gap.
  Posterior out;
  out.s[1] = 1.0 / (1.0 + std::exp(e0 - e1));
  out.s[0] = 1.0 / (1.0 + std::exp(e1 - e0));
  out.log_z = std::max(e0, e1) + std::log1p(std::exp(-std::abs(e0 - e1)));
  return out;
}

double exact_expected_reward(const SynthQuerySpec& spec, const policy::PolicyParams& p, std::size_t q) {
  const auto pi = p.decision_prob(q);
  return pi[0] * product_Q(spec, p, q, 0) + pi[1] * product_Q(spec, p, q, 1);
}

}  // namespace autocode::env
