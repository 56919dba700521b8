#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "autocode/config.hpp"
#include "autocode/env.hpp"

namespace autocode::policy {

using env::Mode;
using env::ModeSequence;

// Shape of a tabular policy: one parameter block per query holding the
// trigger logit pair followed by per-(decision, step) mode logit pairs.
struct Layout {
  std::vector<std::string> query_ids;
  std::vector<int> steps;
  std::vector<std::size_t> offsets;  // size n + 1
  std::unordered_map<std::string, std::size_t> index;

  std::size_t size() const { return query_ids.size(); }
  std::size_t total() const { return offsets.back(); }
  std::size_t trigger_offset(std::size_t q) const { return offsets[q]; }
  std::size_t mode_offset(std::size_t q, int c, int t) const {
    return offsets[q] + 2 + 2 * static_cast<std::size_t>(c * steps[q] + t);
  }
  std::size_t find(const std::string& id) const;  // throws UnknownQuery
};

std::shared_ptr<const Layout> make_layout(std::span<const env::SynthQuerySpec> suite);
std::shared_ptr<const Layout> make_layout(std::vector<std::string> ids, std::vector<int> steps);

// Parameters: trigger head pi(c | x_q) and solution head pi(mode_t | x_q, c),
// each a softmax over a logit pair. Under first-step coupling the step at
// the decision point is pinned to the decision (code for c = 1) and carries
// no probability mass of its own.
struct PolicyParams {
  std::shared_ptr<const Layout> layout;
  std::vector<double> theta;
  Coupling coupling = Coupling::first_step;
  std::uint64_t version = 0;

  std::array<double, 2> decision_prob(std::size_t q) const;
  std::array<double, 2> mode_prob(std::size_t q, int c, int t) const;
  std::array<double, 2> decision_prob(const std::string& id) const { return decision_prob(layout->find(id)); }
};

struct Gradient {
  std::shared_ptr<const Layout> layout;
  std::vector<double> values;

  static Gradient zeros_like(const PolicyParams& p) { return {p.layout, std::vector<double>(p.theta.size(), 0.0)}; }
  Gradient& operator+=(const Gradient& other);
  double norm() const;
};

PolicyParams uniform_policy(std::shared_ptr<const Layout> layout, Coupling coupling = Coupling::first_step);

// "Base model" start: rarely triggers code (trigger margin `trigger_bias`
// against c = 1), reasons by default after c = 0 and has no preference
// after c = 1.
PolicyParams base_policy(std::shared_ptr<const Layout> layout, double trigger_bias, double reason_bias,
                         Coupling coupling = Coupling::first_step);

// Sharp policy concentrated on the given decision and modes for every query.
PolicyParams deterministic_policy(std::shared_ptr<const Layout> layout, std::span<const int> decision,
                                  std::span<const ModeSequence> modes, double margin,
                                  Coupling coupling = Coupling::first_step);

// A solution viewed as policy choices. Steps before `decision_step` are a
// fixed prefix; the decision step is pinned under first-step coupling; the
// remaining steps are sampled choices.
struct SolutionPath {
  std::size_t query = 0;
  int c = 0;
  int decision_step = 0;
  ModeSequence modes;
  bool include_trigger = false;  // trigger was sampled by the policy
};

bool step_is_free(const PolicyParams& p, const SolutionPath& path, int t);
Mode decision_mode(int c);

struct SampledSolution {
  ModeSequence modes;
  double gen_logprob = 0.0;  // sum of log pi over the sampled steps
};

// Samples the steps at and after `decision_step`; `prefix` supplies the
// earlier ones.
SampledSolution sample_solution(const PolicyParams& p, std::size_t q, int c, Rng& rng, int decision_step = 0,
                                std::span<const Mode> prefix = {});
int sample_decision(const PolicyParams& p, std::size_t q, Rng& rng);

double log_prob(const PolicyParams& p, const SolutionPath& path);
// Per free step log-probabilities (plus the trigger first, when included).
std::vector<double> step_log_probs(const PolicyParams& p, const SolutionPath& path);
// grad += scale * d log_prob / d theta
void accumulate_grad_log_prob(const PolicyParams& p, const SolutionPath& path, double scale, Gradient& grad);
// Gradient of the i-th entry of step_log_probs, scaled, into grad.
void accumulate_grad_step(const PolicyParams& p, const SolutionPath& path, std::size_t i, double scale,
                          Gradient& grad);
void accumulate_grad_log_decision(const PolicyParams& p, std::size_t q, int c, double scale, Gradient& grad);

// Trajectory-level views. Simulated trajectories only; the trigger term is
// included for vanilla-guided trajectories whose decision was sampled.
SolutionPath to_path(const PolicyParams& p, const Trajectory& t);
double log_prob(const PolicyParams& p, const Trajectory& t);
Gradient grad_log_prob(const PolicyParams& p, const Trajectory& t);

// theta + lr * grad, version + 1.
PolicyParams apply_update(const PolicyParams& p, const Gradient& grad, double lr);

// Probability that step t is code, for every step, for decision c placed at
// `decision_step` (prefix steps report their fixed mode).
std::vector<double> code_probabilities(const PolicyParams& p, std::size_t q, int c, int decision_step = 0,
                                       std::span<const Mode> prefix = {});

void write_checkpoint(const PolicyParams& p, const std::string& cfg_hash, const std::filesystem::path& path);
PolicyParams read_checkpoint(const std::filesystem::path& path);
std::string checkpoint_text(const PolicyParams& p, const std::string& cfg_hash);

}  // namespace autocode::policy
