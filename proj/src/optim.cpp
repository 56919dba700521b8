#include "autocode/optim.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <unordered_map>

#include "autocode/error.hpp"
#include "autocode/jsonl.hpp"
#include "autocode/oracle.hpp"
#include "autocode/rollout.hpp"

namespace autocode::optim {

// --- advantages -------------------------------------------------------------

AdvantageBatch advantages(std::span<const double> rewards, std::span<const std::string> groups, double std_floor) {
  if (rewards.size() != groups.size()) throw ShapeMismatch("rewards and groups differ in length");
  if (!(std_floor > 0)) throw InvalidArgument("std_floor must be > 0");
  AdvantageBatch out;
  std::unordered_map<std::string, std::size_t> index;
  std::vector<std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < groups.size(); ++i) {
    auto [it, fresh] = index.emplace(groups[i], members.size());
    if (fresh) {
      members.emplace_back();
      out.groups.push_back({groups[i], 0.0, 0.0, 0});
    }
    members[it->second].push_back(i);
  }
  out.A.assign(rewards.size(), 0.0);
  for (std::size_t g = 0; g < members.size(); ++g) {
    const auto& m = members[g];
    double mean = 0.0, lo = rewards[m[0]], hi = rewards[m[0]];
    for (auto i : m) {
      mean += rewards[i];
      lo = std::min(lo, rewards[i]);
      hi = std::max(hi, rewards[i]);
    }
    mean /= static_cast<double>(m.size());
    double var = 0.0;
    for (auto i : m) var += (rewards[i] - mean) * (rewards[i] - mean);
    const double sd = std::sqrt(var / static_cast<double>(m.size()));
    out.groups[g].mean = mean;
    out.groups[g].std = sd;
    out.groups[g].size = m.size();
    if (m.size() == 1 || lo == hi) continue;
    const double denom = std::max(sd, std_floor);
    for (auto i : m) out.A[i] = (rewards[i] - mean) / denom;
  }
  return out;
}

// --- batches ------------------------------------------------------------------

namespace {

void fill_ref(TrainExample& ex, const policy::PolicyParams& ref) {
  ex.ref_step_logprobs = policy::step_log_probs(ref, ex.path);
  double s = 0.0;
  for (double v : ex.ref_step_logprobs) s += v;
  ex.ref_logprob = s;
}

}  // namespace

Batch make_em_batch(const policy::PolicyParams& ref, const curation::CuratedDataset& d, double std_floor) {
  Batch b;
  b.ce_target.assign(ref.layout->size(), std::nullopt);
  std::vector<double> rewards;
  std::vector<std::string> groups;
  for (const auto& e : d.examples) {
    TrainExample ex;
    ex.path = policy::to_path(ref, e.trajectory);
    ex.path.include_trigger = false;
    ex.weight = e.weight;
    if (e.trajectory.gen_logprob) fill_ref(ex, ref);
    b.ce_target[ex.path.query] = e.s_snapshot;
    rewards.push_back(e.trajectory.reward);
    groups.push_back(e.query_id);
    b.examples.push_back(std::move(ex));
  }
  const auto adv = advantages(rewards, groups, std_floor);
  for (std::size_t i = 0; i < b.examples.size(); ++i) b.examples[i].advantage = adv.A[i];
  return b;
}

Batch make_onpolicy_batch(const policy::PolicyParams& ref, std::span<const std::vector<Trajectory>> per_query,
                          double std_floor) {
  Batch b;
  b.ce_target.assign(ref.layout->size(), std::nullopt);
  std::vector<double> rewards;
  std::vector<std::string> groups;
  for (const auto& trajs : per_query)
    for (const auto& t : trajs) {
      TrainExample ex;
      ex.path = policy::to_path(ref, t);
      if (t.gen_logprob) fill_ref(ex, ref);
      rewards.push_back(t.reward);
      groups.push_back(t.query_id);
      b.examples.push_back(std::move(ex));
    }
  const auto adv = advantages(rewards, groups, std_floor);
  for (std::size_t i = 0; i < b.examples.size(); ++i) b.examples[i].advantage = adv.A[i];
  return b;
}

void rebase(Batch& b, const policy::PolicyParams& ref) {
  for (auto& ex : b.examples)
    if (ex.ref_logprob) fill_ref(ex, ref);
}

ObjectiveOptions objective_options(const Config& cfg) {
  return {cfg.clip_eps, cfg.clip_form, cfg.ratio_granularity, cfg.ce_weight};
}

// --- objective ------------------------------------------------------------------

double surrogate(double rho, double A, double eps, ClipForm form, double* d_rho) {
  const double lo = 1.0 - eps, hi = 1.0 + eps;
  const bool inside = rho >= lo && rho <= hi;
  const double clipped = std::min(std::max(rho, lo), hi);
  double value, d;
  if (form == ClipForm::paper_literal) {
    value = clipped * A;
    d = inside ? A : 0.0;
  } else {
    const double unclipped = rho * A;
    if (unclipped <= clipped * A) {
      value = unclipped;
      d = A;
    } else {
      value = clipped * A;
      d = inside ? A : 0.0;
    }
  }
  if (d_rho) *d_rho = d;
  return value;
}

ObjectiveValue offpolicy_objective(const policy::PolicyParams& p, const Batch& b, const ObjectiveOptions& opt,
                                   policy::Gradient* grad, const kernels::ExecPolicy& ex) {
  const std::size_t n = p.layout->size();
  if (b.ce_target.size() != n) throw ShapeMismatch("batch and policy differ in query count");
  if (grad && grad->values.size() != p.theta.size()) throw ShapeMismatch("gradient shape mismatch");
  std::vector<std::vector<std::size_t>> members(n);
  for (std::size_t i = 0; i < b.examples.size(); ++i) members[b.examples[i].path.query].push_back(i);

  struct PerQuery {
    double reward = 0.0, ce = 0.0;
    std::size_t skipped = 0, clipped = 0;
    bool active = false;
    std::vector<std::string> skipped_examples;
  };
  std::vector<PerQuery> pq(n);
  const double lo = 1.0 - opt.clip_eps, hi = 1.0 + opt.clip_eps;

  kernels::for_each_index(n, ex, [&](std::size_t q) {
    auto& r = pq[q];
    const auto& m = members[q];
    if (!m.empty()) {
      r.active = true;
      const double inv_n = 1.0 / static_cast<double>(m.size());
      for (auto i : m) {
        const auto& e = b.examples[i];
        const auto lps = policy::step_log_probs(p, e.path);
        const double scale = e.weight * inv_n;
        if (opt.granularity == RatioGranularity::sequence) {
          double lp = 0.0;
          for (double v : lps) lp += v;
          const double rho = e.ref_logprob ? std::exp(lp - *e.ref_logprob) : 1.0;
          if (!std::isfinite(rho)) {
            ++r.skipped;
            r.skipped_examples.push_back(p.layout->query_ids[q] + "#" + std::to_string(i));
            continue;
          }
          if (rho < lo || rho > hi) ++r.clipped;
          double d = 0.0;
          r.reward += scale * surrogate(rho, e.advantage, opt.clip_eps, opt.clip_form, &d);
          if (grad && d != 0.0) policy::accumulate_grad_log_prob(p, e.path, scale * d * rho, *grad);
        } else {
          std::vector<double> rho(lps.size());
          bool finite = true, any_clipped = false;
          for (std::size_t k = 0; k < lps.size(); ++k) {
            rho[k] = e.ref_logprob ? std::exp(lps[k] - e.ref_step_logprobs[k]) : 1.0;
            finite = finite && std::isfinite(rho[k]);
            any_clipped = any_clipped || rho[k] < lo || rho[k] > hi;
          }
          if (!finite) {
            ++r.skipped;
            r.skipped_examples.push_back(p.layout->query_ids[q] + "#" + std::to_string(i));
            continue;
          }
          if (any_clipped) ++r.clipped;
          for (std::size_t k = 0; k < lps.size(); ++k) {
            double d = 0.0;
            r.reward += scale * surrogate(rho[k], e.advantage, opt.clip_eps, opt.clip_form, &d);
            if (grad && d != 0.0) policy::accumulate_grad_step(p, e.path, k, scale * d * rho[k], *grad);
          }
        }
      }
    }
    if (b.ce_target[q] && opt.ce_weight != 0.0) {
      r.active = true;
      const auto& s = *b.ce_target[q];
      const auto pi = p.decision_prob(q);
      for (int c = 0; c < 2; ++c) {
        if (s[c] == 0.0) continue;
        r.ce += opt.ce_weight * s[c] * std::log(pi[c]);
        if (grad) policy::accumulate_grad_log_decision(p, q, c, opt.ce_weight * s[c], *grad);
      }
    }
  });

  ObjectiveValue out;
  for (const auto& r : pq) {
    out.reward_term += r.reward;
    out.ce_term += r.ce;
    out.skipped += r.skipped;
    out.clipped += r.clipped;
    out.queries += r.active ? 1 : 0;
    out.skipped_examples.insert(out.skipped_examples.end(), r.skipped_examples.begin(), r.skipped_examples.end());
  }
  out.total = out.reward_term + out.ce_term;
  return out;
}

TrainState offpolicy_step(const TrainState& state, const Batch& batch, double lr, const ObjectiveOptions& opt,
                          ObjectiveValue* value, const kernels::ExecPolicy& ex) {
  auto grad = policy::Gradient::zeros_like(state.policy);
  auto v = offpolicy_objective(state.policy, batch, opt, &grad, ex);
  for (const auto& s : v.skipped_examples) std::fprintf(stderr, "warning: non-finite ratio, skipped example %s\n", s.c_str());
  TrainState next = state;
  next.policy = policy::apply_update(state.policy, grad, lr);
  next.skipped_nonfinite += v.skipped;
  if (value) *value = std::move(v);
  return next;
}

// --- exact mode -----------------------------------------------------------------

namespace {

struct ArmTerms {
  double Q = 0.0;
  std::vector<int> steps;          // free steps
  std::vector<double> others;      // product of all factors except the step's own
  std::vector<double> f;           // per free step expected success
};

ArmTerms arm_terms(const env::SynthQuerySpec& spec, const policy::PolicyParams& p, std::size_t q, int c) {
  ArmTerms a;
  double lead = 1.0;
  for (int t = 0; t < spec.steps(); ++t) {
    if (t == 0 && p.coupling == Coupling::first_step) {
      lead = env::step_success(spec, 0, policy::decision_mode(c));
      continue;
    }
    const auto pr = p.mode_prob(q, c, t);
    a.steps.push_back(t);
    a.f.push_back(pr[0] * env::step_success(spec, t, env::Mode::reason) +
                  pr[1] * env::step_success(spec, t, env::Mode::code));
  }
  const std::size_t k = a.f.size();
  std::vector<double> prefix(k + 1, 1.0), suffix(k + 1, 1.0);
  for (std::size_t i = 0; i < k; ++i) prefix[i + 1] = prefix[i] * a.f[i];
  for (std::size_t i = k; i-- > 0;) suffix[i] = suffix[i + 1] * a.f[i];
  a.Q = lead * prefix[k];
  a.others.resize(k);
  for (std::size_t i = 0; i < k; ++i) a.others[i] = lead * prefix[i] * suffix[i + 1];
  return a;
}

// grad += scale * dQ_c / dtheta
void add_dQ(const env::SynthQuerySpec& spec, const policy::PolicyParams& p, std::size_t q, int c, const ArmTerms& a,
            double scale, policy::Gradient& grad) {
  for (std::size_t i = 0; i < a.steps.size(); ++i) {
    const int t = a.steps[i];
    const auto pr = p.mode_prob(q, c, t);
    const auto o = p.layout->mode_offset(q, c, t);
    const double pm[2] = {env::step_success(spec, t, env::Mode::reason), env::step_success(spec, t, env::Mode::code)};
    for (int m = 0; m < 2; ++m) grad.values[o + m] += scale * a.others[i] * pr[m] * (pm[m] - a.f[i]);
  }
}

double lse2(double a, double b) {
  const double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

}  // namespace

double exact_j_mle(std::span<const env::SynthQuerySpec> suite, const policy::PolicyParams& p, double alpha,
                   const kernels::ExecPolicy& ex) {
  std::vector<double> per(suite.size());
  kernels::for_each_index(suite.size(), ex, [&](std::size_t q) {
    const auto pi = p.decision_prob(q);
    const double e0 = alpha * pi[0] * env::product_Q(suite[q], p, q, 0);
    const double e1 = alpha * pi[1] * env::product_Q(suite[q], p, q, 1);
    per[q] = lse2(std::log(pi[0]) + e0, std::log(pi[1]) + e1) - lse2(e0, e1);
  });
  return kernels::ordered_sum(per);
}

std::vector<std::array<double, 2>> exact_estep(std::span<const env::SynthQuerySpec> suite,
                                               const policy::PolicyParams& p, double alpha,
                                               const kernels::ExecPolicy& ex) {
  std::vector<std::array<double, 2>> s(suite.size());
  kernels::for_each_index(suite.size(), ex, [&](std::size_t q) {
    s[q] = env::exact_posterior(suite[q], p, q, alpha, StrategyVariant::appendix_prior).s;
  });
  return s;
}

double exact_elbo(std::span<const env::SynthQuerySpec> suite, const policy::PolicyParams& p,
                  std::span<const std::array<double, 2>> s, double alpha, policy::Gradient* grad,
                  const kernels::ExecPolicy& ex) {
  if (s.size() != suite.size() || suite.size() != p.layout->size()) throw ShapeMismatch("exact_elbo shapes");
  std::vector<double> per(suite.size());
  kernels::for_each_index(suite.size(), ex, [&](std::size_t q) {
    const auto pi = p.decision_prob(q);
    const ArmTerms arm[2] = {arm_terms(suite[q], p, q, 0), arm_terms(suite[q], p, q, 1)};
    const double E[2] = {alpha * pi[0] * arm[0].Q, alpha * pi[1] * arm[1].Q};
    const double log_z = lse2(E[0], E[1]);
    double v = -log_z;
    for (int c = 0; c < 2; ++c)
      if (s[q][c] > 0) v += s[q][c] * (std::log(pi[c]) + E[c] - std::log(s[q][c]));
    per[q] = v;
    if (!grad) return;
    const double sigma[2] = {std::exp(E[0] - log_z), std::exp(E[1] - log_z)};
    const auto to = p.layout->trigger_offset(q);
    for (int k = 0; k < 2; ++k) {
      double g = 0.0;
      for (int c = 0; c < 2; ++c) {
        const double dlog = (c == k ? 1.0 : 0.0) - pi[k];
        g += s[q][c] * dlog;
        g += (s[q][c] - sigma[c]) * alpha * arm[c].Q * pi[c] * dlog;
      }
      grad->values[to + k] += g;
    }
    for (int c = 0; c < 2; ++c) add_dQ(suite[q], p, q, c, arm[c], (s[q][c] - sigma[c]) * alpha * pi[c], *grad);
  });
  return kernels::ordered_sum(per);
}

TrainState exact_mstep(const TrainState& state, std::span<const env::SynthQuerySpec> suite,
                       std::span<const std::array<double, 2>> s, int n_inner, double lr, double alpha,
                       ExactStepReport* report, const kernels::ExecPolicy& ex) {
  if (n_inner < 0) throw InvalidArgument("n_inner must be >= 0");
  for (const auto& spec : suite)
    if (spec.steps() > env::kEnumerationCap) throw EnumerationCap("query '" + spec.query_id + "' exceeds the cap");
  TrainState st = state;
  ExactStepReport rep;
  rep.elbo_before = rep.elbo_after = exact_elbo(suite, st.policy, s, alpha, nullptr, ex);
  for (int k = 0; k < n_inner; ++k) {
    auto grad = policy::Gradient::zeros_like(st.policy);
    const double before = exact_elbo(suite, st.policy, s, alpha, &grad, ex);
    if (grad.norm() == 0.0) break;
    bool accepted = false;
    double step = lr;
    for (int tries = 0; tries < 50 && !accepted; ++tries, step *= 0.5) {
      auto cand = policy::apply_update(st.policy, grad, step);
      const double after = exact_elbo(suite, cand, s, alpha, nullptr, ex);
      if (after >= before) {
        st.policy = std::move(cand);
        rep.elbo_after = after;
        accepted = true;
      }
    }
    if (!accepted) break;
    ++rep.accepted;
  }
  if (report) *report = rep;
  return st;
}

// --- artifacts ------------------------------------------------------------------

void ArtifactSink::write(const std::filesystem::path& rel, std::string_view text) {
  if (!enabled()) return;
  write_text_file(dir / rel, text);
  written.push_back(rel);
}

BaselineKind parse_baseline(std::string_view s) {
  if (s == "onpolicy_rl" || s == "ppo") return BaselineKind::onpolicy_rl;
  if (s == "imitation" || s == "sft") return BaselineKind::imitation;
  if (s == "base_rl" || s == "base-rl") return BaselineKind::base_rl;
  throw InvalidArgument("unknown baseline '" + std::string(s) + "'");
}

std::string_view to_string(BaselineKind k) {
  switch (k) {
    case BaselineKind::onpolicy_rl: return "onpolicy_rl";
    case BaselineKind::imitation: return "imitation";
    case BaselineKind::base_rl: return "base_rl";
  }
  return "onpolicy_rl";
}

// --- training loops ----------------------------------------------------------------

namespace {

kernels::ExecPolicy exec_of(const Config& cfg) { return kernels::ExecPolicy::parallel(cfg.workers); }

double mean_of(std::span<const double> v) { return v.empty() ? 0.0 : kernels::ordered_sum(v) / v.size(); }

double mean_trigger_rate(const policy::PolicyParams& p) {
  std::vector<double> r(p.layout->size());
  for (std::size_t q = 0; q < r.size(); ++q) r[q] = p.decision_prob(q)[1];
  return mean_of(r);
}

double slice_rate(const InvocationSlice& s) {
  std::vector<double> r;
  for (std::size_t q = 0; q < s.code.size(); ++q)
    if (s.total[q] > 0) r.push_back(static_cast<double>(s.code[q]) / s.total[q]);
  return mean_of(r);
}

std::string iter_dir(int it) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "iter_%03d", it);
  return buf;
}

class Clock {
 public:
  explicit Clock(bool on) : on_(on), start_(std::chrono::steady_clock::now()) {}
  std::optional<double> now() const {
    if (!on_) return std::nullopt;
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  bool on_;
  std::chrono::steady_clock::time_point start_;
};

void write_checkpoint_artifacts(ArtifactSink* sink, const TrainState& st, const Config& cfg, int it) {
  if (!sink || !sink->enabled()) return;
  const auto text = policy::checkpoint_text(st.policy, config_hash(cfg));
  sink->write(std::filesystem::path(iter_dir(it)) / "checkpoint.jsonl", text);
  sink->write("checkpoint.jsonl", text);
}

}  // namespace

policy::PolicyParams initial_policy(const Config& cfg, std::span<const env::SynthQuerySpec> suite,
                                    std::span<const Trajectory> demos) {
  auto layout = policy::make_layout(suite);
  if (cfg.init == "uniform") return policy::uniform_policy(layout, cfg.coupling);
  if (cfg.init == "base") return policy::base_policy(layout, cfg.base_trigger_bias, cfg.base_reason_bias, cfg.coupling);
  if (cfg.init == "imitation") {
    if (demos.empty()) throw MissingInput("init = imitation needs demonstrations");
    return baseline_train(BaselineKind::imitation, cfg, suite, policy::uniform_policy(layout, cfg.coupling), demos)
        .policy;
  }
  throw InvalidArgument("unknown init '" + cfg.init + "'");
}

TrainState em_train(const Config& cfg, std::span<const env::SynthQuerySpec> suite, const policy::PolicyParams& init,
                    ArtifactSink* sink) {
  validate(cfg);
  if (init.layout->size() != suite.size()) throw ShapeMismatch("initial policy does not match the suite");
  const auto ex = exec_of(cfg);
  const Clock clock(cfg.record_wallclock);
  const auto opt = objective_options(cfg);
  TrainState st;
  st.policy = st.ref_policy = init;
  st.seed = cfg.seed;
  const std::size_t n = suite.size();

  for (int it = 1; it <= cfg.iterations; ++it) {
    st.iteration = it;
    st.ref_policy = st.policy;
    if (cfg.exact_mode) {
      const auto s = exact_estep(suite, st.policy, cfg.alpha, ex);
      const double j_before = exact_j_mle(suite, st.policy, cfg.alpha, ex);
      MetricRow e{it, "estep", std::nullopt, exact_elbo(suite, st.policy, s, cfg.alpha, nullptr, ex), j_before,
                  mean_trigger_rate(st.policy), mean_of(kernels::expected_rewards(suite, st.policy, ex)),
                  clock.now(), st.interactions};
      st.metrics.push_back(e);
      ExactStepReport rep;
      st = exact_mstep(st, suite, s, cfg.exact_inner_steps, cfg.learning_rate, cfg.alpha, &rep, ex);
      st.metrics.push_back({it, "mstep", rep.elbo_after, rep.elbo_after, exact_j_mle(suite, st.policy, cfg.alpha, ex),
                            mean_trigger_rate(st.policy), mean_of(kernels::expected_rewards(suite, st.policy, ex)),
                            clock.now(), st.interactions});
      write_checkpoint_artifacts(sink, st, cfg, it);
      continue;
    }

    auto cur = curation::curate(suite, st.ref_policy, cfg, derive_seed(cfg.seed, {0xE5, static_cast<std::uint64_t>(it)}), ex);
    const auto dir = std::filesystem::path(iter_dir(it));
    cur.dataset.provenance.iteration = it;
    cur.dataset.provenance.source = (dir / "rollouts.jsonl").string();

    InvocationSlice slice{st.interactions, st.interactions + static_cast<long>(cur.rollouts.size()),
                          std::vector<int>(n, 0), std::vector<int>(n, 0)};
    for (const auto& e : cur.dataset.examples) {
      const auto q = st.policy.layout->find(e.query_id);
      slice.code[q] += e.decision.c;
      slice.total[q] += 1;
    }
    st.interactions = slice.interactions_end;
    st.invocations.push_back(slice);
    st.metrics.push_back({it, "estep", std::nullopt, std::nullopt, std::nullopt, slice_rate(slice),
                          mean_of(kernels::expected_rewards(suite, st.policy, ex)), clock.now(), st.interactions});

    auto batch = make_em_batch(st.ref_policy, cur.dataset, cfg.std_floor);
    ObjectiveValue v;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
      if (epoch > 0 && cfg.refresh_ref_per_epoch) {
        st.ref_policy = st.policy;
        rebase(batch, st.ref_policy);
      }
      st = offpolicy_step(st, batch, cfg.learning_rate, opt, &v, ex);
    }
    st.metrics.push_back({it, "mstep", v.mean(), std::nullopt, std::nullopt, mean_trigger_rate(st.policy),
                          mean_of(kernels::expected_rewards(suite, st.policy, ex)), clock.now(), st.interactions});

    if (sink && sink->enabled()) {
      if (sink->write_rollouts) sink->write(dir / "rollouts.jsonl", dump_jsonl(to_json_records<Trajectory>(cur.rollouts)));
      sink->write(dir / "qtable.jsonl", curation::qtable_text(cur.qtable));
      sink->write(dir / "strategy.jsonl", curation::strategy_text(cur.strategy));
      sink->write(dir / "dataset.jsonl", curation::dataset_text(cur.dataset));
    }
    write_checkpoint_artifacts(sink, st, cfg, it);
  }
  return st;
}

double imitation_objective(const policy::PolicyParams& p, std::span<const policy::SolutionPath> demos,
                           policy::Gradient* grad) {
  const std::size_t n = p.layout->size();
  std::vector<std::vector<std::size_t>> members(n);
  for (std::size_t i = 0; i < demos.size(); ++i) members[demos[i].query].push_back(i);
  std::vector<double> per(n, 0.0);
  for (std::size_t q = 0; q < n; ++q) {
    if (members[q].empty()) continue;
    const double inv = 1.0 / static_cast<double>(members[q].size());
    for (auto i : members[q]) {
      per[q] += inv * policy::log_prob(p, demos[i]);
      if (grad) policy::accumulate_grad_log_prob(p, demos[i], inv, *grad);
    }
  }
  return kernels::ordered_sum(per);
}

TrainState baseline_train(BaselineKind kind, const Config& cfg, std::span<const env::SynthQuerySpec> suite,
                          const policy::PolicyParams& init, std::span<const Trajectory> demos, ArtifactSink* sink) {
  validate(cfg);
  if (init.layout->size() != suite.size()) throw ShapeMismatch("initial policy does not match the suite");
  const auto ex = exec_of(cfg);
  const Clock clock(cfg.record_wallclock);
  TrainState st;
  st.policy = st.ref_policy = init;
  st.seed = cfg.seed;
  const std::size_t n = suite.size();

  if (kind == BaselineKind::imitation) {
    if (demos.empty()) throw MissingInput("imitation needs demonstrations");
    std::vector<policy::SolutionPath> paths;
    for (const auto& d : demos) paths.push_back(policy::to_path(st.policy, d));
    for (int it = 1; it <= cfg.sft_iterations; ++it) {
      st.iteration = it;
      auto grad = policy::Gradient::zeros_like(st.policy);
      const double obj = imitation_objective(st.policy, paths, &grad);
      st.policy = policy::apply_update(st.policy, grad, cfg.sft_learning_rate);
      st.ref_policy = st.policy;
      st.metrics.push_back({it, "sft", obj / static_cast<double>(n), std::nullopt, std::nullopt,
                            mean_trigger_rate(st.policy), mean_of(kernels::expected_rewards(suite, st.policy, ex)),
                            clock.now(), 0});
    }
    write_checkpoint_artifacts(sink, st, cfg, cfg.sft_iterations);
    return st;
  }

  auto opt = objective_options(cfg);
  opt.ce_weight = 0.0;
  const int G = cfg.rollouts_per_query > 0 ? cfg.rollouts_per_query : 2 * cfg.K;
  for (int it = 1; it <= cfg.iterations; ++it) {
    st.iteration = it;
    st.ref_policy = st.policy;
    const auto trajs = rollout::sample_suite(suite, st.ref_policy, G,
                                             derive_seed(cfg.seed, {0xB1, static_cast<std::uint64_t>(it)}), ex);
    InvocationSlice slice{st.interactions, st.interactions + static_cast<long>(n) * G, std::vector<int>(n, 0),
                          std::vector<int>(n, 0)};
    for (std::size_t q = 0; q < n; ++q)
      for (const auto& t : trajs[q]) {
        slice.code[q] += t.decision.c;
        slice.total[q] += 1;
      }
    st.interactions = slice.interactions_end;
    st.invocations.push_back(slice);
    st.metrics.push_back({it, "collect", std::nullopt, std::nullopt, std::nullopt, slice_rate(slice),
                          mean_of(kernels::expected_rewards(suite, st.policy, ex)), clock.now(), st.interactions});

    auto batch = make_onpolicy_batch(st.ref_policy, trajs, cfg.std_floor);
    ObjectiveValue v;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
      if (epoch > 0 && cfg.refresh_ref_per_epoch) {
        st.ref_policy = st.policy;
        rebase(batch, st.ref_policy);
      }
      st = offpolicy_step(st, batch, cfg.learning_rate, opt, &v, ex);
    }
    st.metrics.push_back({it, "update", v.mean(), std::nullopt, std::nullopt, mean_trigger_rate(st.policy),
                          mean_of(kernels::expected_rewards(suite, st.policy, ex)), clock.now(), st.interactions});
    if (sink && sink->enabled() && sink->write_rollouts) {
      std::vector<Trajectory> flat;
      for (const auto& v2 : trajs) flat.insert(flat.end(), v2.begin(), v2.end());
      sink->write(std::filesystem::path(iter_dir(it)) / "rollouts.jsonl", dump_jsonl(to_json_records<Trajectory>(flat)));
    }
    write_checkpoint_artifacts(sink, st, cfg, it);
  }
  return st;
}

std::vector<Trajectory> make_demonstrations(std::span<const env::SynthQuerySpec> suite, const Config& cfg,
                                            std::uint64_t seed) {
  std::vector<Trajectory> out;
  for (std::size_t q = 0; q < suite.size(); ++q) {
    const auto& spec = suite[q];
    Rng rng(derive_seed(seed, {0xDE40, q}));
    const int preferred = static_cast<int>(rng.below(2));
    for (int d = 0; d < cfg.demos_per_query; ++d) {
      const int c = rng.bernoulli(cfg.demo_trigger_confidence) ? preferred : 1 - preferred;
      env::SimPath path;
      if (c == preferred) {
        path.modes = env::optimal_modes(spec);
      } else {
        path.modes.resize(spec.steps());
        for (auto& m : path.modes) m = static_cast<env::Mode>(rng.below(2));
      }
      path.modes[0] = policy::decision_mode(c);
      env::sample_step_outcomes(spec, path.modes, 0, path.step_ok, rng);
      Trajectory tr;
      tr.query_id = spec.query_id;
      tr.decision = {c, 0};
      tr.guidance = Guidance{GuidanceKind::vanilla, 0};
      tr.segments = env::render_steps(spec, path);
      tr.reward = grade(tr.segments.back().text, env::gold_answer(spec));
      tr.policy_tag = "demo";
      tr.rounds = count_exec_results(tr.segments);
      out.push_back(std::move(tr));
    }
  }
  return out;
}

// --- metrics files -----------------------------------------------------------------

namespace {

std::string opt_num(const std::optional<double>& v) { return v ? format_double(*v) : ""; }

std::optional<double> parse_opt(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return std::stod(s);
}

}  // namespace

std::string metrics_csv(std::span<const MetricRow> rows) {
  std::string out = "iteration,phase,objective,elbo,j_mle,mean_invocation_rate,pass1_dev,wallclock_s,interactions\n";
  for (const auto& r : rows) {
    out += std::to_string(r.iteration) + "," + r.phase + "," + opt_num(r.objective) + "," + opt_num(r.elbo) + "," +
           opt_num(r.j_mle) + "," + format_double(r.mean_invocation_rate) + "," + format_double(r.pass1_dev) + "," +
           opt_num(r.wallclock_s) + "," + std::to_string(r.interactions) + "\n";
  }
  return out;
}

std::vector<MetricRow> parse_metrics_csv(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  std::vector<MetricRow> rows;
  if (!std::getline(in, line) || !line.starts_with("iteration,phase,objective"))
    throw ParseError("not a metrics CSV", 1);
  std::size_t no = 1;
  while (std::getline(in, line)) {
    ++no;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) f.push_back(cell);
    if (line.back() == ',') f.emplace_back();
    if (f.size() != 9) throw ParseError("metrics row needs 9 columns", no);
    try {
      rows.push_back({std::stoi(f[0]), f[1], parse_opt(f[2]), parse_opt(f[3]), parse_opt(f[4]), std::stod(f[5]),
                      std::stod(f[6]), parse_opt(f[7]), std::stol(f[8])});
    } catch (const std::logic_error&) {
      throw ParseError("malformed metrics row", no);
    }
  }
  return rows;
}

std::string invocations_text(std::span<const InvocationSlice> slices, std::span<const std::string> query_ids) {
  std::vector<json> rows;
  rows.push_back({{"kind", "autocode.invocations"}, {"queries", std::vector<std::string>(query_ids.begin(), query_ids.end())}});
  for (const auto& s : slices)
    rows.push_back({{"begin", s.interactions_begin}, {"end", s.interactions_end}, {"code", s.code}, {"total", s.total}});
  return dump_jsonl(rows);
}

std::vector<InvocationSlice> parse_invocations(std::string_view text) {
  const auto rows = parse_jsonl(text);
  if (rows.empty() || rows[0].value("kind", "") != "autocode.invocations")
    throw ParseError("not an invocation log", 1);
  std::vector<InvocationSlice> out;
  for (std::size_t i = 1; i < rows.size(); ++i)
    out.push_back({rows[i].at("begin").get<long>(), rows[i].at("end").get<long>(),
                   rows[i].at("code").get<std::vector<int>>(), rows[i].at("total").get<std::vector<int>>()});
  return out;
}

}  // namespace autocode::optim
