#include "autocode/policy.hpp"

#include <algorithm>
#include <cmath>

#include "autocode/error.hpp"
#include "autocode/jsonl.hpp"

namespace autocode::policy {

namespace {

std::array<double, 2> softmax2(double l0, double l1) {
  const double m = std::max(l0, l1);
  const double e0 = std::exp(l0 - m), e1 = std::exp(l1 - m);
  const double z = e0 + e1;
  return {e0 / z, e1 / z};
}

double log_softmax2(double l0, double l1, int k) {
  const double m = std::max(l0, l1);
  const double lse = m + std::log(std::exp(l0 - m) + std::exp(l1 - m));
  return (k == 0 ? l0 : l1) - lse;
}

// Index of a choice in the step's logit pair: 0 = reason, 1 = code.
int mode_index(Mode m) { return m == Mode::code ? 1 : 0; }

int sample_pair(const std::array<double, 2>& probs, Rng& rng) { return rng.uniform() < probs[1] ? 1 : 0; }

}  // namespace

std::size_t Layout::find(const std::string& id) const {
  auto it = index.find(id);
  if (it == index.end()) throw UnknownQuery(id);
  return it->second;
}

std::shared_ptr<const Layout> make_layout(std::vector<std::string> ids, std::vector<int> steps) {
  if (ids.size() != steps.size()) throw ShapeMismatch("layout ids and steps differ in length");
  auto l = std::make_shared<Layout>();
  l->query_ids = std::move(ids);
  l->steps = std::move(steps);
  l->offsets.resize(l->query_ids.size() + 1, 0);
  for (std::size_t q = 0; q < l->query_ids.size(); ++q) {
    if (l->steps[q] < 1 || l->steps[q] > env::kMaxSteps) throw InvalidArgument("policy layout: T outside [1, 16]");
    l->offsets[q + 1] = l->offsets[q] + 2 + 4 * static_cast<std::size_t>(l->steps[q]);
    if (!l->index.emplace(l->query_ids[q], q).second)
      throw InvalidArgument("duplicate query id '" + l->query_ids[q] + "'");
  }
  return l;
}

std::shared_ptr<const Layout> make_layout(std::span<const env::SynthQuerySpec> suite) {
  std::vector<std::string> ids;
  std::vector<int> steps;
  for (const auto& s : suite) {
    ids.push_back(s.query_id);
    steps.push_back(s.steps());
  }
  return make_layout(std::move(ids), std::move(steps));
}

std::array<double, 2> PolicyParams::decision_prob(std::size_t q) const {
  const auto o = layout->trigger_offset(q);
  return softmax2(theta[o], theta[o + 1]);
}

std::array<double, 2> PolicyParams::mode_prob(std::size_t q, int c, int t) const {
  const auto o = layout->mode_offset(q, c, t);
  return softmax2(theta[o], theta[o + 1]);
}

Gradient& Gradient::operator+=(const Gradient& other) {
  if (other.values.size() != values.size()) throw ShapeMismatch("gradient shapes differ");
  for (std::size_t i = 0; i < values.size(); ++i) values[i] += other.values[i];
  return *this;
}

double Gradient::norm() const {
  double s = 0;
  for (double v : values) s += v * v;
  return std::sqrt(s);
}

PolicyParams uniform_policy(std::shared_ptr<const Layout> layout, Coupling coupling) {
  PolicyParams p;
  p.theta.assign(layout->total(), 0.0);
  p.layout = std::move(layout);
  p.coupling = coupling;
  return p;
}

PolicyParams base_policy(std::shared_ptr<const Layout> layout, double trigger_bias, double reason_bias,
                         Coupling coupling) {
  auto p = uniform_policy(std::move(layout), coupling);
  const auto& l = *p.layout;
  for (std::size_t q = 0; q < l.size(); ++q) {
    p.theta[l.trigger_offset(q) + 1] = -trigger_bias;
    for (int t = 0; t < l.steps[q]; ++t) p.theta[l.mode_offset(q, 0, t)] = reason_bias;
  }
  return p;
}

PolicyParams deterministic_policy(std::shared_ptr<const Layout> layout, std::span<const int> decision,
                                  std::span<const ModeSequence> modes, double margin, Coupling coupling) {
  auto p = uniform_policy(std::move(layout), coupling);
  const auto& l = *p.layout;
  if (decision.size() != l.size() || modes.size() != l.size()) throw ShapeMismatch("deterministic_policy shapes");
  for (std::size_t q = 0; q < l.size(); ++q) {
    p.theta[l.trigger_offset(q) + decision[q]] = margin;
    if (static_cast<int>(modes[q].size()) != l.steps[q]) throw ShapeMismatch("deterministic_policy mode length");
    for (int c = 0; c < 2; ++c)
      for (int t = 0; t < l.steps[q]; ++t) p.theta[l.mode_offset(q, c, t) + mode_index(modes[q][t])] = margin;
  }
  return p;
}

Mode decision_mode(int c) { return c == 1 ? Mode::code : Mode::reason; }

bool step_is_free(const PolicyParams& p, const SolutionPath& path, int t) {
  if (t < path.decision_step) return false;
  if (t == path.decision_step && p.coupling == Coupling::first_step) return false;
  return true;
}

int sample_decision(const PolicyParams& p, std::size_t q, Rng& rng) { return sample_pair(p.decision_prob(q), rng); }

SampledSolution sample_solution(const PolicyParams& p, std::size_t q, int c, Rng& rng, int decision_step,
                                std::span<const Mode> prefix) {
  const int T = p.layout->steps[q];
  if (decision_step < 0 || decision_step > T) throw InvalidArgument("decision step out of range");
  if (static_cast<int>(prefix.size()) < decision_step) throw InvalidArgument("prefix shorter than decision step");
  SampledSolution out;
  out.modes.assign(prefix.begin(), prefix.begin() + decision_step);
  for (int t = decision_step; t < T; ++t) {
    if (t == decision_step && p.coupling == Coupling::first_step) {
      out.modes.push_back(decision_mode(c));
      continue;
    }
    const auto o = p.layout->mode_offset(q, c, t);
    const int k = sample_pair(softmax2(p.theta[o], p.theta[o + 1]), rng);
    out.modes.push_back(k == 1 ? Mode::code : Mode::reason);
    out.gen_logprob += log_softmax2(p.theta[o], p.theta[o + 1], k);
  }
  return out;
}

std::vector<double> step_log_probs(const PolicyParams& p, const SolutionPath& path) {
  const auto& l = *p.layout;
  if (static_cast<int>(path.modes.size()) != l.steps[path.query]) throw InvalidArgument("malformed solution path");
  std::vector<double> out;
  if (path.include_trigger) {
    const auto o = l.trigger_offset(path.query);
    out.push_back(log_softmax2(p.theta[o], p.theta[o + 1], path.c));
  }
  for (int t = 0; t < l.steps[path.query]; ++t) {
    if (!step_is_free(p, path, t)) continue;
    const auto o = l.mode_offset(path.query, path.c, t);
    out.push_back(log_softmax2(p.theta[o], p.theta[o + 1], mode_index(path.modes[t])));
  }
  return out;
}

double log_prob(const PolicyParams& p, const SolutionPath& path) {
  double s = 0;
  for (double v : step_log_probs(p, path)) s += v;
  return s;
}

namespace {

void add_pair_score(const PolicyParams& p, std::size_t offset, int k, double scale, Gradient& grad) {
  const auto pr = softmax2(p.theta[offset], p.theta[offset + 1]);
  grad.values[offset] += scale * ((k == 0 ? 1.0 : 0.0) - pr[0]);
  grad.values[offset + 1] += scale * ((k == 1 ? 1.0 : 0.0) - pr[1]);
}

}  // namespace

void accumulate_grad_log_decision(const PolicyParams& p, std::size_t q, int c, double scale, Gradient& grad) {
  add_pair_score(p, p.layout->trigger_offset(q), c, scale, grad);
}

void accumulate_grad_log_prob(const PolicyParams& p, const SolutionPath& path, double scale, Gradient& grad) {
  const auto& l = *p.layout;
  if (path.include_trigger) add_pair_score(p, l.trigger_offset(path.query), path.c, scale, grad);
  for (int t = 0; t < l.steps[path.query]; ++t) {
    if (!step_is_free(p, path, t)) continue;
    add_pair_score(p, l.mode_offset(path.query, path.c, t), mode_index(path.modes[t]), scale, grad);
  }
}

void accumulate_grad_step(const PolicyParams& p, const SolutionPath& path, std::size_t i, double scale,
                          Gradient& grad) {
  const auto& l = *p.layout;
  if (path.include_trigger) {
    if (i == 0) {
      add_pair_score(p, l.trigger_offset(path.query), path.c, scale, grad);
      return;
    }
    --i;
  }
  for (int t = 0; t < l.steps[path.query]; ++t) {
    if (!step_is_free(p, path, t)) continue;
    if (i-- == 0) {
      add_pair_score(p, l.mode_offset(path.query, path.c, t), mode_index(path.modes[t]), scale, grad);
      return;
    }
  }
  throw InvalidArgument("step index out of range");
}

SolutionPath to_path(const PolicyParams& p, const Trajectory& t) {
  SolutionPath path;
  path.query = p.layout->find(t.query_id);
  path.c = t.decision.c;
  const auto decoded = env::decode_segments(t.segments);
  if (static_cast<int>(decoded.path.modes.size()) != p.layout->steps[path.query])
    throw InvalidArgument("trajectory for '" + t.query_id + "' has the wrong number of steps");
  path.modes = decoded.path.modes;
  path.decision_step = env::step_of_position(decoded, t.decision.position);
  path.include_trigger = t.guidance.kind == GuidanceKind::vanilla;
  return path;
}

double log_prob(const PolicyParams& p, const Trajectory& t) { return log_prob(p, to_path(p, t)); }

Gradient grad_log_prob(const PolicyParams& p, const Trajectory& t) {
  auto g = Gradient::zeros_like(p);
  accumulate_grad_log_prob(p, to_path(p, t), 1.0, g);
  return g;
}

PolicyParams apply_update(const PolicyParams& p, const Gradient& grad, double lr) {
  if (grad.values.size() != p.theta.size() || (grad.layout && grad.layout != p.layout &&
                                               grad.layout->offsets != p.layout->offsets))
    throw ShapeMismatch("gradient does not match policy shape");
  if (!(lr >= 0)) throw InvalidArgument("learning rate must be >= 0");
  PolicyParams out = p;
  for (std::size_t i = 0; i < out.theta.size(); ++i) out.theta[i] += lr * grad.values[i];
  ++out.version;
  return out;
}

std::vector<double> code_probabilities(const PolicyParams& p, std::size_t q, int c, int decision_step,
                                       std::span<const Mode> prefix) {
  const int T = p.layout->steps[q];
  std::vector<double> out(T);
  for (int t = 0; t < T; ++t) {
    if (t < decision_step) {
      out[t] = prefix[t] == Mode::code ? 1.0 : 0.0;
    } else if (t == decision_step && p.coupling == Coupling::first_step) {
      out[t] = c == 1 ? 1.0 : 0.0;
    } else {
      out[t] = p.mode_prob(q, c, t)[1];
    }
  }
  return out;
}

std::string checkpoint_text(const PolicyParams& p, const std::string& cfg_hash) {
  const auto& l = *p.layout;
  std::vector<json> rows;
  rows.push_back(json{{"format", "autocode-checkpoint"},
                      {"schema_version", 1},
                      {"version", p.version},
                      {"config_hash", cfg_hash},
                      {"coupling", to_string(p.coupling)},
                      {"queries", l.size()}});
  for (std::size_t q = 0; q < l.size(); ++q) {
    const auto o = l.offsets[q];
    json modes = json::array();
    for (int c = 0; c < 2; ++c) {
      json head = json::array();
      for (int t = 0; t < l.steps[q]; ++t) {
        const auto m = l.mode_offset(q, c, t);
        head.push_back({p.theta[m], p.theta[m + 1]});
      }
      modes.push_back(std::move(head));
    }
    rows.push_back(json{{"query_id", l.query_ids[q]},
                        {"T", l.steps[q]},
                        {"trigger", {p.theta[o], p.theta[o + 1]}},
                        {"modes", std::move(modes)}});
  }
  return dump_jsonl(rows);
}

void write_checkpoint(const PolicyParams& p, const std::string& cfg_hash, const std::filesystem::path& path) {
  write_text_file(path, checkpoint_text(p, cfg_hash));
}

PolicyParams read_checkpoint(const std::filesystem::path& path) {
  const auto rows = read_jsonl(path);
  if (rows.empty() || rows[0].value("format", "") != "autocode-checkpoint")
    throw ParseError("not an autocode checkpoint", 1);
  const auto& head = rows[0];
  std::vector<std::string> ids;
  std::vector<int> steps;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    ids.push_back(rows[i].at("query_id").get<std::string>());
    steps.push_back(rows[i].at("T").get<int>());
  }
  if (ids.size() != head.at("queries").get<std::size_t>()) throw ParseError("checkpoint row count mismatch", 1);
  const auto coupling = head.at("coupling").get<std::string>() == "free" ? Coupling::free : Coupling::first_step;
  auto p = uniform_policy(make_layout(std::move(ids), std::move(steps)), coupling);
  p.version = head.at("version").get<std::uint64_t>();
  const auto& l = *p.layout;
  for (std::size_t q = 0; q < l.size(); ++q) {
    const auto& row = rows[q + 1];
    const auto trig = row.at("trigger").get<std::vector<double>>();
    const auto modes = row.at("modes").get<std::vector<std::vector<std::vector<double>>>>();
    if (trig.size() != 2 || modes.size() != 2) throw ParseError("malformed checkpoint row", q + 2);
    p.theta[l.trigger_offset(q)] = trig[0];
    p.theta[l.trigger_offset(q) + 1] = trig[1];
    for (int c = 0; c < 2; ++c) {
      if (static_cast<int>(modes[c].size()) != l.steps[q]) throw ParseError("malformed checkpoint row", q + 2);
      for (int t = 0; t < l.steps[q]; ++t) {
        if (modes[c][t].size() != 2) throw ParseError("malformed checkpoint row", q + 2);
        p.theta[l.mode_offset(q, c, t)] = modes[c][t][0];
        p.theta[l.mode_offset(q, c, t) + 1] = modes[c][t][1];
      }
    }
  }
  for (double v : p.theta)
    if (!std::isfinite(v)) throw ParseError("non-finite logit in checkpoint", 1);
  return p;
}

}  // namespace autocode::policy
