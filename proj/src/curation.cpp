#include "autocode/curation.hpp"

#include <cmath>

#include "autocode/error.hpp"
#include "autocode/jsonl.hpp"

namespace autocode::curation {

std::vector<std::string> QTable::missing_arms() const {
  std::vector<std::string> out;
  for (const auto& [id, arms] : entries)
    if (arms[0].n == 0 || arms[1].n == 0) out.push_back(id);
  return out;
}

QTable estimate_q(std::span<const Trajectory> rollouts) {
  std::map<std::string, std::array<std::array<long, 2>, 2>> counts;  // [c] = {wins, n}
  for (const auto& t : rollouts) {
    if (t.decision.c != 0 && t.decision.c != 1) throw InvalidArgument("decision c must be 0 or 1");
    auto& cell = counts[t.query_id][t.decision.c];
    cell[0] += t.reward;
    cell[1] += 1;
  }
  QTable out;
  for (const auto& [id, arms] : counts)
    for (int c = 0; c < 2; ++c)
      out.entries[id][c] = {arms[c][1] > 0 ? static_cast<double>(arms[c][0]) / arms[c][1] : 0.0,
                            static_cast<int>(arms[c][1])};
  return out;
}

const StrategyEntry& ReferenceStrategy::at(const std::string& id) const {
  auto it = entries.find(id);
  if (it == entries.end()) throw UnknownQuery(id);
  return it->second;
}

StrategyEntry strategy_entry(std::array<double, 2> pi, std::array<double, 2> q, double alpha,
                             StrategyVariant variant) {
  if (!(alpha >= 0) || !std::isfinite(alpha)) throw InvalidArgument("alpha must be finite and >= 0");
  std::array<double, 2> e{};
  for (int c = 0; c < 2; ++c) {
    if (!std::isfinite(pi[c]) || !std::isfinite(q[c])) throw InvalidArgument("non-finite prior or Q value");
    e[c] = alpha * pi[c] * q[c];
    if (variant == StrategyVariant::appendix_prior) e[c] += std::log(pi[c]);
  }
  const double m = std::max(e[0], e[1]);
  StrategyEntry out;
  out.log_z = m + std::log(std::exp(e[0] - m) + std::exp(e[1] - m));
  out.s[0] = std::exp(e[0] - out.log_z);
  out.s[1] = std::exp(e[1] - out.log_z);
  return out;
}

ReferenceStrategy reference_strategy(const std::map<std::string, std::array<double, 2>>& prior, const QTable& qtable,
                                     double alpha, StrategyVariant variant) {
  ReferenceStrategy out;
  out.variant = variant;
  out.alpha = alpha;
  for (const auto& [id, arms] : qtable.entries) {
    if (arms[0].n == 0 || arms[1].n == 0) {
      out.excluded.push_back(id);
      continue;
    }
    auto it = prior.find(id);
    if (it == prior.end()) throw UnknownQuery(id);
    auto e = strategy_entry(it->second, {arms[0].q_hat, arms[1].q_hat}, alpha, variant);
    e.all_fail = arms[0].q_hat == 0.0 && arms[1].q_hat == 0.0;
    out.entries.emplace(id, e);
  }
  return out;
}

ReferenceStrategy reference_strategy(const policy::PolicyParams& p, const QTable& qtable, double alpha,
                                     StrategyVariant variant) {
  std::map<std::string, std::array<double, 2>> prior;
  for (const auto& [id, arms] : qtable.entries) {
    const auto o = p.layout->trigger_offset(p.layout->find(id));
    if (!std::isfinite(p.theta[o]) || !std::isfinite(p.theta[o + 1]))
      throw InvalidArgument("non-finite trigger logits for '" + id + "'");
    prior[id] = p.decision_prob(id);
  }
  return reference_strategy(prior, qtable, alpha, variant);
}

std::vector<CuratedExample> subsample_query(std::span<const Trajectory> rollouts, std::span<const std::size_t> members,
                                            const std::string& query_id, const StrategyEntry& s, int M, Rng& rng,
                                            bool& fallback) {
  if (M < 1) throw InvalidArgument("subsample size M must be >= 1");
  std::array<std::vector<std::size_t>, 2> arms;
  for (auto i : members) arms[rollouts[i].decision.c].push_back(i);
  std::vector<CuratedExample> out;
  out.reserve(M);
  for (int k = 0; k < M; ++k) {
    int c = rng.uniform() < s.s[1] ? 1 : 0;
    bool fb = false;
    if (arms[c].empty()) {
      c = 1 - c;
      fb = fallback = true;
      if (arms[c].empty()) throw InvalidArgument("query '" + query_id + "' has no rollouts");
    }
    const auto idx = arms[c][rng.below(arms[c].size())];
    const auto& t = rollouts[idx];
    out.push_back({query_id, t.decision, idx, t, 1.0, s.s, t.policy_tag, fb});
  }
  return out;
}

CuratedDataset subsample(std::span<const Trajectory> rollouts, const ReferenceStrategy& ref, int M, Rng& rng) {
  std::map<std::string, std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < rollouts.size(); ++i) members[rollouts[i].query_id].push_back(i);
  CuratedDataset out;
  for (const auto& [id, entry] : ref.entries) {
    auto it = members.find(id);
    if (it == members.end()) throw UnknownQuery(id);
    bool fallback = false;
    auto ex = subsample_query(rollouts, it->second, id, entry, M, rng, fallback);
    if (fallback) out.flagged.push_back(id);
    out.examples.insert(out.examples.end(), ex.begin(), ex.end());
  }
  out.flagged.insert(out.flagged.end(), ref.excluded.begin(), ref.excluded.end());
  return out;
}

CurationResult curate(std::span<const env::SynthQuerySpec> suite, const policy::PolicyParams& p, const Config& cfg,
                      std::uint64_t seed, const kernels::ExecPolicy& ex) {
  const std::size_t n = suite.size();
  if (n != p.layout->size()) throw ShapeMismatch("suite and policy differ in size");
  auto probes = rollout::probe_suite(suite, p, cfg.K, cfg.branch_cap, derive_seed(seed, {1}), ex);

  CurationResult res;
  std::vector<std::size_t> offset(n + 1, 0);
  for (std::size_t q = 0; q < n; ++q) offset[q + 1] = offset[q] + probes[q].trajectories.size();
  res.rollouts.reserve(offset[n]);
  for (auto& pr : probes)
    for (auto& t : pr.trajectories) res.rollouts.push_back(std::move(t));

  res.qtable = estimate_q(res.rollouts);
  res.strategy = reference_strategy(p, res.qtable, cfg.alpha, cfg.strategy_variant);

  std::vector<std::vector<CuratedExample>> per_query(n);
  std::vector<char> fell_back(n, 0);
  kernels::for_each_index(n, ex, [&](std::size_t q) {
    Rng rng(derive_seed(seed, {2, q}));
    std::vector<std::size_t> members(offset[q + 1] - offset[q]);
    for (std::size_t i = 0; i < members.size(); ++i) members[i] = offset[q] + i;
    bool fb = false;
    per_query[q] = subsample_query(res.rollouts, members, suite[q].query_id, res.strategy.at(suite[q].query_id),
                                   cfg.subsample_size, rng, fb);
    fell_back[q] = fb;
  });
  for (std::size_t q = 0; q < n; ++q) {
    res.dataset.examples.insert(res.dataset.examples.end(), per_query[q].begin(), per_query[q].end());
    if (fell_back[q]) res.dataset.flagged.push_back(suite[q].query_id);
  }
  res.dataset.provenance = {config_hash(cfg), seed, "", 0};
  return res;
}

CurationResult curate(std::span<const Query> queries, const policy::PolicyParams* p, int K, double alpha, int M,
                      StrategyVariant variant, const rollout::Backend& backend, Rng& rng) {
  static const policy::PolicyParams empty = [] {
    policy::PolicyParams e;
    e.layout = policy::make_layout(std::vector<std::string>{}, std::vector<int>{});
    return e;
  }();
  CurationResult res;
  std::vector<std::string> incomplete;
  for (const auto& q : queries) {
    rollout::ProbePlan plan;
    plan.query_id = q.id;
    plan.K = K;
    auto pr = rollout::probe(plan, p ? *p : empty, backend, rng);
    if (pr.incomplete[0] || pr.incomplete[1]) incomplete.push_back(q.id);
    res.rollouts.insert(res.rollouts.end(), pr.trajectories.begin(), pr.trajectories.end());
  }
  res.qtable = estimate_q(res.rollouts);
  for (const auto& q : queries)
    if (!res.qtable.entries.count(q.id)) res.qtable.entries[q.id] = {};
  if (p) {
    res.strategy = reference_strategy(*p, res.qtable, alpha, variant);
  } else {
    // Without a tabular trigger head the prior is uniform.
    std::map<std::string, std::array<double, 2>> prior;
    for (const auto& [id, _] : res.qtable.entries) prior[id] = {0.5, 0.5};
    res.strategy = reference_strategy(prior, res.qtable, alpha, variant);
  }
  res.dataset = subsample(res.rollouts, res.strategy, M, rng);
  res.dataset.flagged.insert(res.dataset.flagged.end(), incomplete.begin(), incomplete.end());
  return res;
}

// --- files --------------------------------------------------------------------

std::string qtable_text(const QTable& t) {
  std::vector<json> rows;
  for (const auto& [id, arms] : t.entries)
    for (int c = 0; c < 2; ++c) rows.push_back({{"query_id", id}, {"c", c}, {"q_hat", arms[c].q_hat}, {"n", arms[c].n}});
  return dump_jsonl(rows);
}

QTable read_qtable(const std::filesystem::path& path) {
  QTable t;
  std::size_t line = 0;
  for (const auto& r : read_jsonl(path)) {
    ++line;
    const int c = r.at("c").get<int>();
    if (c != 0 && c != 1) throw ParseError("c must be 0 or 1", line);
    t.entries[r.at("query_id").get<std::string>()][c] = {r.at("q_hat").get<double>(), r.at("n").get<int>()};
  }
  return t;
}

std::string strategy_text(const ReferenceStrategy& s) {
  std::vector<json> rows;
  rows.push_back({{"kind", "autocode.reference_strategy"},
                  {"variant", std::string(to_string(s.variant))},
                  {"alpha", s.alpha},
                  {"excluded", s.excluded}});
  for (const auto& [id, e] : s.entries)
    rows.push_back({{"query_id", id}, {"s", e.s}, {"log_z", e.log_z}, {"all_fail", e.all_fail}});
  return dump_jsonl(rows);
}

ReferenceStrategy read_strategy(const std::filesystem::path& path) {
  const auto rows = read_jsonl(path);
  if (rows.empty() || rows[0].value("kind", "") != "autocode.reference_strategy")
    throw ParseError("not a reference strategy file", 1);
  ReferenceStrategy s;
  s.variant = rows[0].at("variant").get<std::string>() == "appendix-prior" ? StrategyVariant::appendix_prior
                                                                           : StrategyVariant::main_text;
  s.alpha = rows[0].at("alpha").get<double>();
  s.excluded = rows[0].at("excluded").get<std::vector<std::string>>();
  for (std::size_t i = 1; i < rows.size(); ++i) {
    StrategyEntry e;
    e.s = rows[i].at("s").get<std::array<double, 2>>();
    e.log_z = rows[i].at("log_z").get<double>();
    e.all_fail = rows[i].at("all_fail").get<bool>();
    s.entries[rows[i].at("query_id").get<std::string>()] = e;
  }
  return s;
}

std::string dataset_text(const CuratedDataset& d) {
  std::vector<json> rows;
  rows.push_back({{"kind", "autocode.curated"},
                  {"version", 1},
                  {"config_hash", d.provenance.config_hash},
                  {"seed", d.provenance.seed},
                  {"source", d.provenance.source},
                  {"iteration", d.provenance.iteration},
                  {"examples", d.examples.size()},
                  {"flagged", d.flagged}});
  for (const auto& e : d.examples)
    rows.push_back({{"query_id", e.query_id},
                    {"decision", e.decision},
                    {"source_index", e.source_index},
                    {"weight", e.weight},
                    {"s_snapshot", e.s_snapshot},
                    {"policy_tag", e.policy_tag},
                    {"fallback", e.fallback},
                    {"trajectory", e.trajectory}});
  return dump_jsonl(rows);
}

CuratedDataset parse_dataset(std::string_view text) {
  const auto rows = parse_jsonl(text);
  if (rows.empty() || rows[0].value("kind", "") != "autocode.curated") throw ParseError("not a curated dataset", 1);
  CuratedDataset d;
  const auto& h = rows[0];
  d.provenance = {h.at("config_hash").get<std::string>(), h.at("seed").get<std::uint64_t>(),
                  h.at("source").get<std::string>(), h.at("iteration").get<int>()};
  d.flagged = h.at("flagged").get<std::vector<std::string>>();
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& r = rows[i];
    CuratedExample e;
    e.query_id = r.at("query_id").get<std::string>();
    e.decision = r.at("decision").get<Decision>();
    e.source_index = r.at("source_index").get<std::size_t>();
    e.weight = r.at("weight").get<double>();
    if (!(e.weight >= 0)) throw ParseError("negative example weight", i + 1);
    e.s_snapshot = r.at("s_snapshot").get<std::array<double, 2>>();
    e.policy_tag = r.at("policy_tag").get<std::string>();
    e.fallback = r.at("fallback").get<bool>();
    e.trajectory = r.at("trajectory").get<Trajectory>();
    d.examples.push_back(std::move(e));
  }
  if (d.examples.size() != h.at("examples").get<std::size_t>()) throw ParseError("example count mismatch", 1);
  return d;
}

CuratedDataset read_dataset(const std::filesystem::path& path) { return parse_dataset(read_text_file(path)); }

}  // namespace autocode::curation
