#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "autocode/config.hpp"
#include "autocode/core.hpp"
#include "autocode/env.hpp"
#include "autocode/kernels.hpp"
#include "autocode/policy.hpp"
#include "autocode/rollout.hpp"

// The E-step: Q estimates from probe rollouts, the energy-form reference
// strategy over the trigger decision, and subsampling of the candidate set.
namespace autocode::curation {

struct QEntry {
  double q_hat = 0.0;
  int n = 0;
  bool operator==(const QEntry&) const = default;
};

struct QTable {
  std::map<std::string, std::array<QEntry, 2>> entries;  // ordered by query id

  std::vector<std::string> missing_arms() const;  // queries with an empty arm
  bool operator==(const QTable&) const = default;
};

QTable estimate_q(std::span<const Trajectory> rollouts);

struct StrategyEntry {
  std::array<double, 2> s{0.5, 0.5};
  double log_z = 0.0;
  bool all_fail = false;  // both arms had zero successes

  bool operator==(const StrategyEntry&) const = default;
};

struct ReferenceStrategy {
  StrategyVariant variant = StrategyVariant::main_text;
  double alpha = 0.0;
  std::map<std::string, StrategyEntry> entries;
  std::vector<std::string> excluded;  // queries missing an arm

  const StrategyEntry& at(const std::string& id) const;
  bool operator==(const ReferenceStrategy&) const = default;
};

// main-text:      s(c) = exp(alpha * pi(c) * Q(c)) / Z
// appendix-prior: s(c) = pi(c) * exp(alpha * pi(c) * Q(c)) / Z
// evaluated in log space.
StrategyEntry strategy_entry(std::array<double, 2> pi, std::array<double, 2> q, double alpha, StrategyVariant variant);

ReferenceStrategy reference_strategy(const policy::PolicyParams& p, const QTable& qtable, double alpha,
                                     StrategyVariant variant);
// Same with an explicit prior per query id.
ReferenceStrategy reference_strategy(const std::map<std::string, std::array<double, 2>>& prior, const QTable& qtable,
                                     double alpha, StrategyVariant variant);

struct CuratedExample {
  std::string query_id;
  Decision decision;
  std::size_t source_index = 0;  // position in the source rollout file
  Trajectory trajectory;
  double weight = 1.0;
  std::array<double, 2> s_snapshot{0.5, 0.5};
  std::string policy_tag;
  bool fallback = false;  // drawn from the other arm because the chosen one was empty

  bool operator==(const CuratedExample&) const = default;
};

struct Provenance {
  std::string config_hash;
  std::uint64_t seed = 0;
  std::string source;
  int iteration = 0;
  bool operator==(const Provenance&) const = default;
};

struct CuratedDataset {
  std::vector<CuratedExample> examples;
  Provenance provenance;
  std::vector<std::string> flagged;

  bool operator==(const CuratedDataset&) const = default;
};

// Per query: M draws of c ~ s, then a trajectory uniformly (with
// replacement) from that query's c-arm, weight 1. Queries are visited in id
// order.
CuratedDataset subsample(std::span<const Trajectory> rollouts, const ReferenceStrategy& ref, int M, Rng& rng);

// Subsampling of a single query's rollouts (indices are into `rollouts`).
std::vector<CuratedExample> subsample_query(std::span<const Trajectory> rollouts, std::span<const std::size_t> members,
                                            const std::string& query_id, const StrategyEntry& s, int M, Rng& rng,
                                            bool& fallback);

struct CurationResult {
  std::vector<Trajectory> rollouts;
  QTable qtable;
  ReferenceStrategy strategy;
  CuratedDataset dataset;
};

// Full simulated E-step over a suite: probe -> estimate_q ->
// reference_strategy -> subsample, parallel over queries.
CurationResult curate(std::span<const env::SynthQuerySpec> suite, const policy::PolicyParams& p, const Config& cfg,
                      std::uint64_t seed, const kernels::ExecPolicy& ex);

// Backend-generic E-step (simulation or endpoint).
CurationResult curate(std::span<const Query> queries, const policy::PolicyParams* p, int K, double alpha, int M,
                      StrategyVariant variant, const rollout::Backend& backend, Rng& rng);

// Sidecar files.
std::string qtable_text(const QTable& t);
QTable read_qtable(const std::filesystem::path& path);
std::string strategy_text(const ReferenceStrategy& s);
ReferenceStrategy read_strategy(const std::filesystem::path& path);
std::string dataset_text(const CuratedDataset& d);
CuratedDataset read_dataset(const std::filesystem::path& path);
CuratedDataset parse_dataset(std::string_view text);

}  // namespace autocode::curation
