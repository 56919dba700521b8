#include <doctest.h>

#include <cmath>
#include <fstream>

#include "autocode/curation.hpp"
#include "autocode/error.hpp"
#include "autocode/oracle.hpp"
#include "helpers.hpp"

using namespace autocode;
using curation::StrategyEntry;

namespace {

Trajectory traj(const std::string& id, int c, int reward) {
  Trajectory t;
  t.query_id = id;
  t.decision = {c, 0};
  t.guidance = {c == 1 ? GuidanceKind::prefix_code : GuidanceKind::vanilla, 0};
  t.segments = {Segment::reasoning("r"), Segment::final_answer(reward ? "1" : "0")};
  t.reward = reward;
  t.policy_tag = "v0";
  return t;
}

}  // namespace

TEST_SUITE("curation") {
  TEST_CASE("strategy entries (frozen)") {
    const auto e = curation::strategy_entry({0.5, 0.5}, {0.1, 0.4}, 4.0, StrategyVariant::main_text);
    CHECK(e.s[1] == doctest::Approx(0.6456563062257954).epsilon(1e-13));
    const auto m = curation::strategy_entry({0.3, 0.7}, {0.6, 0.4}, 4.0, StrategyVariant::main_text);
    CHECK(m.s[0] == doctest::Approx(0.40131233988754805).epsilon(1e-13));
    CHECK(m.s[1] == doctest::Approx(0.598687660112452).epsilon(1e-13));
    CHECK(m.log_z == doctest::Approx(1.6330152523999526).epsilon(1e-13));
    const auto a = curation::strategy_entry({0.3, 0.7}, {0.6, 0.4}, 4.0, StrategyVariant::appendix_prior);
    CHECK(a.s[0] == doctest::Approx(0.22316824259411205).epsilon(1e-13));
    CHECK(a.s[1] == doctest::Approx(0.7768317574058881).epsilon(1e-13));
    CHECK(a.log_z == doctest::Approx(1.0158565365565737).epsilon(1e-13));
  }

  TEST_CASE("strategy limits and invariants (property)") {
    Rng rng(3);
    for (int i = 0; i < 200; ++i) {
      const double p1 = rng.uniform(0.01, 0.99);
      const std::array<double, 2> pi{1 - p1, p1}, q{rng.uniform(), rng.uniform()};
      for (auto v : {StrategyVariant::main_text, StrategyVariant::appendix_prior}) {
        const auto e = curation::strategy_entry(pi, q, rng.uniform(0, 50), v);
        CHECK(e.s[0] + e.s[1] == doctest::Approx(1.0));
        CHECK(e.s[0] >= 0.0);
        CHECK(e.s[1] >= 0.0);
      }
      const auto zero = curation::strategy_entry(pi, q, 0.0, StrategyVariant::appendix_prior);
      CHECK(zero.s[1] == doctest::Approx(p1));
      // Large alpha concentrates on the arm with the larger pi * Q.
      const auto big = curation::strategy_entry(pi, q, 1e4, StrategyVariant::main_text);
      if (std::abs(pi[1] * q[1] - pi[0] * q[0]) > 1e-2) CHECK((big.s[1] > 0.99) == (pi[1] * q[1] > pi[0] * q[0]));
    }
    // Extreme energies stay finite in log space.
    const auto e = curation::strategy_entry({0.5, 0.5}, {1.0, 0.0}, 1e6, StrategyVariant::main_text);
    CHECK(std::isfinite(e.log_z));
    CHECK(e.s[0] == 1.0);
    CHECK_THROWS_AS(curation::strategy_entry({0.5, 0.5}, {0.1, 0.1}, -1, StrategyVariant::main_text), InvalidArgument);
  }

  TEST_CASE("Q table, exclusion and all-fail") {
    std::vector<Trajectory> r{traj("a", 0, 1), traj("a", 0, 0), traj("a", 1, 1), traj("b", 0, 1),
                              traj("c", 0, 0), traj("c", 1, 0)};
    const auto qt = curation::estimate_q(r);
    CHECK(qt.entries.at("a")[0] == curation::QEntry{0.5, 2});
    CHECK(qt.entries.at("a")[1] == curation::QEntry{1.0, 1});
    CHECK(qt.missing_arms() == std::vector<std::string>{"b"});
    const std::map<std::string, std::array<double, 2>> prior{{"a", {.5, .5}}, {"b", {.5, .5}}, {"c", {.5, .5}}};
    const auto ref = curation::reference_strategy(prior, qt, 4.0, StrategyVariant::main_text);
    CHECK(ref.excluded == std::vector<std::string>{"b"});
    CHECK(ref.at("c").all_fail);
    CHECK_FALSE(ref.at("a").all_fail);
    CHECK_THROWS_AS(ref.at("b"), UnknownQuery);
  }

  TEST_CASE("subsampling follows s and falls back on an empty arm") {
    std::vector<Trajectory> r;
    for (int i = 0; i < 4; ++i) r.push_back(traj("a", 0, i % 2));
    for (int i = 0; i < 4; ++i) r.push_back(traj("a", 1, 1));
    std::vector<std::size_t> members(r.size());
    for (std::size_t i = 0; i < r.size(); ++i) members[i] = i;

    Rng rng(1);
    bool fb = false;
    StrategyEntry s{{0.25, 0.75}, 0.0, false};
    const int M = 40000;
    const auto ex = curation::subsample_query(r, members, "a", s, M, rng, fb);
    CHECK_FALSE(fb);
    REQUIRE(ex.size() == std::size_t(M));
    int ones = 0;
    for (const auto& e : ex) {
      ones += e.decision.c;
      CHECK(r[e.source_index].decision.c == e.decision.c);
      CHECK(e.trajectory == r[e.source_index]);
      CHECK(e.weight == 1.0);
      CHECK(e.s_snapshot == s.s);
    }
    CHECK(std::abs(ones / double(M) - 0.75) < 4 * std::sqrt(0.75 * 0.25 / M));

    const std::vector<std::size_t> only_reason{0, 1, 2, 3};
    const auto fbx = curation::subsample_query(r, only_reason, "a", {{0.0, 1.0}, 0.0, false}, 5, rng, fb);
    CHECK(fb);
    for (const auto& e : fbx) {
      CHECK(e.decision.c == 0);
      CHECK(e.fallback);
    }
    CHECK_THROWS_AS(curation::subsample_query(r, members, "a", s, 0, rng, fb), InvalidArgument);
  }

  TEST_CASE("full simulated E-step is deterministic and parallel-invariant") {
    const auto suite = env::generate_suite(2, 24, env::Profile::balanced);
    const auto p = test::random_policy(suite, 9);
    Config cfg;
    cfg.K = 6;
    cfg.subsample_size = 3;
    const auto a = curation::curate(suite, p, cfg, 77, kernels::ExecPolicy::serial());
    const auto b = curation::curate(suite, p, cfg, 77, kernels::ExecPolicy::parallel(4));
    CHECK(a.rollouts == b.rollouts);
    CHECK(a.qtable == b.qtable);
    CHECK(a.strategy == b.strategy);
    CHECK(a.dataset == b.dataset);
    CHECK(a.rollouts.size() == suite.size() * 2 * 6);
    CHECK(a.dataset.examples.size() == suite.size() * 3);
    CHECK(a.dataset.provenance.config_hash == config_hash(cfg));
  }

  TEST_CASE("estimated Q converges to the exact oracle") {
    const std::vector<env::SynthQuerySpec> suite{test::coupled_spec()};
    const auto p = test::coupled_policy(suite);
    Config cfg;
    cfg.K = 20000;
    cfg.subsample_size = 1;
    const auto res = curation::curate(suite, p, cfg, 5, {});
    for (int c = 0; c < 2; ++c) {
      const double q = env::exact_Q(suite[0], p, 0, c);
      CHECK(std::abs(res.qtable.entries.at("q0")[c].q_hat - q) < 4 * std::sqrt(q * (1 - q) / cfg.K));
    }
  }

  TEST_CASE("sidecar files round-trip") {
    const auto suite = env::generate_suite(4, 8, env::Profile::balanced);
    const auto p = test::random_policy(suite, 1);
    Config cfg;
    cfg.K = 3;
    const auto res = curation::curate(suite, p, cfg, 1, {});
    const auto dir = test::temp_dir("curation");
    const auto put = [&](const char* name, const std::string& text) {
      std::ofstream(dir / name) << text;
      return dir / name;
    };
    CHECK(curation::read_qtable(put("q.jsonl", curation::qtable_text(res.qtable))) == res.qtable);
    CHECK(curation::read_strategy(put("s.jsonl", curation::strategy_text(res.strategy))) == res.strategy);
    CHECK(curation::read_dataset(put("d.jsonl", curation::dataset_text(res.dataset))) == res.dataset);
    CHECK(curation::parse_dataset(curation::dataset_text(res.dataset)) == res.dataset);
  }
}
