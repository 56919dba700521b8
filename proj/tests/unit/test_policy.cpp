#include <doctest.h>

#include <cmath>

#include "autocode/error.hpp"
#include "autocode/policy.hpp"
#include "helpers.hpp"

using namespace autocode;
using policy::Mode;

namespace {

policy::SolutionPath random_path(const policy::PolicyParams& p, std::size_t q, Rng& rng) {
  policy::SolutionPath path;
  path.query = q;
  path.c = static_cast<int>(rng.below(2));
  const int T = p.layout->steps[q];
  path.decision_step = static_cast<int>(rng.below(T));
  for (int t = 0; t < T; ++t) path.modes.push_back(static_cast<Mode>(rng.below(2)));
  if (p.coupling == Coupling::first_step) path.modes[path.decision_step] = policy::decision_mode(path.c);
  path.include_trigger = rng.bernoulli(0.5);
  return path;
}

}  // namespace

TEST_SUITE("policy") {
  TEST_CASE("layout shape and lookups") {
    const auto suite = env::generate_suite(1, 5, env::Profile::balanced);
    const auto layout = policy::make_layout(suite);
    CHECK(layout->size() == 5);
    std::size_t total = 0;
    for (const auto& s : suite) total += 2 + 4 * s.steps();
    CHECK(layout->total() == total);
    CHECK(layout->find(suite[2].query_id) == 2);
    CHECK_THROWS_AS(layout->find("nope"), UnknownQuery);
    CHECK_THROWS_AS(policy::make_layout({"a", "a"}, {1, 1}), InvalidArgument);
    CHECK_THROWS_AS(policy::make_layout({"a"}, {17}), InvalidArgument);
  }

  TEST_CASE("probabilities are normalised and coupling pins the decision step") {
    const auto suite = env::generate_suite(1, 3, env::Profile::balanced);
    const auto p = test::random_policy(suite, 4);
    for (std::size_t q = 0; q < 3; ++q) {
      const auto pi = p.decision_prob(q);
      CHECK(pi[0] + pi[1] == doctest::Approx(1.0));
      const auto probs = policy::code_probabilities(p, q, 1);
      CHECK(probs[0] == 1.0);
      CHECK(policy::code_probabilities(p, q, 0)[0] == 0.0);
    }
    const auto base = policy::base_policy(p.layout, 6.0, 1.0);
    CHECK(base.decision_prob(0)[1] == doctest::Approx(1.0 / (1.0 + std::exp(6.0))));
  }

  TEST_CASE("log_prob gradient matches central differences (property)") {
    const auto suite = env::generate_suite(2, 4, env::Profile::balanced);
    for (auto coupling : {Coupling::first_step, Coupling::free}) {
      auto p = test::random_policy(suite, 8);
      p.coupling = coupling;
      Rng rng(13);
      for (int trial = 0; trial < 20; ++trial) {
        const auto path = random_path(p, rng.below(suite.size()), rng);
        auto g = policy::Gradient::zeros_like(p);
        policy::accumulate_grad_log_prob(p, path, 1.0, g);
        for (std::size_t i = 0; i < p.theta.size(); ++i) {
          auto plus = p, minus = p;
          plus.theta[i] += 1e-6;
          minus.theta[i] -= 1e-6;
          const double fd = (policy::log_prob(plus, path) - policy::log_prob(minus, path)) / 2e-6;
          CHECK(g.values[i] == doctest::Approx(fd).epsilon(1e-6));
        }
        double sum = 0.0;
        for (double v : policy::step_log_probs(p, path)) sum += v;
        CHECK(sum == doctest::Approx(policy::log_prob(p, path)));
      }
    }
  }

  TEST_CASE("per-step gradients sum to the path gradient") {
    const auto suite = env::generate_suite(2, 2, env::Profile::balanced);
    const auto p = test::random_policy(suite, 3);
    Rng rng(1);
    const auto path = random_path(p, 1, rng);
    auto total = policy::Gradient::zeros_like(p), parts = policy::Gradient::zeros_like(p);
    policy::accumulate_grad_log_prob(p, path, 1.0, total);
    for (std::size_t i = 0; i < policy::step_log_probs(p, path).size(); ++i)
      policy::accumulate_grad_step(p, path, i, 1.0, parts);
    for (std::size_t i = 0; i < p.theta.size(); ++i) CHECK(parts.values[i] == doctest::Approx(total.values[i]));
  }

  TEST_CASE("sampling reports the log-probability of the sampled steps") {
    const auto suite = env::generate_suite(2, 3, env::Profile::balanced);
    const auto p = test::random_policy(suite, 21);
    Rng rng(2);
    for (int i = 0; i < 50; ++i) {
      const int c = static_cast<int>(rng.below(2));
      const auto s = policy::sample_solution(p, 0, c, rng);
      policy::SolutionPath path{0, c, 0, s.modes, false};
      CHECK(s.gen_logprob == doctest::Approx(policy::log_prob(p, path)));
      CHECK(s.modes[0] == policy::decision_mode(c));
    }
  }

  TEST_CASE("update and checkpoint round-trip") {
    const auto suite = env::generate_suite(2, 6, env::Profile::balanced);
    const auto p = test::random_policy(suite, 5);
    auto g = policy::Gradient::zeros_like(p);
    g.values[3] = 1.0;
    const auto q = policy::apply_update(p, g, 0.5);
    CHECK(q.version == p.version + 1);
    CHECK(q.theta[3] == p.theta[3] + 0.5);
    CHECK_THROWS_AS(policy::apply_update(p, g, -1.0), InvalidArgument);

    const auto dir = test::temp_dir("policy");
    policy::write_checkpoint(q, "abc", dir / "ck.jsonl");
    const auto back = policy::read_checkpoint(dir / "ck.jsonl");
    CHECK(back.theta == q.theta);
    CHECK(back.version == q.version);
    CHECK(back.layout->query_ids == q.layout->query_ids);
    CHECK(policy::checkpoint_text(back, "abc") == policy::checkpoint_text(q, "abc"));
  }
}
