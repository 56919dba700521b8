#include <doctest.h>

#include "autocode/error.hpp"
#include "autocode/oracle.hpp"
#include "helpers.hpp"

using namespace autocode;

namespace {

const std::vector<env::SynthQuerySpec> kSuite{test::coupled_spec()};

}  // namespace

TEST_SUITE("oracle") {
  TEST_CASE("exact Q of the coupled fixture (frozen)") {
    const auto p = test::coupled_policy(kSuite);
    CHECK(env::exact_Q(kSuite[0], p, 0, 0) == doctest::Approx(0.4335012000000001).epsilon(1e-13));
    CHECK(env::exact_Q(kSuite[0], p, 0, 1) == doctest::Approx(0.25687800000000005).epsilon(1e-13));
    const auto pi = p.decision_prob(0);
    CHECK(pi[0] == doctest::Approx(0.3775406687981454).epsilon(1e-13));
    CHECK(pi[1] == doctest::Approx(0.6224593312018546).epsilon(1e-13));
    CHECK(env::exact_expected_reward(kSuite[0], p, 0) ==
          doctest::Approx(pi[0] * 0.4335012000000001 + pi[1] * 0.25687800000000005));
  }

  TEST_CASE("exact posteriors across alpha (frozen)") {
    struct Row {
      double alpha;
      std::array<double, 2> main_s;
      double main_z;
      std::array<double, 2> app_s;
      double app_z;
    };
    const Row rows[] = {
        {0, {0.5, 0.5}, 0.6931471805599453, {0.3775406687981454, 0.6224593312018546}, 0.0},
        {1, {0.500942055108355, 0.4990579448916451}, 0.8549291760253843,
         {0.3784266234154771, 0.6215733765845229}, 0.16132043520879244},
        {4, {0.503768153551309, 0.49623184644869106}, 1.3402964614353299,
         {0.3810893391617445, 0.6189106608382556}, 0.6453017930652359},
        {100, {0.593106497953836, 0.4068935020461641}, 16.88881460156124,
         {0.46924449947449975, 0.5307555005255002}, 16.148987638634964},
    };
    const auto p = test::coupled_policy(kSuite);
    for (const auto& r : rows) {
      CAPTURE(r.alpha);
      const auto m = env::exact_posterior(kSuite[0], p, 0, r.alpha, StrategyVariant::main_text);
      const auto a = env::exact_posterior(kSuite[0], p, 0, r.alpha, StrategyVariant::appendix_prior);
      for (int c = 0; c < 2; ++c) {
        CHECK(m.s[c] == doctest::Approx(r.main_s[c]).epsilon(1e-12));
        CHECK(a.s[c] == doctest::Approx(r.app_s[c]).epsilon(1e-12));
      }
      CHECK(m.log_z == doctest::Approx(r.main_z).epsilon(1e-12));
      CHECK(a.log_z == doctest::Approx(r.app_z).epsilon(1e-12));
    }
  }

  TEST_CASE("enumeration equals the product form (property)") {
    const auto suite = env::generate_suite(11, 30, env::Profile::mixed_difficulty);
    for (auto coupling : {Coupling::first_step, Coupling::free}) {
      auto p = test::random_policy(suite, 17, 3.0);
      p.coupling = coupling;
      for (std::size_t q = 0; q < suite.size(); ++q)
        for (int c = 0; c < 2; ++c)
          CHECK(env::exact_Q(suite[q], p, q, c) == doctest::Approx(env::product_Q(suite[q], p, q, c)).epsilon(1e-12));
    }
  }

  TEST_CASE("sharp policies recover the coupled optimum") {
    const auto suite = env::generate_suite(5, 20, env::Profile::balanced);
    const auto layout = policy::make_layout(suite);
    std::vector<int> dec;
    std::vector<env::ModeSequence> modes;
    for (const auto& s : suite) {
      modes.push_back(env::optimal_modes(s));
      dec.push_back(modes.back()[0] == env::Mode::code ? 1 : 0);
    }
    const auto p = policy::deterministic_policy(layout, dec, modes, 40.0);
    for (std::size_t q = 0; q < suite.size(); ++q)
      CHECK(env::exact_expected_reward(suite[q], p, q) == doctest::Approx(env::optimal_success(suite[q])).epsilon(1e-9));
  }

  TEST_CASE("branch Q with an empty prefix equals exact Q") {
    const auto p = test::coupled_policy(kSuite);
    const env::SimPath empty;
    for (int c = 0; c < 2; ++c)
      CHECK(env::exact_branch_Q(kSuite[0], p, 0, c, 0, empty) == doctest::Approx(env::exact_Q(kSuite[0], p, 0, c)));
    // A failed prefix step makes every continuation fail.
    env::SimPath failed{{env::Mode::reason}, {0}};
    CHECK(env::exact_branch_Q(kSuite[0], p, 0, 1, 1, failed) == 0.0);
  }

  TEST_CASE("enumeration cap") {
    env::SynthQuerySpec big{"big", std::vector<double>(17, 0.5), std::vector<double>(17, 0.5), 0.0};
    const auto p = test::coupled_policy(kSuite);
    CHECK_THROWS_AS(env::exact_Q(big, p, 0, 0), Error);
  }
}
