#include <doctest.h>

#include <cstring>
#include <stdexcept>

#include "autocode/kernels.hpp"
#include "autocode/oracle.hpp"
#include "helpers.hpp"

using namespace autocode;

namespace {

bool bitwise_equal(double a, double b) { return std::memcmp(&a, &b, sizeof a) == 0; }

}  // namespace

TEST_SUITE("kernels") {
  TEST_CASE("OpenMP paths match the serial reference bit for bit") {
    const auto suite = env::generate_suite(3, 64, env::Profile::mixed_difficulty);
    const auto p = test::random_policy(suite, 6);
    const auto ser = kernels::ExecPolicy::serial();
    const auto par = kernels::ExecPolicy::parallel(4);

    const auto qs = kernels::exact_q_table(suite, p, ser);
    const auto qp = kernels::exact_q_table(suite, p, par);
    REQUIRE(qs.size() == suite.size());
    for (std::size_t i = 0; i < qs.size(); ++i)
      for (int c = 0; c < 2; ++c) CHECK(bitwise_equal(qs[i][c], qp[i][c]));

    const auto es = kernels::expected_rewards(suite, p, ser);
    const auto ep = kernels::expected_rewards(suite, p, par);
    for (std::size_t i = 0; i < es.size(); ++i) CHECK(bitwise_equal(es[i], ep[i]));
    CHECK(bitwise_equal(kernels::ordered_sum(es), kernels::ordered_sum(ep)));

    const auto ss = kernels::sampled_q_table(suite, p, 32, 99, ser);
    const auto sp = kernels::sampled_q_table(suite, p, 32, 99, par);
    for (std::size_t i = 0; i < ss.size(); ++i)
      for (int c = 0; c < 2; ++c) CHECK(bitwise_equal(ss[i][c], sp[i][c]));
  }

  TEST_CASE("exact table agrees with the per-query oracle") {
    const auto suite = env::generate_suite(8, 10, env::Profile::balanced);
    const auto p = test::random_policy(suite, 2);
    const auto q = kernels::exact_q_table(suite, p, {});
    for (std::size_t i = 0; i < suite.size(); ++i)
      for (int c = 0; c < 2; ++c) CHECK(q[i][c] == env::exact_Q(suite[i], p, i, c));
  }

  TEST_CASE("sampled Q converges to exact Q") {
    const auto suite = env::generate_suite(8, 6, env::Profile::balanced);
    const auto p = test::random_policy(suite, 2);
    const auto exact = kernels::exact_q_table(suite, p, {});
    const int n = 20000;
    const auto sampled = kernels::sampled_q_table(suite, p, n, 1, {});
    for (std::size_t i = 0; i < suite.size(); ++i)
      for (int c = 0; c < 2; ++c) {
        const double q = exact[i][c];
        CHECK(std::abs(sampled[i][c] - q) <= 4 * std::sqrt(q * (1 - q) / n) + 1e-12);
      }
  }

  TEST_CASE("the lowest failing index is reported") {
    for (auto ex : {kernels::ExecPolicy::serial(), kernels::ExecPolicy::parallel(4)}) {
      try {
        kernels::for_each_index(100, ex, [](std::size_t i) {
          if (i == 37 || i == 80) throw std::runtime_error(std::to_string(i));
        });
        FAIL("expected an exception");
      } catch (const std::runtime_error& e) {
        CHECK(std::string(e.what()) == "37");
      }
    }
  }
}
