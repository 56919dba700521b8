#include <doctest.h>

#include <cmath>

#include "autocode/analysis.hpp"
#include "autocode/error.hpp"
#include "autocode/oracle.hpp"
#include "helpers.hpp"

using namespace autocode;
using analysis::Arm;

namespace {

analysis::EvalResult hand_eval() {
  analysis::EvalResult r;
  r.query_ids = {"a", "b"};
  r.n = 2;
  r.outcomes[1] = {{1, 0}, {0, 0}};  // cot
  r.outcomes[2] = {{1, 1}, {1, 0}};  // code
  r.auto_choice = {{0, 1}, {1, 0}};
  r.outcomes[0] = {{1, 1}, {1, 0}};
  return r;
}

optim::MetricRow row(int it, const char* phase, long interactions, double pass1) {
  optim::MetricRow m;
  m.iteration = it;
  m.phase = phase;
  m.interactions = interactions;
  m.pass1_dev = pass1;
  return m;
}

}  // namespace

TEST_SUITE("analysis") {
  TEST_CASE("arm names") {
    CHECK(analysis::parse_arms("auto,cot,code").size() == 3);
    CHECK(analysis::to_string(analysis::parse_arm("code")) == "code");
    CHECK_THROWS_AS(analysis::parse_arm("tool"), InvalidArgument);
    CHECK_THROWS_AS(analysis::parse_arms("cot,cot"), InvalidArgument);
  }

  TEST_CASE("pass@1 and the selection report on a hand example") {
    const auto r = hand_eval();
    CHECK(analysis::pass_at_1(r.arm(Arm::cot), 2) == 0.25);
    CHECK_THROWS_AS(analysis::pass_at_1(r.arm(Arm::cot), 3), MissingInput);
    const auto s = analysis::selection_report(r);
    CHECK(s.auto_acc == 0.75);
    CHECK(s.cot_acc == 0.25);
    CHECK(s.code_acc == 0.75);
    CHECK(s.union_bound == 0.75);
    // Decisive pairs: (a,1) code only, (b,0) code only; auto chose code on both.
    CHECK(s.decisive == 2);
    CHECK(s.pairs == 4);
    CHECK(*s.selection_accuracy == 1.0);
    CHECK(analysis::selection_report_csv(s) ==
          "auto_acc,cot_acc,code_acc,union_bound,selection_accuracy,decisive,pairs\n0.75,0.25,0.75,0.75,1,2,4\n");

    auto partial = r;
    partial.outcomes[1].clear();
    CHECK_THROWS_AS(analysis::selection_report(partial), ShapeMismatch);
    auto tied = r;
    tied.outcomes[1] = tied.outcomes[2];
    CHECK_FALSE(analysis::selection_report(tied).selection_accuracy.has_value());
  }

  TEST_CASE("evaluation uses common random numbers and round-trips") {
    const auto suite = env::generate_suite(2, 12, env::Profile::balanced);
    const auto p = test::random_policy(suite, 3);
    const auto arms = analysis::parse_arms("auto,cot,code");
    const auto r = analysis::evaluate(suite, p, 8, 5, arms, kernels::ExecPolicy::serial());
    const auto par = analysis::evaluate(suite, p, 8, 5, arms, kernels::ExecPolicy::parallel(4));
    CHECK(r.outcomes == par.outcomes);
    for (std::size_t q = 0; q < suite.size(); ++q)
      for (int j = 0; j < 8; ++j) {
        const int c = r.auto_choice[q][j];
        CHECK(r.arm(Arm::autonomous)[q][j] == r.arm(c ? Arm::code : Arm::cot)[q][j]);
      }
    // Evaluating a single arm reproduces the same outcomes.
    const std::vector<Arm> only_code{Arm::code};
    CHECK(analysis::evaluate(suite, p, 8, 5, only_code).arm(Arm::code) == r.arm(Arm::code));

    const auto back = analysis::parse_eval(analysis::eval_text(r));
    CHECK(back.outcomes == r.outcomes);
    CHECK(back.auto_choice == r.auto_choice);
    CHECK(back.query_ids == r.query_ids);
    CHECK(back.seed == r.seed);
    CHECK(analysis::eval_text(back) == analysis::eval_text(r));
  }

  TEST_CASE("sampled pass@1 agrees with the exact expected reward") {
    const auto suite = env::generate_suite(4, 20, env::Profile::balanced);
    const auto p = test::random_policy(suite, 6);
    const int n = 400;
    const std::vector<Arm> arms{Arm::autonomous};
    const auto r = analysis::evaluate(suite, p, n, 1, arms);
    double exact = 0.0, var = 0.0;
    for (std::size_t q = 0; q < suite.size(); ++q) {
      const double e = env::exact_expected_reward(suite[q], p, q);
      exact += e;
      var += e * (1 - e) / n;
    }
    const double nq = static_cast<double>(suite.size());
    const double sigma = std::sqrt(var) / nq;
    CHECK(std::abs(analysis::pass_at_1(r.arm(Arm::autonomous), n) - exact / nq) < 3 * sigma);
  }

  TEST_CASE("invocation phases") {
    const std::vector<std::string> ids{"a", "b", "c"};
    // Budget 90: phases [0,30) [30,60) [60,90); midpoints 15, 45, 75.
    const std::vector<optim::InvocationSlice> slices{
        {0, 30, {0, 3, 5}, {10, 10, 10}},
        {30, 60, {0, 10, 10}, {10, 10, 10}},
        {60, 90, {1, 10, 9}, {10, 10, 10}},
    };
    const auto b = analysis::invocation_histogram(slices, ids, 0.1, 0.9);
    REQUIRE(b.phases.size() == 3);
    CHECK(b.phases[0].begin == 0);
    CHECK(b.phases[2].end == 90);
    CHECK(b.phases[0].hist[0] == 1);
    CHECK(b.phases[0].hist[3] == 1);
    CHECK(b.phases[0].hist[5] == 1);
    CHECK(b.phases[0].extremity == doctest::Approx(1.0 / 3));
    CHECK(b.phases[1].hist[9] == 2);
    CHECK(b.phases[1].extremity == 1.0);
    CHECK(b.phases[2].hist[1] == 1);
    CHECK(b.phases[2].extremity == 1.0);  // 0.1 and 0.9 count as extreme
    const auto csv = analysis::invocation_hist_csv(b);
    CHECK(csv.starts_with("phase,begin,end,bin_lo,bin_hi,count,extremity\n"));

    // A query without rollouts in a phase is left out rather than counted as 0.
    auto sparse = slices;
    sparse[0].total[0] = 0;
    sparse[0].code[0] = 0;
    const auto sb = analysis::invocation_histogram(sparse, ids);
    CHECK_FALSE(sb.phases[0].rates[0].has_value());
    CHECK(sb.phases[0].extremity == 0.0);

    const std::vector<optim::InvocationSlice> two{slices[0], slices[2]};
    CHECK_THROWS_AS(analysis::invocation_histogram(two, ids), InvalidArgument);
    CHECK_THROWS_AS(analysis::invocation_histogram(slices, std::vector<std::string>{"a"}), ShapeMismatch);
  }

  TEST_CASE("efficiency curves and budget lookups") {
    analysis::Trace a{"em", 0, {row(0, "init", 0, 0.2), row(1, "mstep", 10, 0.4), row(2, "mstep", 20, 0.6)}};
    analysis::Trace b{"em", 1, {row(0, "init", 0, 0.2), row(1, "mstep", 10, 0.5), row(2, "mstep", 20, 0.7)}};
    analysis::Trace c{"ppo", 0, {row(0, "init", 0, 0.2), row(1, "update", 10, 0.3)}};
    const std::vector<analysis::Trace> traces{a, b, c};
    const auto curves = analysis::efficiency_curves(traces);
    REQUIRE(curves.size() == 2);
    CHECK(curves[0].method == "em");
    CHECK(curves[0].seeds == 2);
    // Only post-update rows are points.
    REQUIRE(curves[0].points.size() == 2);
    CHECK(curves[0].points[0].interactions == 10);
    CHECK(curves[0].points[0].mean == doctest::Approx(0.45));
    CHECK(curves[0].points[0].lo == 0.4);
    CHECK(curves[0].points[0].hi == 0.5);
    CHECK(curves[0].final_mean == doctest::Approx(0.65));
    CHECK(*analysis::value_at(a, 15) == 0.4);
    CHECK(*analysis::value_at(a, 1000) == 0.6);
    CHECK(analysis::efficiency_csv(traces).starts_with("method,seed,interactions,pass1\n"));

    auto off_grid = b;
    off_grid.rows[1].interactions = 11;
    const std::vector<analysis::Trace> bad{a, off_grid};
    CHECK_THROWS_AS(analysis::efficiency_curves(bad), ShapeMismatch);
    analysis::Trace backwards{"x", 0, {row(1, "mstep", 20, 0.1), row(2, "mstep", 10, 0.2)}};
    CHECK_THROWS_AS(analysis::trace_points(backwards), ShapeMismatch);
  }

  TEST_CASE("sign test and binomial interval") {
    const std::vector<double> hi(10, 1.0), lo(10, 0.0);
    const auto t = analysis::sign_test(hi, lo);
    CHECK(t.wins == 10);
    CHECK(t.p_greater == doctest::Approx(1.0 / 1024));
    CHECK(t.p_two_sided == doctest::Approx(2.0 / 1024));
    const std::vector<double> x{1, 2, 3, 4}, y{1, 1, 4, 3};
    const auto u = analysis::sign_test(x, y);
    CHECK(u.wins == 2);
    CHECK(u.losses == 1);
    CHECK(u.ties == 1);
    CHECK(u.p_greater == doctest::Approx(0.5));
    const auto [l, h] = analysis::binomial_ci(5, 10);
    CHECK(l == doctest::Approx(0.23658959361548731).epsilon(1e-12));
    CHECK(h == doctest::Approx(0.7634104063845126).epsilon(1e-12));
    CHECK(analysis::binomial_ci(0, 0) == std::pair{0.0, 1.0});
  }

  TEST_CASE("round distribution") {
    std::vector<Trajectory> ts(5);
    const int rounds[] = {0, 1, 1, 3, 7};
    for (int i = 0; i < 5; ++i) ts[i].rounds = rounds[i];
    const auto d = analysis::round_distribution(ts, 3);
    CHECK(d.at(0) == 1);
    CHECK(d.at(1) == 2);
    CHECK(d.at(3) == 2);
  }

  TEST_CASE("charts embed their data") {
    const auto s = analysis::selection_report(hand_eval());
    const auto svg = analysis::selection_svg(s);
    CHECK(svg.starts_with("<svg"));
    CHECK(svg.find("<desc>") != std::string::npos);
    CHECK(svg.find("union_bound") != std::string::npos);
    analysis::Trace a{"em", 0, {row(0, "init", 0, 0.2), row(1, "mstep", 10, 0.4)}};
    const std::vector<analysis::Trace> traces{a};
    const auto curves = analysis::efficiency_curves(traces);
    const auto e = analysis::efficiency_svg(curves, 0.9, analysis::efficiency_csv(traces));
    CHECK(e.find("method,seed,interactions,pass1") != std::string::npos);
    CHECK(e.ends_with("</svg>\n"));
  }
}
