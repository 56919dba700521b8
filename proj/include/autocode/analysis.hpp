#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "autocode/env.hpp"
#include "autocode/kernels.hpp"
#include "autocode/optim.hpp"
#include "autocode/policy.hpp"

namespace autocode::analysis {

// --- evaluation --------------------------------------------------------------

enum class Arm { autonomous = 0, cot = 1, code = 2 };
std::string_view to_string(Arm a);  // "auto", "cot", "code"
Arm parse_arm(std::string_view s);
std::vector<Arm> parse_arms(std::string_view csv);

// Outcomes per arm, query and sample. Arms that were not evaluated have no
// rows. `auto_choice` holds the decision of every autonomous sample.
struct EvalResult {
  std::vector<std::string> query_ids;
  int n = 0;
  std::array<std::vector<std::vector<int>>, 3> outcomes;
  std::vector<std::vector<int>> auto_choice;
  double temperature = 1.0;
  double top_p = 1.0;
  std::uint64_t seed = 0;

  bool has(Arm a) const { return !outcomes[static_cast<int>(a)].empty(); }
  const std::vector<std::vector<int>>& arm(Arm a) const { return outcomes[static_cast<int>(a)]; }
};

void validate(const EvalResult& r);

// Simulated evaluation with common random numbers: sample j of the forced
// arm c and sample j of the autonomous arm share one random stream whenever
// the autonomous policy picks c, so the autonomous outcome of a pair equals
// the forced outcome of the arm it chose.
EvalResult evaluate(std::span<const env::SynthQuerySpec> suite, const policy::PolicyParams& p, int n,
                    std::uint64_t seed, std::span<const Arm> arms, const kernels::ExecPolicy& ex = {});

// Header {"kind":"autocode.eval",n,seed,temperature,top_p,arms} then one row
// per query {query_id, auto, auto_c, cot, code} with the evaluated arms only.
std::string eval_text(const EvalResult& r);
EvalResult parse_eval(std::string_view text);

// Builds an EvalResult from trajectories (LLM mode), grouped by query id in
// `query_ids` order. Every arm present must have exactly n per query.
EvalResult eval_from_trajectories(std::span<const std::string> query_ids, int n,
                                  const std::array<std::vector<Trajectory>, 3>& per_arm);

// Mean over queries of per-query mean correctness. Throws MissingInput if a
// query has fewer than n samples.
double pass_at_1(std::span<const std::vector<int>> outcomes, int n);

struct SelectionReport {
  double auto_acc = 0.0;
  double cot_acc = 0.0;
  double code_acc = 0.0;
  double union_bound = 0.0;
  std::optional<double> selection_accuracy;  // absent without decisive pairs
  std::size_t decisive = 0;
  std::size_t pairs = 0;
};

// Pairs are (query, sample index). A pair is decisive when exactly one
// forced arm succeeded; selection accuracy is the share of decisive pairs
// where the autonomous sample chose that arm. Needs all three arms.
SelectionReport selection_report(const EvalResult& r);
std::string selection_report_csv(const SelectionReport& s);

// --- invocation phases ---------------------------------------------------------

struct PhaseBucket {
  long begin = 0;
  long end = 0;
  std::vector<std::optional<double>> rates;  // per query, absent without rollouts
  std::array<int, 10> hist{};
  double extremity = 0.0;
};

struct PhaseBuckets {
  std::vector<PhaseBucket> phases;
  std::vector<std::string> query_ids;
};

// Splits the training budget into `n_phases` equal spans of interactions,
// assigns each slice to the span holding its midpoint and histograms the
// per-query code rates (10 bins). Extremity index = share of queries with
// rate <= low or >= high. Throws InvalidArgument if a phase gets no slice.
PhaseBuckets invocation_histogram(std::span<const optim::InvocationSlice> slices,
                                  std::span<const std::string> query_ids, double low = 0.1, double high = 0.9,
                                  int n_phases = 3);

// Slice from logged trajectories (e.g. one file per iteration).
optim::InvocationSlice slice_from_trajectories(std::span<const Trajectory> ts, std::span<const std::string> query_ids,
                                               long begin, long end);

std::string invocation_hist_csv(const PhaseBuckets& b);

// --- efficiency curves ---------------------------------------------------------------

struct Trace {
  std::string method;
  std::uint64_t seed = 0;
  std::vector<optim::MetricRow> rows;
};

struct CurvePoint {
  long interactions = 0;
  double mean = 0.0;
  double lo = 0.0;
  double hi = 0.0;
};

struct Curve {
  std::string method;
  std::vector<CurvePoint> points;  // increasing interactions
  std::size_t seeds = 0;
  double final_mean = 0.0;
};

// Post-update pass@1 against interactions for one trace.
std::vector<std::pair<long, double>> trace_points(const Trace& t);

// One curve per method with min/max bands over seeds. Seeds of a method
// must share the interaction grid (ShapeMismatch otherwise).
std::vector<Curve> efficiency_curves(std::span<const Trace> traces);
std::string efficiency_csv(std::span<const Trace> traces);

// Value of a trace at the last point with interactions <= budget.
std::optional<double> value_at(const Trace& t, long budget);

// --- rounds and statistics ---------------------------------------------------------

std::map<int, std::size_t> round_distribution(std::span<const Trajectory> ts, int max_rounds);
std::string round_distribution_csv(const std::map<int, std::size_t>& d);

struct SignTest {
  std::size_t wins = 0;    // a > b
  std::size_t losses = 0;  // a < b
  std::size_t ties = 0;
  double p_greater = 1.0;    // one-sided: P(X >= wins) under p = 1/2
  double p_two_sided = 1.0;
};

SignTest sign_test(std::span<const double> a, std::span<const double> b);

// Wilson score interval at the given z.
std::pair<double, double> binomial_ci(std::size_t successes, std::size_t n, double z = 1.96);

// --- charts ----------------------------------------------------------------------------

// Self-contained SVG charts. Each embeds its data as CSV inside <desc>.
std::string efficiency_svg(std::span<const Curve> curves, std::optional<double> optimum, std::string_view data_csv);
std::string invocation_svg(const PhaseBuckets& b, std::string_view title);
std::string selection_svg(const SelectionReport& s);

}  // namespace autocode::analysis
