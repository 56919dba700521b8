#include "autocode/kernels.hpp"

#include "autocode/error.hpp"
#include "autocode/oracle.hpp"

namespace autocode::kernels {

double ordered_sum(std::span<const double> values) {
  double s = 0.0;
  for (double v : values) s += v;
  return s;
}

std::vector<std::array<double, 2>> exact_q_table(std::span<const env::SynthQuerySpec> suite,
                                                 const policy::PolicyParams& p, const ExecPolicy& ex) {
  if (suite.size() != p.layout->size()) throw ShapeMismatch("suite and policy differ in size");
  std::vector<std::array<double, 2>> out(suite.size());
  for_each_index(suite.size(), ex, [&](std::size_t q) {
    out[q] = {env::exact_Q(suite[q], p, q, 0), env::exact_Q(suite[q], p, q, 1)};
  });
  return out;
}

std::vector<double> expected_rewards(std::span<const env::SynthQuerySpec> suite, const policy::PolicyParams& p,
                                     const ExecPolicy& ex) {
  if (suite.size() != p.layout->size()) throw ShapeMismatch("suite and policy differ in size");
  std::vector<double> out(suite.size());
  for_each_index(suite.size(), ex, [&](std::size_t q) { out[q] = env::exact_expected_reward(suite[q], p, q); });
  return out;
}

std::vector<std::array<double, 2>> sampled_q_table(std::span<const env::SynthQuerySpec> suite,
                                                   const policy::PolicyParams& p, int n, std::uint64_t seed,
                                                   const ExecPolicy& ex) {
  if (suite.size() != p.layout->size()) throw ShapeMismatch("suite and policy differ in size");
  if (n < 1) throw InvalidArgument("sample count must be >= 1");
  std::vector<std::array<double, 2>> out(suite.size());
  for_each_index(suite.size(), ex, [&](std::size_t q) {
    for (int c = 0; c < 2; ++c) {
      Rng rng(derive_seed(seed, {q, static_cast<std::uint64_t>(c)}));
      int wins = 0;
      for (int i = 0; i < n; ++i) {
        const auto sol = policy::sample_solution(p, q, c, rng);
        wins += env::sample_outcome(suite[q], sol.modes, rng);
      }
      out[q][c] = static_cast<double>(wins) / n;
    }
  });
  return out;
}

}  // namespace autocode::kernels
