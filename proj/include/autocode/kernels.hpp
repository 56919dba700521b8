#pragma once

#include <array>
#include <exception>
#include <span>
#include <vector>

#include <omp.h>

#include "autocode/env.hpp"
#include "autocode/policy.hpp"

// Per-query parallel kernels. Every kernel has a serial reference path
// (Exec::serial) that the OpenMP path must match bit for bit: work items are
// independent, each writes only its own output slot, and any reduction is
// done afterwards in index order.
namespace autocode::kernels {

enum class Exec { serial, openmp };

struct ExecPolicy {
  Exec kind = Exec::openmp;
  int workers = 0;  // 0 = OpenMP default

  static ExecPolicy serial() { return {Exec::serial, 1}; }
  static ExecPolicy parallel(int workers = 0) { return {Exec::openmp, workers}; }
};

// Runs f(i) for i in [0, n). Exceptions are collected per index and the one
// with the lowest index is rethrown, so failures are reported the same way
// regardless of scheduling.
template <class F>
void for_each_index(std::size_t n, const ExecPolicy& ex, F&& f) {
  if (ex.kind == Exec::serial || n < 2) {
    for (std::size_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::vector<std::exception_ptr> errors(n);
  const int threads = ex.workers > 0 ? ex.workers : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic, 1) num_threads(threads)
  for (std::size_t i = 0; i < n; ++i) {
    try {
      f(i);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

// Sum in index order.
double ordered_sum(std::span<const double> values);

// Q(q, c) for every query by enumeration.
std::vector<std::array<double, 2>> exact_q_table(std::span<const env::SynthQuerySpec> suite,
                                                 const policy::PolicyParams& p, const ExecPolicy& ex);

// Expected reward of the policy's own trigger choice, per query.
std::vector<double> expected_rewards(std::span<const env::SynthQuerySpec> suite, const policy::PolicyParams& p,
                                     const ExecPolicy& ex);

// Empirical Q from n sampled rollouts per (query, arm), seeded per item.
std::vector<std::array<double, 2>> sampled_q_table(std::span<const env::SynthQuerySpec> suite,
                                                   const policy::PolicyParams& p, int n, std::uint64_t seed,
                                                   const ExecPolicy& ex);

}  // namespace autocode::kernels
