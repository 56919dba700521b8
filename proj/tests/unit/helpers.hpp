#pragma once

#include <cmath>
#include <filesystem>
#include <string>

#include "autocode/config.hpp"
#include "autocode/env.hpp"
#include "autocode/policy.hpp"
#include "autocode/rng.hpp"

namespace test {

// Three-step spec with asymmetric per-step probabilities.
inline autocode::env::SynthQuerySpec coupled_spec() {
  return {"q0", {0.9, 0.6, 0.7}, {0.5, 0.95, 0.8}, 0.1};
}

// Policy over `suite` with trigger pi(1) = sigmoid(0.5) on query 0 and
// per-step reason probabilities [_, .7, .4] after c = 0, [_, .2, .5] after c = 1.
inline autocode::policy::PolicyParams coupled_policy(std::span<const autocode::env::SynthQuerySpec> suite) {
  auto p = autocode::policy::uniform_policy(autocode::policy::make_layout(suite));
  p.theta[p.layout->trigger_offset(0) + 1] = 0.5;
  const double reason[2][3] = {{0.5, 0.7, 0.4}, {0.5, 0.2, 0.5}};
  for (int c = 0; c < 2; ++c)
    for (int t = 0; t < 3; ++t) {
      const auto off = p.layout->mode_offset(0, c, t);
      p.theta[off] = std::log(reason[c][t]);
      p.theta[off + 1] = std::log(1.0 - reason[c][t]);
    }
  return p;
}

// Random policy with logits in [-scale, scale].
inline autocode::policy::PolicyParams random_policy(std::span<const autocode::env::SynthQuerySpec> suite,
                                                    std::uint64_t seed, double scale = 2.0) {
  auto p = autocode::policy::uniform_policy(autocode::policy::make_layout(suite));
  autocode::Rng rng(seed);
  for (auto& v : p.theta) v = rng.uniform(-scale, scale);
  return p;
}

// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  auto d = std::filesystem::temp_directory_path() / ("autocode_test_" + name);
  std::filesystem::remove_all(d);
  std::filesystem::create_directories(d);
  return d;
}

}  // namespace test
