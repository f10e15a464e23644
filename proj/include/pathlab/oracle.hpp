#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "pathlab/matrix.hpp"
#include "pathlab/policy.hpp"

namespace pathlab {

// One terminal history of the generation process: either the policy stopped
// (probability includes the stop action) or the path reached l_max items and
// was cut (no stop factor).  `score` caches sum_t grad log pi_t over every
// action taken, so exact gradients are a probability-weighted sum.
struct EnumeratedPath {
  std::vector<int> items;
  bool truncated = false;
  double log_prob = 0.0;
  double probability = 0.0;
  Matrix score;
};

// Exhaustive depth-first enumeration of all terminal histories.  The count
// is sum_{l=0}^{l_max-1} n^l + n^{l_max}; enumeration refuses to start if it
// would exceed max_paths.
std::vector<EnumeratedPath> enumerate_paths(const PolicyParams& p, const SimulatorModel& sim,
                                            std::span<const int> history, int target,
                                            int l_max, std::uint64_t max_paths = 1000000);

// Number of terminal histories enumerate_paths would produce.
std::uint64_t enumeration_size(int n_items, int l_max);

using PathRewardFn = std::function<double(const EnumeratedPath&)>;

// E[R] = sum_paths P(path) * R(path), exactly.
double exact_expected_reward(const std::vector<EnumeratedPath>& paths, const PathRewardFn& fn);

// E[r_t | position t reached], exactly; t is 1-based.  Throws if no
// enumerated path reaches position t.
double exact_expected_step_reward(const std::vector<EnumeratedPath>& paths,
                                  const std::function<double(const EnumeratedPath&, int)>& step_fn,
                                  int t);
// P(position t reached) = sum of P over paths with length >= t.
double reach_probability(const std::vector<EnumeratedPath>& paths, int t);

// grad_theta E[R] = sum_paths P(path) * score(path) * R(path), exactly.
// Valid for any reward expressible per terminal path, centered variants
// included (centering shifts R, and sum_paths P * score = 0 keeps the
// interpretation consistent).
Matrix exact_gradient(const std::vector<EnumeratedPath>& paths, const PathRewardFn& fn);

}  // namespace pathlab
