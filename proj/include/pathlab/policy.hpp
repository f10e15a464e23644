#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "pathlab/catalog.hpp"
#include "pathlab/matrix.hpp"
#include "pathlab/mining.hpp"
#include "pathlab/rng.hpp"

namespace pathlab {

// Linear-softmax policy over catalog items plus a reserved stop action (the
// last action index).  Action logits are W * phi / temperature where phi is
// the fixed feature map below; everything about the gradient is closed form,
// which keeps estimator tests exact.
struct PolicyParams {
  Matrix weights;            // n_actions x feature_dim
  int n_actions = 0;         // catalog size + 1 (stop)
  double temperature = 1.0;  // > 0

  int stop_action() const { return n_actions - 1; }
  int feature_dim() const { return weights.cols; }
};

// phi(history, generated, target) = [ context(history + generated), emb(target), 1 ].
// The context reuses the simulator's decayed-mean encoder so the policy sees
// the same state summary the environment scores with.
int feature_dim(const Catalog& cat);
std::vector<double> features(const SimulatorModel& sim, std::span<const int> history,
                             std::span<const int> generated, int target);
// Stable id for the feature map layout above, stored in checkpoints.
std::uint64_t feature_map_hash(const SimulatorModel& sim);

PolicyParams make_policy(const Catalog& cat, double temperature);

// Softmax over actions at the given state; index i < catalog size selects
// catalog item i, the last index stops the path.
std::vector<double> action_distribution(const PolicyParams& p, const SimulatorModel& sim,
                                        std::span<const int> history,
                                        std::span<const int> generated, int target);
std::vector<double> action_log_distribution(const PolicyParams& p, const SimulatorModel& sim,
                                            std::span<const int> history,
                                            std::span<const int> generated, int target);

// One sampled path.  log_probs holds the log-probability of every action
// actually taken: one entry per generated item, plus a final entry for the
// stop action unless the path hit l_max and was truncated (no stop is taken
// in that case).
struct PathSample {
  std::vector<int> items;         // catalog ids, generation order
  std::vector<double> log_probs;  // per taken action, stop included if taken
  bool truncated = false;
  int input_index = 0;
  int sample_index = 0;
};

PathSample sample_path(const PolicyParams& p, const SimulatorModel& sim,
                       std::span<const int> history, int target, int l_max, Rng& rng);

// Deterministic argmax decode (ties -> lowest action index).
PathSample greedy_path(const PolicyParams& p, const SimulatorModel& sim,
                       std::span<const int> history, int target, int l_max);

// grad log pi(a | state) for every step of a sampled path, parameter-shaped.
std::vector<Matrix> grad_log_prob(const PolicyParams& p, const SimulatorModel& sim,
                                  std::span<const int> history, int target,
                                  const PathSample& sample);

// out += scale * sum_t weights[t] * grad log pi_t, replaying the sample.
// weights has one entry per log_probs entry.
void accumulate_path_gradient(const PolicyParams& p, const SimulatorModel& sim,
                              std::span<const int> history, int target,
                              const PathSample& sample, std::span<const double> weights,
                              double scale, Matrix& out);

// Full-batch maximum-likelihood fit to mined demonstrations.  Each
// demonstration is an action sequence (its items, then stop) conditioned on
// an empty history and its goal as target; demonstrations with l_max or more
// items are capped at l_max with no stop action, mirroring how sampled paths
// truncate.  Starts from zero weights (the objective is concave, so the
// start point is immaterial).
PolicyParams pretrain_supervised(const SimulatorModel& sim,
                                 const std::vector<Demonstration>& demos, int l_max,
                                 int epochs, double lr, double temperature);

// Mean per-action log-likelihood of the demonstrations under p.
double demo_log_likelihood(const PolicyParams& p, const SimulatorModel& sim,
                           const std::vector<Demonstration>& demos, int l_max);

// Sum over the sample's realized states of KL(pi || prior) over the full
// action set (the stop decision's state included).
double kl_per_path(const PolicyParams& p, const PolicyParams& prior,
                   const SimulatorModel& sim, std::span<const int> history, int target,
                   const PathSample& sample);

// out += scale * grad_theta of kl_per_path.
void accumulate_kl_gradient(const PolicyParams& p, const PolicyParams& prior,
                            const SimulatorModel& sim, std::span<const int> history,
                            int target, const PathSample& sample, double scale, Matrix& out);

// Minimal stop-or-continue model used by the collapse theory checks: a
// single logit theta, stop probability sigmoid(theta), position rewards mu.
struct StopOnlyModel {
  double theta = 0.0;
  std::vector<double> mu;  // mu[t-1] = expected reward of reaching position t
  int l_max = 0;

  double stop_prob() const;
};

}  // namespace pathlab
