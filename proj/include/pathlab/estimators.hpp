#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "pathlab/catalog.hpp"
#include "pathlab/matrix.hpp"
#include "pathlab/policy.hpp"

namespace pathlab {

struct RolloutInput {
  InteractionHistory history;
  int target = 0;
};

// A group of rollouts: m sampled paths for each of n inputs, plus the scalar
// per-position rewards (already centered/normalized by the caller's mode).
// sample (i, j) lives at index i*m + j.
struct RolloutBatch {
  std::vector<RolloutInput> inputs;
  int m = 0;
  std::vector<PathSample> samples;
  std::vector<std::vector<double>> step_rewards;  // one entry per generated item

  int n() const { return static_cast<int>(inputs.size()); }
  const PathSample& sample(int i, int j) const { return samples[static_cast<std::size_t>(i) * m + j]; }
  const std::vector<double>& rewards(int i, int j) const {
    return step_rewards[static_cast<std::size_t>(i) * m + j];
  }
  double path_return(int i, int j) const;
  void validate() const;  // shape checks, throws std::invalid_argument
};

enum class EstimatorKind { Std, Rtg, Grpo, A2c, Prorl };
const char* estimator_name(EstimatorKind k);
EstimatorKind estimator_from_name(const std::string& name);

struct GradientEstimate {
  Matrix grad;
  EstimatorKind kind = EstimatorKind::Std;
  int sample_count = 0;
};

// Reward-to-go and position baselines for one batch.
//   reward_to_go[i*m+j][t]  = sum_{l >= t} r_l                  (0-based t)
//   reach_count[i][t]       = #{ j : length(i,j) > t }
//   baseline[i][t]          = mean of reward_to_go over reaching samples
//   advantage[i*m+j][t]     = reward_to_go - baseline (0 when only one
//                             sample reaches t; with leave_one_out, the
//                             sample's own return is excluded from its
//                             baseline instead)
struct AdvantageTable {
  std::vector<std::vector<double>> reward_to_go;
  std::vector<std::vector<int>> reach_count;
  std::vector<std::vector<double>> baseline;
  std::vector<std::vector<double>> advantage;
};

std::vector<std::vector<double>> compute_reward_to_go(const RolloutBatch& batch);
AdvantageTable compute_position_advantages(const RolloutBatch& batch,
                                           bool leave_one_out = false);

// Critic value function for the A2C weights: maps (state features, 0-based
// position) to a scalar value.
using ValueFn = std::function<double(std::span<const double> phi, int t)>;

// Per-sample, per-taken-action weights that define each estimator:
//   Std:   the path's total reward at every position, stop included
//   Rtg:   reward-to-go at item positions, zero on stop
//   Grpo:  total reward minus the input's mean total, every position
//   A2c:   reward-to-go minus critic value at item positions, zero on stop
//   Prorl: position advantage at item positions, zero on stop
// The estimator's gradient is then mean over samples of
// sum_t weights[t] * grad log pi_t.
//
// prorl_leave_one_out selects the exactly unbiased variant of the Prorl
// weights.  The plain weights group samples by reward position, so each
// baseline averages only over samples that CONTINUED past that position;
// the grouping indicator depends on the very action being weighted (item
// vs stop), which leaves a systematic offset proportional to the baseline
// mean times the stop-probability gradient.  The variant fixes both ends:
// baselines become leave-one-out means taken over every sample that reached
// the decision slot (samples that stopped there enter with value 0), and
// the stop action itself carries weight (0 - baseline).  Reaching a slot is
// decided before the slot's action, so the baseline contribution cancels
// exactly and the estimator's mean equals the true gradient of the centered
// objective.
std::vector<std::vector<double>> estimator_step_weights(const SimulatorModel& sim,
                                                        const RolloutBatch& batch,
                                                        EstimatorKind kind,
                                                        const ValueFn& value = {},
                                                        bool prorl_leave_one_out = false);

GradientEstimate estimate_gradient(const PolicyParams& p, const SimulatorModel& sim,
                                   const RolloutBatch& batch, EstimatorKind kind,
                                   const ValueFn& value = {},
                                   bool prorl_leave_one_out = false);

GradientEstimate estimate_std(const PolicyParams& p, const SimulatorModel& sim,
                              const RolloutBatch& batch);
GradientEstimate estimate_rtg(const PolicyParams& p, const SimulatorModel& sim,
                              const RolloutBatch& batch);
GradientEstimate estimate_grpo(const PolicyParams& p, const SimulatorModel& sim,
                               const RolloutBatch& batch);
GradientEstimate estimate_a2c(const PolicyParams& p, const SimulatorModel& sim,
                              const RolloutBatch& batch, const ValueFn& value);
GradientEstimate estimate_prorl(const PolicyParams& p, const SimulatorModel& sim,
                                const RolloutBatch& batch, bool leave_one_out = false);

// estimate.grad -= lambda * mean over samples of grad KL(pi || prior).
void add_kl_gradient(GradientEstimate& estimate, const PolicyParams& p,
                     const PolicyParams& prior, const SimulatorModel& sim,
                     const RolloutBatch& batch, double lambda);

// Population variance of the item-position weights pooled over the whole
// batch (the spread of what multiplies each score term).
double advantage_variance(const SimulatorModel& sim, const RolloutBatch& batch,
                          EstimatorKind kind, const ValueFn& value = {},
                          bool prorl_leave_one_out = false);

// Two-layer ReLU value network on [features, position]; plain full-batch
// gradient descent on squared error against reward-to-go targets.
class CriticModel {
 public:
  CriticModel() = default;
  CriticModel(int input_dim, int hidden, std::uint64_t seed);

  double value(std::span<const double> phi, int t) const;
  ValueFn as_value_fn() const;

  // One descent step on coeff * mean (V - G)^2 over every item position in
  // the batch; returns the pre-step (unscaled) mean squared error.
  double fit_batch(const SimulatorModel& sim, const RolloutBatch& batch, double lr,
                   double coeff);

  int input_dim() const { return in_; }
  int hidden() const { return h_; }

 private:
  double forward(std::span<const double> x, std::vector<double>* hidden_out) const;
  Matrix w1_;
  std::vector<double> b1_;
  std::vector<double> w2_;
  double b2_ = 0.0;
  int in_ = 0;
  int h_ = 0;
};

}  // namespace pathlab
