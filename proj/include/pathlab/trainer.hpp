#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pathlab/checkpoint.hpp"
#include "pathlab/config.hpp"
#include "pathlab/estimators.hpp"
#include "pathlab/mining.hpp"
#include "pathlab/oracle.hpp"
#include "pathlab/policy.hpp"
#include "pathlab/rewards.hpp"

namespace pathlab {

// Training produced a non-finite quantity; the command line maps this to
// exit code 3.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Everything deterministic that precedes training: environment, interaction
// logs, mined demonstrations, the pretrained prior, and per-split rollout
// input pools (history prefix of each user's log plus a fixed held-out
// target item).  Heap-held so the simulator's catalog pointer survives moves.
struct ExperimentSetup {
  std::unique_ptr<Catalog> catalog;
  std::unique_ptr<SimulatorModel> sim;
  SplitSequences splits;
  std::vector<Demonstration> demos;
  PolicyParams prior;
  std::vector<RolloutInput> train_pool, val_pool, test_pool;
};

ExperimentSetup prepare_experiment(const ExperimentConfig& cfg);

// Mean pairwise Jaccard distance between the item sets of the sampled paths
// (1 - mean similarity; two empty paths count as identical).  For batches
// larger than max_paths only the first max_paths samples enter the mean.
double jaccard_diversity(std::span<const PathSample> samples, int max_paths = 512);

struct EpochMetrics {
  int epoch = 0;
  double mean_length = 0.0;
  double diversity = 0.0;
  double mean_return = 0.0;   // centered scalar return, batch mean
  double mean_kl = 0.0;       // per-path KL to the prior, batch mean
  double adv_variance = 0.0;  // this estimator's pooled step-weight variance
  double adv_variance_std_ratio = 0.0;  // relative to the std weights, same batch
  double grad_max_abs = 0.0;
  double heldout_ioi = 0.0;
  double heldout_ior = 0.0;
  double heldout_ctr = 0.0;
  double heldout_coherence = 0.0;
  double heldout_length = 0.0;
};

void write_metrics_csv(std::ostream& os, std::span<const EpochMetrics> rows);

struct EvalReport {
  double mean_ioi = 0.0;
  double mean_ior = 0.0;
  double mean_ctr = 0.0;        // over non-empty paths
  double mean_coherence = 0.0;  // over non-empty paths
  double mean_length = 0.0;
  int n_inputs = 0;
  int n_empty = 0;
  bool all_empty = false;  // guidance metrics zero-filled in that case
};

// Decode one path per input (greedy argmax, or one sample per input when
// greedy is false) and score it against the simulator.
EvalReport evaluate(const PolicyParams& p, const SimulatorModel& sim,
                    std::span<const RolloutInput> inputs, int l_max, bool greedy,
                    std::uint64_t seed);

struct TrainResult {
  PolicyParams policy;
  std::vector<EpochMetrics> metrics;
  RewardStats stats;       // frozen warm-up statistics
  EvalReport prior_eval;   // held-out evaluation of the prior
  EvalReport final_eval;   // held-out evaluation of the trained policy
  Checkpoint checkpoint;   // state after the last epoch
};

// Warm-up + policy-gradient training per cfg.  `resume` continues a previous
// run exactly (same config hash required).  Per-epoch metric rows from
// before the resume point are not recomputed.
TrainResult train(const ExperimentConfig& cfg, const ExperimentSetup& setup,
                  const Checkpoint* resume = nullptr, std::ostream* log = nullptr);

// Roll m samples per input with the current policy and score them under the
// given centering mode; the shared workhorse of warm-up and training epochs.
// Inputs are drawn (with replacement) from the stateful input_rng; each
// sample gets its own generator derived from (seed, phase, epoch, i, j) so
// results never depend on evaluation order.
RolloutBatch make_batch(const PolicyParams& p, const SimulatorModel& sim,
                        std::span<const RolloutInput> pool, int batch_size, int m, int l_max,
                        const CenteringMode& mode, const RewardWeights& w,
                        std::uint64_t seed, std::uint64_t phase, std::uint64_t epoch,
                        Rng& input_rng);

// Run rollouts under the prior and pool raw per-component step increments.
RewardStats run_warmup(const ExperimentConfig& cfg, const ExperimentSetup& setup,
                       const PolicyParams& p, Rng& input_rng);

// Single-component, uncentered, path-level-weight training runs that expose
// the length-collapse failure mode, plus the positionwise mean raw step
// reward under the prior (the positive drift that feeds the collapse).
struct CollapseRow {
  int update = 0;
  double mean_length = 0.0;
  double diversity = 0.0;
  double mean_return = 0.0;
};

struct CollapseResult {
  // One trace per selected reward component; unselected components stay empty.
  // runs[c] trains with the raw component reward, normalized_runs[c] is the
  // identical run except step rewards are normalized with frozen warm-up
  // statistics.  The raw arm degenerates (length saturates, paths become
  // nearly identical); the normalized arm keeps moderate lengths.
  std::array<std::vector<CollapseRow>, kNumComponents> runs;
  std::array<std::vector<CollapseRow>, kNumComponents> normalized_runs;
  std::array<std::vector<double>, kNumComponents> prior_step_mean;  // by position
};

// Runs the degeneration demonstration configured by the [collapse] section:
// a fixed promotion task (single history+target when collapse.single_task),
// the path-return-weighted estimator, and aggressive uncentered updates.
CollapseResult collapse_demo(const ExperimentConfig& cfg, const ExperimentSetup& setup,
                             std::ostream* log = nullptr);
void write_collapse_csv(std::ostream& os, std::span<const CollapseRow> rows);

// Best-of-K decoding: draw k_max samples per input once, then report the
// mean over inputs of the best guidance metric among the first k samples.
struct RolloutAtKRow {
  int k = 0;
  double mean_best_ioi = 0.0;
  double mean_best_ior = 0.0;
};

std::vector<RolloutAtKRow> rollout_at_k(const PolicyParams& p, const SimulatorModel& sim,
                                        std::span<const RolloutInput> inputs, int l_max,
                                        std::span<const int> ks, std::uint64_t seed);
void write_rollout_at_k_csv(std::ostream& os, std::span<const RolloutAtKRow> rows);

// The centering mode cfg asks for, built from frozen warm-up statistics.
CenteringMode centering_from_config(const ExperimentConfig& cfg, const RewardStats& stats);
RewardWeights weights_from_config(const ExperimentConfig& cfg);

}  // namespace pathlab
