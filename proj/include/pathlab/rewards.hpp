#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "pathlab/catalog.hpp"

namespace pathlab {

// The three guidance signals a recommended path is scored on:
//   Ioi - log-prob lift of the target item after the path is consumed
//   Ior - rank improvement of the target item
//   Ctr - mean stepwise acceptance probability of the path itself
enum RewardComponent { kIoi = 0, kIor = 1, kCtr = 2 };
inline constexpr int kNumComponents = 3;
inline const char* component_name(int c) {
  static const char* names[kNumComponents] = {"ioi", "ior", "ctr"};
  return names[c];
}

// alpha/beta/gamma combine raw components into a scalar path reward;
// component_weights combine per-component normalized step rewards.
struct RewardWeights {
  double alpha = 1.0;
  double beta = 1.0;
  double gamma = 1.0;
  std::array<double, kNumComponents> component_weights{1.0, 1.0, 1.0};

  double raw_weight(int c) const {
    return c == kIoi ? alpha : (c == kIor ? beta : gamma);
  }
};

// Metric plus a definedness flag for cases with no sensible value
// (CTR of an empty path, coherence of a single item).
struct MetricValue {
  double value = 0.0;
  bool defined = true;
};

double ioi(const SimulatorModel& sim, std::span<const int> history,
           std::span<const int> path, int target);
double ior(const SimulatorModel& sim, std::span<const int> history,
           std::span<const int> path, int target);
MetricValue ctr(const SimulatorModel& sim, std::span<const int> history,
                std::span<const int> path);
// Fraction of consecutive path pairs sharing at least one attribute;
// vacuously 1 (flagged undefined) for fewer than two items.
MetricValue coherence(const Catalog& cat, std::span<const int> path);

double path_reward(const SimulatorModel& sim, std::span<const int> history,
                   std::span<const int> path, int target, const RewardWeights& w);

// Per-position reward increments, kept separately per component:
//   comp[c][t] = R_c(path[0..t]) - R_c(path[0..t-1])   (prefix of length 0 scores 0)
// so each component's increments sum back to its path-level value exactly.
struct StepRewards {
  int length = 0;
  std::array<std::vector<double>, kNumComponents> comp;
  std::array<double, kNumComponents> totals{};
};

StepRewards decompose(const SimulatorModel& sim, std::span<const int> history,
                      std::span<const int> path, int target);

// Streaming mean/variance per component, pooled over every path position seen
// during warm-up.  Frozen once at the end of warm-up and immutable afterwards
// so normalization statistics cannot drift during training.
class RewardStats {
 public:
  void accumulate(const StepRewards& sr);
  void accumulate_value(int component, double v);
  void freeze();
  bool frozen() const { return frozen_; }
  std::int64_t count() const { return n_; }

  double mean(int c) const;
  double variance(int c) const;  // population variance
  double stddev(int c) const;

  void save(std::ostream& os) const;
  static RewardStats load(std::istream& is);

 private:
  void check_open() const;
  std::array<double, kNumComponents> mean_{};
  std::array<double, kNumComponents> m2_{};
  std::int64_t n_ = 0;
  bool frozen_ = false;
};

// How raw per-component step increments become the scalar training reward.
struct CenteringMode {
  enum class Kind { Raw, Center, Normalize, FixedOffset };
  Kind kind = Kind::Raw;
  double rbar = 0.0;       // Center: scalar mean subtracted at every position
  RewardStats stats;       // Normalize / FixedOffset: frozen warm-up statistics
  double epsilon = 0.0;    // FixedOffset: constant subtracted after scaling

  static CenteringMode raw();
  static CenteringMode center(double rbar);
  static CenteringMode normalize(RewardStats stats);
  static CenteringMode fixed_offset(RewardStats stats, double epsilon);
};

// Scalar per-position rewards under the given mode.
//   Raw / Center: alpha,beta,gamma-weighted sum (minus rbar for Center).
//   Normalize:    sum_c w_c * (r_c - mean_c) / stddev_c
//   FixedOffset:  sum_c w_c * r_c / stddev_c - epsilon
// Throws if a needed stddev is zero (degenerate warm-up statistics) or if
// stats are not frozen.
std::vector<double> apply_centering(const StepRewards& sr, const CenteringMode& mode,
                                    const RewardWeights& w);

// Mean of the alpha,beta,gamma-collapsed scalar step reward under `stats`.
double scalar_mean(const RewardStats& stats, const RewardWeights& w);

void accumulate_warmup(RewardStats& stats, std::span<const StepRewards> batch);

}  // namespace pathlab
