#include "pathlab/rewards.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

namespace pathlab {

double ioi(const SimulatorModel& sim, std::span<const int> history,
           std::span<const int> path, int target) {
  const auto full = concat_seq(history, path);
  return sim.log_prob(target, full) - sim.log_prob(target, history);
}

double ior(const SimulatorModel& sim, std::span<const int> history,
           std::span<const int> path, int target) {
  const auto full = concat_seq(history, path);
  return static_cast<double>(sim.rank(target, history) - sim.rank(target, full));
}

MetricValue ctr(const SimulatorModel& sim, std::span<const int> history,
                std::span<const int> path) {
  if (path.empty()) return {0.0, false};
  std::vector<int> seq(history.begin(), history.end());
  double sum = 0.0;
  for (int item : path) {
    sum += sim.prob(item, seq);
    seq.push_back(item);
  }
  return {sum / static_cast<double>(path.size()), true};
}

MetricValue coherence(const Catalog& cat, std::span<const int> path) {
  if (path.size() < 2) return {1.0, false};
  int hits = 0;
  const int pairs = static_cast<int>(path.size()) - 1;
  for (int k = 0; k < pairs; ++k) {
    const auto& a = cat.item_of(path[k]).attributes;
    const auto& b = cat.item_of(path[k + 1]).attributes;
    // both sorted: linear merge intersection test
    std::size_t i = 0, j = 0;
    bool shared = false;
    while (i < a.size() && j < b.size()) {
      if (a[i] == b[j]) { shared = true; break; }
      if (a[i] < b[j]) ++i; else ++j;
    }
    if (shared) ++hits;
  }
  return {static_cast<double>(hits) / pairs, true};
}

double path_reward(const SimulatorModel& sim, std::span<const int> history,
                   std::span<const int> path, int target, const RewardWeights& w) {
  const MetricValue c = ctr(sim, history, path);
  return w.alpha * ioi(sim, history, path, target) +
         w.beta * ior(sim, history, path, target) +
         w.gamma * (c.defined ? c.value : 0.0);
}

StepRewards decompose(const SimulatorModel& sim, std::span<const int> history,
                      std::span<const int> path, int target) {
  StepRewards sr;
  sr.length = static_cast<int>(path.size());
  for (auto& v : sr.comp) v.reserve(sr.length);

  // incremental state along the prefix
  std::vector<int> seq(history.begin(), history.end());
  const double base_lp = sim.log_prob(target, history);
  const int base_rank = sim.rank(target, history);
  double prev_ioi = 0.0, prev_ior = 0.0, prev_ctr = 0.0;
  double prob_sum = 0.0;

  for (int t = 0; t < sr.length; ++t) {
    prob_sum += sim.prob(path[t], seq);
    seq.push_back(path[t]);
    const double cur_ioi = sim.log_prob(target, seq) - base_lp;
    const double cur_ior = static_cast<double>(base_rank - sim.rank(target, seq));
    const double cur_ctr = prob_sum / (t + 1);
    sr.comp[kIoi].push_back(cur_ioi - prev_ioi);
    sr.comp[kIor].push_back(cur_ior - prev_ior);
    sr.comp[kCtr].push_back(cur_ctr - prev_ctr);
    prev_ioi = cur_ioi;
    prev_ior = cur_ior;
    prev_ctr = cur_ctr;
  }
  sr.totals = {prev_ioi, prev_ior, prev_ctr};
  return sr;
}

void RewardStats::check_open() const {
  if (frozen_) throw std::logic_error("RewardStats: update after freeze");
}

void RewardStats::accumulate_value(int component, double v) {
  check_open();
  // Welford update per component; n_ counts positions, advanced on the last
  // component so each position bumps it exactly once.
  const std::int64_t n = n_ + 1;
  const double delta = v - mean_[component];
  mean_[component] += delta / static_cast<double>(n);
  m2_[component] += delta * (v - mean_[component]);
  if (component == kNumComponents - 1) n_ = n;
}

void RewardStats::accumulate(const StepRewards& sr) {
  check_open();
  for (int t = 0; t < sr.length; ++t)
    for (int c = 0; c < kNumComponents; ++c) accumulate_value(c, sr.comp[c][t]);
}

void RewardStats::freeze() {
  if (frozen_) throw std::logic_error("RewardStats: freeze called twice");
  frozen_ = true;
}

double RewardStats::mean(int c) const {
  if (n_ == 0) throw std::logic_error("RewardStats: no data");
  return mean_[c];
}

double RewardStats::variance(int c) const {
  if (n_ == 0) throw std::logic_error("RewardStats: no data");
  return m2_[c] / static_cast<double>(n_);
}

double RewardStats::stddev(int c) const { return std::sqrt(variance(c)); }

void RewardStats::save(std::ostream& os) const {
  os << "rewardstats 1\n" << (frozen_ ? 1 : 0) << ' ' << n_;
  char buf[40];
  for (int c = 0; c < kNumComponents; ++c) {
    std::snprintf(buf, sizeof buf, " %.17g", mean_[c]);
    os << buf;
  }
  for (int c = 0; c < kNumComponents; ++c) {
    std::snprintf(buf, sizeof buf, " %.17g", m2_[c]);
    os << buf;
  }
  os << '\n';
}

RewardStats RewardStats::load(std::istream& is) {
  std::string tag;
  int version = 0, fr = 0;
  RewardStats st;
  is >> tag >> version >> fr >> st.n_;
  if (!is || tag != "rewardstats" || version != 1)
    throw std::invalid_argument("RewardStats::load: malformed stream");
  for (int c = 0; c < kNumComponents; ++c) is >> st.mean_[c];
  for (int c = 0; c < kNumComponents; ++c) is >> st.m2_[c];
  if (!is) throw std::invalid_argument("RewardStats::load: truncated stream");
  st.frozen_ = fr != 0;
  return st;
}

CenteringMode CenteringMode::raw() { return {}; }

CenteringMode CenteringMode::center(double rbar) {
  CenteringMode m;
  m.kind = Kind::Center;
  m.rbar = rbar;
  return m;
}

CenteringMode CenteringMode::normalize(RewardStats stats) {
  CenteringMode m;
  m.kind = Kind::Normalize;
  m.stats = std::move(stats);
  return m;
}

CenteringMode CenteringMode::fixed_offset(RewardStats stats, double epsilon) {
  CenteringMode m;
  m.kind = Kind::FixedOffset;
  m.stats = std::move(stats);
  m.epsilon = epsilon;
  return m;
}

namespace {
// stddev guard shared by the statistics-based modes
double checked_sigma(const RewardStats& st, int c) {
  const double s = st.stddev(c);
  if (s == 0.0)
    throw std::runtime_error(std::string("apply_centering: zero stddev for component ") +
                             component_name(c) + " (degenerate warm-up statistics)");
  return s;
}
}  // namespace

std::vector<double> apply_centering(const StepRewards& sr, const CenteringMode& mode,
                                    const RewardWeights& w) {
  std::vector<double> out(sr.length, 0.0);
  switch (mode.kind) {
    case CenteringMode::Kind::Raw:
    case CenteringMode::Kind::Center: {
      for (int t = 0; t < sr.length; ++t) {
        double v = 0.0;
        for (int c = 0; c < kNumComponents; ++c) v += w.raw_weight(c) * sr.comp[c][t];
        if (mode.kind == CenteringMode::Kind::Center) v -= mode.rbar;
        out[t] = v;
      }
      break;
    }
    case CenteringMode::Kind::Normalize:
    case CenteringMode::Kind::FixedOffset: {
      if (!mode.stats.frozen())
        throw std::logic_error("apply_centering: statistics must be frozen");
      double sigma[kNumComponents];
      double mu[kNumComponents];
      for (int c = 0; c < kNumComponents; ++c) {
        if (w.component_weights[c] == 0.0) {
          sigma[c] = 1.0;  // unused
          mu[c] = 0.0;
          continue;
        }
        sigma[c] = checked_sigma(mode.stats, c);
        mu[c] = mode.stats.mean(c);
      }
      const bool subtract_mean = mode.kind == CenteringMode::Kind::Normalize;
      for (int t = 0; t < sr.length; ++t) {
        double v = 0.0;
        for (int c = 0; c < kNumComponents; ++c) {
          if (w.component_weights[c] == 0.0) continue;
          const double centered = sr.comp[c][t] - (subtract_mean ? mu[c] : 0.0);
          v += w.component_weights[c] * centered / sigma[c];
        }
        if (!subtract_mean) v -= mode.epsilon;
        out[t] = v;
      }
      break;
    }
  }
  return out;
}

double scalar_mean(const RewardStats& stats, const RewardWeights& w) {
  double m = 0.0;
  for (int c = 0; c < kNumComponents; ++c) m += w.raw_weight(c) * stats.mean(c);
  return m;
}

void accumulate_warmup(RewardStats& stats, std::span<const StepRewards> batch) {
  for (const auto& sr : batch) stats.accumulate(sr);
}

}  // namespace pathlab
