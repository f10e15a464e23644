#include "pathlab/estimators.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "pathlab/rng.hpp"

namespace pathlab {

double RolloutBatch::path_return(int i, int j) const {
  const auto& r = rewards(i, j);
  double s = 0.0;
  for (double v : r) s += v;
  return s;
}

void RolloutBatch::validate() const {
  if (m < 1) throw std::invalid_argument("RolloutBatch: m must be >= 1");
  const std::size_t expect = static_cast<std::size_t>(n()) * m;
  if (samples.size() != expect || step_rewards.size() != expect)
    throw std::invalid_argument("RolloutBatch: sample/reward count mismatch");
  for (std::size_t k = 0; k < samples.size(); ++k)
    if (step_rewards[k].size() != samples[k].items.size())
      throw std::invalid_argument("RolloutBatch: step reward length mismatch");
}

const char* estimator_name(EstimatorKind k) {
  switch (k) {
    case EstimatorKind::Std: return "std";
    case EstimatorKind::Rtg: return "rtg";
    case EstimatorKind::Grpo: return "grpo";
    case EstimatorKind::A2c: return "a2c";
    case EstimatorKind::Prorl: return "prorl";
  }
  return "?";
}

EstimatorKind estimator_from_name(const std::string& name) {
  if (name == "std") return EstimatorKind::Std;
  if (name == "rtg") return EstimatorKind::Rtg;
  if (name == "grpo") return EstimatorKind::Grpo;
  if (name == "a2c") return EstimatorKind::A2c;
  if (name == "prorl") return EstimatorKind::Prorl;
  throw std::invalid_argument("unknown estimator '" + name + "'");
}

std::vector<std::vector<double>> compute_reward_to_go(const RolloutBatch& batch) {
  std::vector<std::vector<double>> g(batch.step_rewards.size());
  for (std::size_t k = 0; k < batch.step_rewards.size(); ++k) {
    const auto& r = batch.step_rewards[k];
    g[k].resize(r.size());
    double acc = 0.0;
    for (int t = static_cast<int>(r.size()) - 1; t >= 0; --t) {
      acc += r[t];
      g[k][t] = acc;
    }
  }
  return g;
}

AdvantageTable compute_position_advantages(const RolloutBatch& batch, bool leave_one_out) {
  if (batch.m < 2)
    throw std::invalid_argument("compute_position_advantages: need m >= 2 rollouts per input");
  AdvantageTable tab;
  tab.reward_to_go = compute_reward_to_go(batch);
  tab.reach_count.resize(batch.n());
  tab.baseline.resize(batch.n());
  tab.advantage.resize(batch.samples.size());

  for (int i = 0; i < batch.n(); ++i) {
    int max_len = 0;
    for (int j = 0; j < batch.m; ++j)
      max_len = std::max(max_len, static_cast<int>(batch.sample(i, j).items.size()));
    auto& cnt = tab.reach_count[i];
    auto& base = tab.baseline[i];
    cnt.assign(max_len, 0);
    base.assign(max_len, 0.0);
    std::vector<double> sum(max_len, 0.0);
    for (int j = 0; j < batch.m; ++j) {
      const auto& g = tab.reward_to_go[static_cast<std::size_t>(i) * batch.m + j];
      for (std::size_t t = 0; t < g.size(); ++t) {
        cnt[t] += 1;
        sum[t] += g[t];
      }
    }
    for (int t = 0; t < max_len; ++t) base[t] = sum[t] / cnt[t];
    for (int j = 0; j < batch.m; ++j) {
      const std::size_t k = static_cast<std::size_t>(i) * batch.m + j;
      const auto& g = tab.reward_to_go[k];
      auto& adv = tab.advantage[k];
      adv.assign(g.size(), 0.0);
      for (std::size_t t = 0; t < g.size(); ++t) {
        if (cnt[t] < 2) continue;  // a lone sample at this depth carries no signal
        if (leave_one_out) {
          const double others = (sum[t] - g[t]) / (cnt[t] - 1);
          adv[t] = g[t] - others;
        } else {
          adv[t] = g[t] - base[t];
        }
      }
    }
  }
  return tab;
}

std::vector<std::vector<double>> estimator_step_weights(const SimulatorModel& sim,
                                                        const RolloutBatch& batch,
                                                        EstimatorKind kind,
                                                        const ValueFn& value,
                                                        bool prorl_leave_one_out) {
  batch.validate();
  std::vector<std::vector<double>> w(batch.samples.size());
  auto weights_for = [&](int i, int j) -> std::vector<double>& {
    return w[static_cast<std::size_t>(i) * batch.m + j];
  };

  switch (kind) {
    case EstimatorKind::Std: {
      for (int i = 0; i < batch.n(); ++i)
        for (int j = 0; j < batch.m; ++j) {
          const double R = batch.path_return(i, j);
          weights_for(i, j).assign(batch.sample(i, j).log_probs.size(), R);
        }
      break;
    }
    case EstimatorKind::Rtg: {
      const auto g = compute_reward_to_go(batch);
      for (int i = 0; i < batch.n(); ++i)
        for (int j = 0; j < batch.m; ++j) {
          const std::size_t k = static_cast<std::size_t>(i) * batch.m + j;
          auto& wk = weights_for(i, j);
          wk.assign(batch.samples[k].log_probs.size(), 0.0);
          for (std::size_t t = 0; t < g[k].size(); ++t) wk[t] = g[k][t];
        }
      break;
    }
    case EstimatorKind::Grpo: {
      if (batch.m < 2)
        throw std::invalid_argument("grpo weights: need m >= 2 rollouts per input");
      for (int i = 0; i < batch.n(); ++i) {
        double mean = 0.0;
        for (int j = 0; j < batch.m; ++j) mean += batch.path_return(i, j);
        mean /= batch.m;
        for (int j = 0; j < batch.m; ++j) {
          const double a = batch.path_return(i, j) - mean;
          weights_for(i, j).assign(batch.sample(i, j).log_probs.size(), a);
        }
      }
      break;
    }
    case EstimatorKind::A2c: {
      if (!value) throw std::invalid_argument("a2c weights: critic value function required");
      const auto g = compute_reward_to_go(batch);
      for (int i = 0; i < batch.n(); ++i) {
        const auto& inp = batch.inputs[i];
        for (int j = 0; j < batch.m; ++j) {
          const std::size_t k = static_cast<std::size_t>(i) * batch.m + j;
          const auto& s = batch.samples[k];
          auto& wk = weights_for(i, j);
          wk.assign(s.log_probs.size(), 0.0);
          for (std::size_t t = 0; t < g[k].size(); ++t) {
            const std::span<const int> gen(s.items.data(), t);
            const auto phi = features(sim, inp.history.items, gen, inp.target);
            wk[t] = g[k][t] - value(phi, static_cast<int>(t));
          }
        }
      }
      break;
    }
    case EstimatorKind::Prorl: {
      if (!prorl_leave_one_out) {
        const auto tab = compute_position_advantages(batch);
        for (int i = 0; i < batch.n(); ++i)
          for (int j = 0; j < batch.m; ++j) {
            const std::size_t k = static_cast<std::size_t>(i) * batch.m + j;
            auto& wk = weights_for(i, j);
            wk.assign(batch.samples[k].log_probs.size(), 0.0);
            for (std::size_t t = 0; t < tab.advantage[k].size(); ++t)
              wk[t] = tab.advantage[k][t];
          }
        break;
      }
      // Exactly unbiased variant: index decisions by slot.  Every sample
      // that reached slot s made a decision there — its (s+1)-th item
      // (slot value = reward-to-go from s) or stop (slot value = 0) — so
      // the participant set is fixed before the slot's action and a
      // leave-one-out baseline over it cancels in expectation.  Weights:
      // item slots get value - baseline, the stop slot gets -baseline.
      if (batch.m < 2)
        throw std::invalid_argument("prorl weights: need m >= 2 rollouts per input");
      const auto g = compute_reward_to_go(batch);
      for (int i = 0; i < batch.n(); ++i) {
        std::size_t max_slots = 0;
        for (int j = 0; j < batch.m; ++j)
          max_slots = std::max(max_slots, batch.sample(i, j).log_probs.size());
        std::vector<double> sum(max_slots, 0.0);
        std::vector<int> cnt(max_slots, 0);
        for (int j = 0; j < batch.m; ++j) {
          const std::size_t k = static_cast<std::size_t>(i) * batch.m + j;
          const std::size_t n_slots = batch.samples[k].log_probs.size();
          for (std::size_t s = 0; s < n_slots; ++s) {
            sum[s] += s < g[k].size() ? g[k][s] : 0.0;
            cnt[s] += 1;
          }
        }
        for (int j = 0; j < batch.m; ++j) {
          const std::size_t k = static_cast<std::size_t>(i) * batch.m + j;
          auto& wk = weights_for(i, j);
          wk.assign(batch.samples[k].log_probs.size(), 0.0);
          for (std::size_t s = 0; s < wk.size(); ++s) {
            if (cnt[s] < 2) continue;  // no independent baseline available
            const double v = s < g[k].size() ? g[k][s] : 0.0;
            wk[s] = v - (sum[s] - v) / (cnt[s] - 1);
          }
        }
      }
      break;
    }
  }
  return w;
}

GradientEstimate estimate_gradient(const PolicyParams& p, const SimulatorModel& sim,
                                   const RolloutBatch& batch, EstimatorKind kind,
                                   const ValueFn& value, bool prorl_leave_one_out) {
  const auto w = estimator_step_weights(sim, batch, kind, value, prorl_leave_one_out);
  GradientEstimate est;
  est.kind = kind;
  est.sample_count = static_cast<int>(batch.samples.size());
  est.grad = Matrix(p.n_actions, p.feature_dim());
  const double scale = 1.0 / est.sample_count;
  for (int i = 0; i < batch.n(); ++i) {
    const auto& inp = batch.inputs[i];
    for (int j = 0; j < batch.m; ++j) {
      const std::size_t k = static_cast<std::size_t>(i) * batch.m + j;
      accumulate_path_gradient(p, sim, inp.history.items, inp.target, batch.samples[k],
                               w[k], scale, est.grad);
    }
  }
  return est;
}

GradientEstimate estimate_std(const PolicyParams& p, const SimulatorModel& sim,
                              const RolloutBatch& batch) {
  return estimate_gradient(p, sim, batch, EstimatorKind::Std);
}
GradientEstimate estimate_rtg(const PolicyParams& p, const SimulatorModel& sim,
                              const RolloutBatch& batch) {
  return estimate_gradient(p, sim, batch, EstimatorKind::Rtg);
}
GradientEstimate estimate_grpo(const PolicyParams& p, const SimulatorModel& sim,
                               const RolloutBatch& batch) {
  return estimate_gradient(p, sim, batch, EstimatorKind::Grpo);
}
GradientEstimate estimate_a2c(const PolicyParams& p, const SimulatorModel& sim,
                              const RolloutBatch& batch, const ValueFn& value) {
  return estimate_gradient(p, sim, batch, EstimatorKind::A2c, value);
}
GradientEstimate estimate_prorl(const PolicyParams& p, const SimulatorModel& sim,
                                const RolloutBatch& batch, bool leave_one_out) {
  return estimate_gradient(p, sim, batch, EstimatorKind::Prorl, {}, leave_one_out);
}

void add_kl_gradient(GradientEstimate& estimate, const PolicyParams& p,
                     const PolicyParams& prior, const SimulatorModel& sim,
                     const RolloutBatch& batch, double lambda) {
  const double scale = -lambda / static_cast<double>(batch.samples.size());
  for (int i = 0; i < batch.n(); ++i) {
    const auto& inp = batch.inputs[i];
    for (int j = 0; j < batch.m; ++j)
      accumulate_kl_gradient(p, prior, sim, inp.history.items, inp.target,
                             batch.sample(i, j), scale, estimate.grad);
  }
}

double advantage_variance(const SimulatorModel& sim, const RolloutBatch& batch,
                          EstimatorKind kind, const ValueFn& value,
                          bool prorl_leave_one_out) {
  const auto w = estimator_step_weights(sim, batch, kind, value, prorl_leave_one_out);
  double sum = 0.0, sum2 = 0.0;
  std::int64_t cnt = 0;
  for (std::size_t k = 0; k < w.size(); ++k) {
    const std::size_t items = batch.samples[k].items.size();
    for (std::size_t t = 0; t < items; ++t) {  // item positions only
      sum += w[k][t];
      sum2 += w[k][t] * w[k][t];
      ++cnt;
    }
  }
  if (cnt == 0)
    throw std::invalid_argument("advantage_variance: batch has no item positions");
  const double mean = sum / cnt;
  return sum2 / cnt - mean * mean;
}

CriticModel::CriticModel(int input_dim, int hidden, std::uint64_t seed)
    : w1_(hidden, input_dim), b1_(hidden, 0.0), w2_(hidden, 0.0), in_(input_dim), h_(hidden) {
  if (input_dim < 1 || hidden < 1)
    throw std::invalid_argument("CriticModel: dimensions must be positive");
  Rng rng = Rng::derive(seed, {0xC417u});
  const double s1 = std::sqrt(2.0 / input_dim);
  for (double& v : w1_.data) v = s1 * rng.normal();
  const double s2 = std::sqrt(2.0 / hidden);
  for (double& v : w2_) v = s2 * rng.normal();
}

double CriticModel::forward(std::span<const double> x, std::vector<double>* hidden_out) const {
  std::vector<double> h(h_);
  for (int i = 0; i < h_; ++i) {
    double z = b1_[i];
    for (int d = 0; d < in_; ++d) z += w1_(i, d) * x[d];
    h[i] = z > 0.0 ? z : 0.0;
  }
  double v = b2_;
  for (int i = 0; i < h_; ++i) v += w2_[i] * h[i];
  if (hidden_out) *hidden_out = std::move(h);
  return v;
}

double CriticModel::value(std::span<const double> phi, int t) const {
  if (static_cast<int>(phi.size()) + 1 != in_)
    throw std::invalid_argument("CriticModel::value: feature size mismatch");
  std::vector<double> x(phi.begin(), phi.end());
  x.push_back(static_cast<double>(t));
  return forward(x, nullptr);
}

ValueFn CriticModel::as_value_fn() const {
  return [this](std::span<const double> phi, int t) { return value(phi, t); };
}

double CriticModel::fit_batch(const SimulatorModel& sim, const RolloutBatch& batch,
                              double lr, double coeff) {
  batch.validate();
  const auto g = compute_reward_to_go(batch);

  Matrix dw1(h_, in_);
  std::vector<double> db1(h_, 0.0), dw2(h_, 0.0);
  double db2 = 0.0;
  double mse = 0.0;
  std::int64_t count = 0;
  for (std::size_t k = 0; k < batch.samples.size(); ++k) count += g[k].size();
  if (count == 0) return 0.0;

  std::vector<double> x, hid;
  for (int i = 0; i < batch.n(); ++i) {
    const auto& inp = batch.inputs[i];
    for (int j = 0; j < batch.m; ++j) {
      const std::size_t k = static_cast<std::size_t>(i) * batch.m + j;
      const auto& s = batch.samples[k];
      for (std::size_t t = 0; t < g[k].size(); ++t) {
        const std::span<const int> gen(s.items.data(), t);
        const auto phi = features(sim, inp.history.items, gen, inp.target);
        x.assign(phi.begin(), phi.end());
        x.push_back(static_cast<double>(t));
        const double v = forward(x, &hid);
        const double err = v - g[k][t];
        mse += err * err;
        // d(coeff * mean err^2)/dv
        const double dv = 2.0 * coeff * err / static_cast<double>(count);
        db2 += dv;
        for (int u = 0; u < h_; ++u) {
          dw2[u] += dv * hid[u];
          if (hid[u] > 0.0) {
            const double dz = dv * w2_[u];
            db1[u] += dz;
            for (int d = 0; d < in_; ++d) dw1(u, d) += dz * x[d];
          }
        }
      }
    }
  }
  for (int u = 0; u < h_; ++u) {
    w2_[u] -= lr * dw2[u];
    b1_[u] -= lr * db1[u];
    for (int d = 0; d < in_; ++d) w1_(u, d) -= lr * dw1(u, d);
  }
  b2_ -= lr * db2;
  return mse / static_cast<double>(count);
}

}  // namespace pathlab
