#include "pathlab/oracle.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace pathlab {

std::uint64_t enumeration_size(int n_items, int l_max) {
  // stopped paths of length 0..l_max-1, plus truncated paths of length l_max
  std::uint64_t total = 0;
  std::uint64_t pow = 1;
  for (int l = 0; l < l_max; ++l) {
    total += pow;
    pow *= static_cast<std::uint64_t>(n_items);
  }
  return total + pow;
}

namespace {

struct Enumerator {
  const PolicyParams& p;
  const SimulatorModel& sim;
  std::span<const int> history;
  int target;
  int l_max;
  std::vector<EnumeratedPath>& out;

  std::vector<int> items;
  double log_prob = 0.0;
  Matrix score;

  void emit(bool truncated, double stop_lp, const Matrix& stop_grad) {
    EnumeratedPath ep;
    ep.items = items;
    ep.truncated = truncated;
    ep.log_prob = truncated ? log_prob : log_prob + stop_lp;
    ep.probability = std::exp(ep.log_prob);
    ep.score = score;
    if (!truncated) ep.score.add_scaled(stop_grad, 1.0);
    out.push_back(std::move(ep));
  }

  void walk(int depth) {
    if (depth == l_max) {  // terminal by truncation, no stop decision exists
      emit_truncated();
      return;
    }
    const Catalog& cat = *sim.catalog;
    const auto phi = features(sim, history, items, target);
    std::vector<double> z(p.n_actions, 0.0);
    for (int a = 0; a < p.n_actions; ++a) {
      double dot = 0.0;
      for (int d = 0; d < p.feature_dim(); ++d) dot += p.weights(a, d) * phi[d];
      z[a] = dot / p.temperature;
    }
    double zmax = z[0];
    for (double v : z) zmax = std::max(zmax, v);
    double sum = 0.0;
    for (double v : z) sum += std::exp(v - zmax);
    const double lse = zmax + std::log(sum);
    for (double& v : z) v -= lse;  // z is now log pi

    std::vector<double> pi(p.n_actions);
    for (int a = 0; a < p.n_actions; ++a) pi[a] = std::exp(z[a]);

    auto action_grad = [&](int a) {
      Matrix g(p.n_actions, p.feature_dim());
      for (int b = 0; b < p.n_actions; ++b) {
        const double c = ((b == a ? 1.0 : 0.0) - pi[b]) / p.temperature;
        for (int d = 0; d < p.feature_dim(); ++d) g(b, d) = c * phi[d];
      }
      return g;
    };

    // stop here
    emit(false, z[p.stop_action()], action_grad(p.stop_action()));

    for (int a = 0; a + 1 < p.n_actions; ++a) {
      const Matrix g = action_grad(a);
      items.push_back(cat.items[a].id);
      log_prob += z[a];
      score.add_scaled(g, 1.0);
      walk(depth + 1);
      score.add_scaled(g, -1.0);
      log_prob -= z[a];
      items.pop_back();
    }
  }

  void emit_truncated() {
    EnumeratedPath ep;
    ep.items = items;
    ep.truncated = true;
    ep.log_prob = log_prob;
    ep.probability = std::exp(log_prob);
    ep.score = score;
    out.push_back(std::move(ep));
  }
};

}  // namespace

std::vector<EnumeratedPath> enumerate_paths(const PolicyParams& p, const SimulatorModel& sim,
                                            std::span<const int> history, int target,
                                            int l_max, std::uint64_t max_paths) {
  if (l_max < 1) throw std::invalid_argument("enumerate_paths: l_max must be >= 1");
  const std::uint64_t n = enumeration_size(sim.catalog->size(), l_max);
  if (n > max_paths)
    throw std::length_error("enumerate_paths: " + std::to_string(n) +
                            " terminal histories exceeds budget " + std::to_string(max_paths));
  std::vector<EnumeratedPath> out;
  out.reserve(n);
  Enumerator e{p, sim, history, target, l_max, out,
               {}, 0.0, Matrix(p.n_actions, p.feature_dim())};
  e.walk(0);
  return out;
}

double exact_expected_reward(const std::vector<EnumeratedPath>& paths, const PathRewardFn& fn) {
  double s = 0.0;
  for (const auto& ep : paths) s += ep.probability * fn(ep);
  return s;
}

double reach_probability(const std::vector<EnumeratedPath>& paths, int t) {
  double s = 0.0;
  for (const auto& ep : paths)
    if (static_cast<int>(ep.items.size()) >= t) s += ep.probability;
  return s;
}

double exact_expected_step_reward(const std::vector<EnumeratedPath>& paths,
                                  const std::function<double(const EnumeratedPath&, int)>& step_fn,
                                  int t) {
  if (t < 1) throw std::invalid_argument("exact_expected_step_reward: t is 1-based");
  double num = 0.0;
  double den = 0.0;
  for (const auto& ep : paths) {
    if (static_cast<int>(ep.items.size()) >= t) {
      num += ep.probability * step_fn(ep, t);
      den += ep.probability;
    }
  }
  if (den == 0.0)
    throw std::domain_error("exact_expected_step_reward: position " + std::to_string(t) +
                            " is never reached");
  return num / den;
}

Matrix exact_gradient(const std::vector<EnumeratedPath>& paths, const PathRewardFn& fn) {
  if (paths.empty()) throw std::invalid_argument("exact_gradient: no paths");
  Matrix g(paths.front().score.rows, paths.front().score.cols);
  for (const auto& ep : paths) g.add_scaled(ep.score, ep.probability * fn(ep));
  return g;
}

}  // namespace pathlab
