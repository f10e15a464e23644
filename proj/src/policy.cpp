#include "pathlab/policy.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <string>

namespace pathlab {

int feature_dim(const Catalog& cat) { return 2 * cat.embedding_dim + 1; }

std::vector<double> features(const SimulatorModel& sim, std::span<const int> history,
                             std::span<const int> generated, int target) {
  const Catalog& cat = *sim.catalog;
  std::vector<double> phi;
  phi.reserve(feature_dim(cat));
  const auto seq = concat_seq(history, generated);
  const auto ctx = sim.context_vector(seq);
  phi.insert(phi.end(), ctx.begin(), ctx.end());
  const auto& te = cat.embedding_of(target);
  phi.insert(phi.end(), te.begin(), te.end());
  phi.push_back(1.0);
  return phi;
}

std::uint64_t feature_map_hash(const SimulatorModel& sim) {
  char buf[128];
  std::snprintf(buf, sizeof buf, "ctx+temb+bias|d=%d|decay=%.17g",
                sim.catalog->embedding_dim, sim.decay);
  std::uint64_t h = 1469598103934665603ULL;  // FNV-1a
  for (const char* p = buf; *p; ++p) {
    h ^= static_cast<unsigned char>(*p);
    h *= 1099511628211ULL;
  }
  return h;
}

PolicyParams make_policy(const Catalog& cat, double temperature) {
  if (!(temperature > 0.0)) throw std::invalid_argument("make_policy: temperature must be positive");
  PolicyParams p;
  p.n_actions = cat.size() + 1;
  p.temperature = temperature;
  p.weights = Matrix(p.n_actions, feature_dim(cat));
  return p;
}

namespace {

std::vector<double> log_dist_from_phi(const PolicyParams& p, const std::vector<double>& phi) {
  std::vector<double> z(p.n_actions, 0.0);
  for (int a = 0; a < p.n_actions; ++a) {
    double dot = 0.0;
    for (int d = 0; d < p.feature_dim(); ++d) dot += p.weights(a, d) * phi[d];
    z[a] = dot / p.temperature;
  }
  const double zmax = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (double v : z) sum += std::exp(v - zmax);
  const double lse = zmax + std::log(sum);
  for (double& v : z) v -= lse;
  return z;
}

std::vector<double> dist_from_phi(const PolicyParams& p, const std::vector<double>& phi) {
  auto lp = log_dist_from_phi(p, phi);
  for (double& v : lp) v = std::exp(v);
  return lp;
}

int action_index_of_item(const Catalog& cat, int item_id) { return cat.index_of(item_id); }

// out += coef * c * phi^T  with c given per action
void rank1_update(Matrix& out, std::span<const double> c, std::span<const double> phi,
                  double coef) {
  for (int a = 0; a < out.rows; ++a) {
    const double ca = coef * c[a];
    if (ca == 0.0) continue;
    for (int d = 0; d < out.cols; ++d) out(a, d) += ca * phi[d];
  }
}

}  // namespace

std::vector<double> action_distribution(const PolicyParams& p, const SimulatorModel& sim,
                                        std::span<const int> history,
                                        std::span<const int> generated, int target) {
  return dist_from_phi(p, features(sim, history, generated, target));
}

std::vector<double> action_log_distribution(const PolicyParams& p, const SimulatorModel& sim,
                                            std::span<const int> history,
                                            std::span<const int> generated, int target) {
  return log_dist_from_phi(p, features(sim, history, generated, target));
}

PathSample sample_path(const PolicyParams& p, const SimulatorModel& sim,
                       std::span<const int> history, int target, int l_max, Rng& rng) {
  if (l_max < 1) throw std::invalid_argument("sample_path: l_max must be >= 1");
  const Catalog& cat = *sim.catalog;
  if (p.n_actions != cat.size() + 1)
    throw std::invalid_argument("sample_path: policy/catalog size mismatch");
  PathSample s;
  for (int t = 0; t < l_max; ++t) {
    const auto lp = log_dist_from_phi(p, features(sim, history, s.items, target));
    const double u = rng.uniform();
    double acc = 0.0;
    int a = p.n_actions - 1;  // fall through to the last action on rounding
    for (int b = 0; b < p.n_actions; ++b) {
      acc += std::exp(lp[b]);
      if (u < acc) {
        a = b;
        break;
      }
    }
    s.log_probs.push_back(lp[a]);
    if (a == p.stop_action()) return s;
    s.items.push_back(cat.items[a].id);
  }
  s.truncated = true;  // hit l_max: no stop action taken
  return s;
}

PathSample greedy_path(const PolicyParams& p, const SimulatorModel& sim,
                       std::span<const int> history, int target, int l_max) {
  if (l_max < 1) throw std::invalid_argument("greedy_path: l_max must be >= 1");
  const Catalog& cat = *sim.catalog;
  PathSample s;
  for (int t = 0; t < l_max; ++t) {
    const auto lp = log_dist_from_phi(p, features(sim, history, s.items, target));
    int a = 0;
    for (int b = 1; b < p.n_actions; ++b)
      if (lp[b] > lp[a]) a = b;
    s.log_probs.push_back(lp[a]);
    if (a == p.stop_action()) return s;
    s.items.push_back(cat.items[a].id);
  }
  s.truncated = true;
  return s;
}

std::vector<Matrix> grad_log_prob(const PolicyParams& p, const SimulatorModel& sim,
                                  std::span<const int> history, int target,
                    const PathSample& sample) {
  std::vector<Matrix> grads;
  grads.reserve(sample.log_probs.size());
  const Catalog& cat = *sim.catalog;
  for (std::size_t t = 0; t < sample.log_probs.size(); ++t) {
    const std::span<const int> gen(sample.items.data(), std::min(t, sample.items.size()));
    const auto phi = features(sim, history, gen, target);
    auto pi = dist_from_phi(p, phi);
    const int a = t < sample.items.size() ? action_index_of_item(cat, sample.items[t])
                                          : p.stop_action();
    Matrix g(p.n_actions, p.feature_dim());
    std::vector<double> c(pi.size());
    for (int b = 0; b < p.n_actions; ++b) c[b] = ((b == a ? 1.0 : 0.0) - pi[b]) / p.temperature;
    rank1_update(g, c, phi, 1.0);
    grads.push_back(std::move(g));
  }
  return grads;
}

void accumulate_path_gradient(const PolicyParams& p, const SimulatorModel& sim,
                              std::span<const int> history, int target,
                              const PathSample& sample, std::span<const double> weights,
                              double scale, Matrix& out) {
  if (weights.size() != sample.log_probs.size())
    throw std::invalid_argument("accumulate_path_gradient: weight count mismatch");
  const Catalog& cat = *sim.catalog;
  std::vector<double> c(p.n_actions);
  for (std::size_t t = 0; t < sample.log_probs.size(); ++t) {
    if (weights[t] == 0.0) continue;
    const std::span<const int> gen(sample.items.data(), std::min(t, sample.items.size()));
    const auto phi = features(sim, history, gen, target);
    const auto pi = dist_from_phi(p, phi);
    const int a = t < sample.items.size() ? action_index_of_item(cat, sample.items[t])
                                          : p.stop_action();
    for (int b = 0; b < p.n_actions; ++b)
      c[b] = ((b == a ? 1.0 : 0.0) - pi[b]) / p.temperature;
    rank1_update(out, c, phi, scale * weights[t]);
  }
}

namespace {

struct DemoActions {
  std::vector<int> actions;  // catalog indices, then possibly the stop action
};

DemoActions demo_actions(const Catalog& cat, const PolicyParams& p, const Demonstration& d,
                         int l_max) {
  DemoActions da;
  const int keep = std::min<int>(static_cast<int>(d.path.size()), l_max);
  for (int t = 0; t < keep; ++t) da.actions.push_back(cat.index_of(d.path[t]));
  if (static_cast<int>(d.path.size()) < l_max) da.actions.push_back(p.stop_action());
  return da;
}

}  // namespace

PolicyParams pretrain_supervised(const SimulatorModel& sim,
                                 const std::vector<Demonstration>& demos, int l_max,
                                 int epochs, double lr, double temperature) {
  if (demos.empty()) throw std::invalid_argument("pretrain_supervised: no demonstrations");
  if (l_max < 1) throw std::invalid_argument("pretrain_supervised: l_max must be >= 1");
  if (epochs < 0) throw std::invalid_argument("pretrain_supervised: negative epochs");
  const Catalog& cat = *sim.catalog;
  PolicyParams p = make_policy(cat, temperature);

  // total action count for per-action averaging
  std::int64_t total = 0;
  for (const auto& d : demos) total += demo_actions(cat, p, d, l_max).actions.size();
  if (total == 0) throw std::invalid_argument("pretrain_supervised: demonstrations are empty");

  std::vector<double> c(p.n_actions);
  for (int e = 0; e < epochs; ++e) {
    Matrix g(p.n_actions, p.feature_dim());
    for (const auto& d : demos) {
      const auto da = demo_actions(cat, p, d, l_max);
      std::vector<int> gen;
      for (int a : da.actions) {
        const auto phi = features(sim, {}, gen, d.goal);
        const auto pi = dist_from_phi(p, phi);
        for (int b = 0; b < p.n_actions; ++b)
          c[b] = ((b == a ? 1.0 : 0.0) - pi[b]) / p.temperature;
        rank1_update(g, c, phi, 1.0);
        if (a != p.stop_action()) gen.push_back(cat.items[a].id);
      }
    }
    p.weights.add_scaled(g, lr / static_cast<double>(total));
  }
  return p;
}

double demo_log_likelihood(const PolicyParams& p, const SimulatorModel& sim,
                           const std::vector<Demonstration>& demos, int l_max) {
  const Catalog& cat = *sim.catalog;
  double ll = 0.0;
  std::int64_t total = 0;
  for (const auto& d : demos) {
    const auto da = demo_actions(cat, p, d, l_max);
    std::vector<int> gen;
    for (int a : da.actions) {
      const auto lp = log_dist_from_phi(p, features(sim, {}, gen, d.goal));
      ll += lp[a];
      ++total;
      if (a != p.stop_action()) gen.push_back(cat.items[a].id);
    }
  }
  if (total == 0) throw std::invalid_argument("demo_log_likelihood: no actions");
  return ll / static_cast<double>(total);
}

double kl_per_path(const PolicyParams& p, const PolicyParams& prior,
                   const SimulatorModel& sim, std::span<const int> history, int target,
                   const PathSample& sample) {
  double total = 0.0;
  for (std::size_t t = 0; t < sample.log_probs.size(); ++t) {
    const std::span<const int> gen(sample.items.data(), std::min(t, sample.items.size()));
    const auto phi = features(sim, history, gen, target);
    const auto lp = log_dist_from_phi(p, phi);
    const auto lq = log_dist_from_phi(prior, phi);
    double kl = 0.0;
    for (int a = 0; a < p.n_actions; ++a) kl += std::exp(lp[a]) * (lp[a] - lq[a]);
    total += kl;
  }
  return total;
}

void accumulate_kl_gradient(const PolicyParams& p, const PolicyParams& prior,
                            const SimulatorModel& sim, std::span<const int> history,
                            int target, const PathSample& sample, double scale, Matrix& out) {
  std::vector<double> c(p.n_actions);
  for (std::size_t t = 0; t < sample.log_probs.size(); ++t) {
    const std::span<const int> gen(sample.items.data(), std::min(t, sample.items.size()));
    const auto phi = features(sim, history, gen, target);
    const auto lp = log_dist_from_phi(p, phi);
    const auto lq = log_dist_from_phi(prior, phi);
    double kl = 0.0;
    for (int a = 0; a < p.n_actions; ++a) kl += std::exp(lp[a]) * (lp[a] - lq[a]);
    // d KL / d z_a = pi_a * (log pi_a - log q_a - KL); z = W phi / T
    for (int a = 0; a < p.n_actions; ++a)
      c[a] = std::exp(lp[a]) * (lp[a] - lq[a] - kl) / p.temperature;
    rank1_update(out, c, phi, scale);
  }
}

double StopOnlyModel::stop_prob() const { return 1.0 / (1.0 + std::exp(-theta)); }

}  // namespace pathlab
