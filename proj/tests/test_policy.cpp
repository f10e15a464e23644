#include "doctest.h"

#include <cmath>
#include <stdexcept>
#include <vector>

#include "pathlab/catalog.hpp"
#include "pathlab/mining.hpp"
#include "pathlab/policy.hpp"
#include "pathlab/rng.hpp"

using namespace pathlab;

namespace {

struct World {
  Catalog cat;
  SimulatorModel sim;
  std::vector<int> history;
  int target;

  explicit World(std::uint64_t seed, int n_items = 4)
      : cat(generate_catalog(seed, n_items, 4, 2, 3, 0.7)),
        sim(cat, 0.8, 0.7),
        history{0},
        target(n_items - 1) {}
};

PolicyParams randomized(const World& w, std::uint64_t seed, double scale = 0.4) {
  PolicyParams p = make_policy(w.cat, 1.0);
  Rng r = Rng::derive(seed, {0x7E57ull});
  for (double& v : p.weights.data) v = scale * r.normal();
  return p;
}

}  // namespace

TEST_CASE("fresh policies are uniform over items plus stop") {
  World w(41);
  PolicyParams p = make_policy(w.cat, 1.0);
  CHECK(p.n_actions == w.cat.size() + 1);
  CHECK(p.stop_action() == w.cat.size());
  CHECK(p.weights.rows == p.n_actions);
  CHECK(p.weights.cols == feature_dim(w.cat));
  CHECK(p.feature_dim() == feature_dim(w.cat));
  CHECK(p.weights.max_abs() == 0.0);

  std::vector<int> none;
  auto dist = action_distribution(p, w.sim, w.history, none, w.target);
  REQUIRE(dist.size() == static_cast<std::size_t>(p.n_actions));
  for (double v : dist) CHECK(v == doctest::Approx(1.0 / p.n_actions));
}

TEST_CASE("the feature vector is context, target embedding, and a bias") {
  World w(42);
  std::vector<int> generated = {1, 2};
  auto phi = features(w.sim, w.history, generated, w.target);
  const int dim = w.cat.embedding_dim;
  REQUIRE(static_cast<int>(phi.size()) == 2 * dim + 1);
  CHECK(feature_dim(w.cat) == 2 * dim + 1);

  auto ctx = w.sim.context_vector(concat_seq(w.history, generated));
  for (int d = 0; d < dim; ++d) CHECK(phi[d] == doctest::Approx(ctx[d]));
  const auto& emb = w.cat.embedding_of(w.target);
  for (int d = 0; d < dim; ++d) CHECK(phi[dim + d] == doctest::Approx(emb[d]));
  CHECK(phi.back() == 1.0);
}

TEST_CASE("the feature map hash tracks the encoder geometry, not the items") {
  World a(43), b(44);
  // Same embedding size and decay -> same features, whatever the items or
  // the simulator's softmax temperature.
  CHECK(feature_map_hash(a.sim) == feature_map_hash(b.sim));
  CHECK(feature_map_hash(a.sim) == feature_map_hash(SimulatorModel(a.cat, 0.8, 2.0)));
  // A different context decay or embedding size changes the map.
  CHECK(feature_map_hash(a.sim) != feature_map_hash(SimulatorModel(a.cat, 0.5, 0.7)));
  Catalog wide = generate_catalog(43, 4, 4, 2, 5, 0.7);  // different embedding_dim
  SimulatorModel wide_sim(wide, 0.8, 0.7);
  CHECK(feature_map_hash(a.sim) != feature_map_hash(wide_sim));
}

TEST_CASE("action probabilities normalize and match their logs") {
  World w(45);
  PolicyParams p = randomized(w, 45);
  std::vector<int> generated = {2};
  auto dist = action_distribution(p, w.sim, w.history, generated, w.target);
  auto logs = action_log_distribution(p, w.sim, w.history, generated, w.target);
  double total = 0.0;
  for (std::size_t a = 0; a < dist.size(); ++a) {
    total += dist[a];
    CHECK(std::fabs(std::exp(logs[a]) - dist[a]) < 1e-12);
  }
  CHECK(total == doctest::Approx(1.0));
}

TEST_CASE("an extreme temperature flattens any policy") {
  World w(46);
  PolicyParams p = randomized(w, 46, 1.0);
  p.temperature = 1e4;
  std::vector<int> none;
  auto dist = action_distribution(p, w.sim, w.history, none, w.target);
  for (double v : dist) CHECK(std::fabs(v - 1.0 / p.n_actions) < 1e-3);
}

TEST_CASE("sampling is deterministic in the generator and replayable") {
  World w(47);
  PolicyParams p = randomized(w, 47);
  Rng r1 = Rng::derive(47, {1ull});
  Rng r2 = Rng::derive(47, {1ull});
  PathSample a = sample_path(p, w.sim, w.history, w.target, 3, r1);
  PathSample b = sample_path(p, w.sim, w.history, w.target, 3, r2);
  CHECK(a.items == b.items);
  CHECK(a.log_probs == b.log_probs);
  CHECK(a.truncated == b.truncated);

  // Each stored log-probability replays from the action distribution.
  std::vector<int> generated;
  for (std::size_t t = 0; t < a.log_probs.size(); ++t) {
    auto logs = action_log_distribution(p, w.sim, w.history, generated, w.target);
    int action = t < a.items.size() ? w.cat.index_of(a.items[t]) : p.stop_action();
    CHECK(a.log_probs[t] == doctest::Approx(logs[action]).epsilon(1e-12));
    if (t < a.items.size()) generated.push_back(a.items[t]);
  }
  if (!a.truncated) CHECK(a.log_probs.size() == a.items.size() + 1);
}

TEST_CASE("a stop-dominated policy emits the empty path") {
  World w(48);
  PolicyParams p = make_policy(w.cat, 1.0);
  p.weights(p.stop_action(), p.weights.cols - 1) = 50.0;  // bias column only
  Rng r = Rng::derive(48, {2ull});
  PathSample s = sample_path(p, w.sim, w.history, w.target, 3, r);
  CHECK(s.items.empty());
  CHECK_FALSE(s.truncated);
  REQUIRE(s.log_probs.size() == 1);
  CHECK(s.log_probs[0] == doctest::Approx(0.0).epsilon(1e-6));  // near-certain stop
}

TEST_CASE("a stop-starved policy truncates at the length cap") {
  World w(49);
  PolicyParams p = make_policy(w.cat, 1.0);
  p.weights(p.stop_action(), p.weights.cols - 1) = -50.0;  // bias column only
  Rng r = Rng::derive(49, {3ull});
  const int l_max = 4;
  PathSample s = sample_path(p, w.sim, w.history, w.target, l_max, r);
  CHECK(s.items.size() == static_cast<std::size_t>(l_max));
  CHECK(s.truncated);
  CHECK(s.log_probs.size() == static_cast<std::size_t>(l_max));  // no stop entry
}

TEST_CASE("greedy decoding is deterministic and breaks ties downward") {
  World w(50);
  // All-zero weights tie every action; the lowest action index is item 0,
  // so greedy generates it until truncation.
  PolicyParams p = make_policy(w.cat, 1.0);
  PathSample g = greedy_path(p, w.sim, w.history, w.target, 3);
  REQUIRE(g.items.size() == 3);
  for (int id : g.items) CHECK(id == w.cat.items[0].id);
  CHECK(g.truncated);

  PolicyParams q = randomized(w, 50);
  PathSample g1 = greedy_path(q, w.sim, w.history, w.target, 3);
  PathSample g2 = greedy_path(q, w.sim, w.history, w.target, 3);
  CHECK(g1.items == g2.items);
}

TEST_CASE("score gradients match finite differences") {
  World w(51, 3);
  PolicyParams p = randomized(w, 51);
  Rng r = Rng::derive(51, {4ull});
  PathSample s = sample_path(p, w.sim, w.history, w.target, 2, r);
  auto grads = grad_log_prob(p, w.sim, w.history, w.target, s);
  REQUIRE(grads.size() == s.log_probs.size());

  auto log_prob_at = [&](const PolicyParams& q, std::size_t t) {
    std::vector<int> generated(s.items.begin(),
                               s.items.begin() + std::min(t, s.items.size()));
    auto logs = action_log_distribution(q, w.sim, w.history, generated, w.target);
    int action = t < s.items.size() ? w.cat.index_of(s.items[t]) : q.stop_action();
    return logs[action];
  };
  const double h = 1e-6;
  for (std::size_t t = 0; t < grads.size(); ++t) {
    for (std::size_t c = 0; c < p.weights.data.size(); ++c) {
      PolicyParams plus = p, minus = p;
      plus.weights.data[c] += h;
      minus.weights.data[c] -= h;
      double fd = (log_prob_at(plus, t) - log_prob_at(minus, t)) / (2.0 * h);
      CHECK(std::fabs(grads[t].data[c] - fd) < 1e-8);
    }
  }
}

TEST_CASE("path-gradient accumulation weights the per-step scores") {
  World w(52, 3);
  PolicyParams p = randomized(w, 52);
  Rng r = Rng::derive(52, {5ull});
  PathSample s = sample_path(p, w.sim, w.history, w.target, 3, r);
  auto grads = grad_log_prob(p, w.sim, w.history, w.target, s);

  std::vector<double> weights(s.log_probs.size());
  for (std::size_t t = 0; t < weights.size(); ++t) weights[t] = 0.5 * (t + 1);
  Matrix out(p.weights.rows, p.weights.cols);
  accumulate_path_gradient(p, w.sim, w.history, w.target, s, weights, 2.0, out);

  Matrix expect(p.weights.rows, p.weights.cols);
  for (std::size_t t = 0; t < weights.size(); ++t)
    expect.add_scaled(grads[t], 2.0 * weights[t]);
  expect.add_scaled(out, -1.0);
  CHECK(expect.max_abs() < 1e-12);

  std::vector<double> bad(s.log_probs.size() + 1, 1.0);
  CHECK_THROWS_AS(
      accumulate_path_gradient(p, w.sim, w.history, w.target, s, bad, 1.0, out),
      std::invalid_argument);
}

TEST_CASE("supervised pretraining learns the demonstrated actions") {
  World w(53, 4);
  // Every demonstration walks 0 -> 1 and stops, with goal 1.
  std::vector<Demonstration> demos(8, Demonstration{{0, 1}, 1});
  PolicyParams p = pretrain_supervised(w.sim, demos, 4, 300, 0.5, 1.0);

  std::vector<int> none, first = {0};
  std::vector<int> empty_hist;
  auto d0 = action_distribution(p, w.sim, empty_hist, none, 1);
  CHECK(d0[w.cat.index_of(0)] > 0.9);
  auto d1 = action_distribution(p, w.sim, empty_hist, first, 1);
  CHECK(d1[w.cat.index_of(1)] > 0.9);

  // More epochs cannot hurt the training objective (it is concave).
  PolicyParams early = pretrain_supervised(w.sim, demos, 4, 5, 0.5, 1.0);
  CHECK(demo_log_likelihood(p, w.sim, demos, 4) >=
        demo_log_likelihood(early, w.sim, demos, 4));
}

TEST_CASE("the demonstration likelihood follows the capped-action convention") {
  World w(54, 4);
  PolicyParams uniform = make_policy(w.cat, 1.0);
  const double lp = std::log(1.0 / uniform.n_actions);

  // Short demonstration: its items and then an explicit stop action.
  std::vector<Demonstration> stop_demo = {{{0, 1}, 1}};
  CHECK(demo_log_likelihood(uniform, w.sim, stop_demo, 4) == doctest::Approx(lp));

  // At or beyond the cap the stop action is dropped, mirroring truncation.
  std::vector<Demonstration> long_demo = {{{0, 1, 2}, 2}};
  CHECK(demo_log_likelihood(uniform, w.sim, long_demo, 2) == doctest::Approx(lp));
}

TEST_CASE("path divergence vanishes at the prior and grows off it") {
  World w(55, 3);
  PolicyParams prior = randomized(w, 55);
  Rng r = Rng::derive(55, {6ull});
  PathSample s = sample_path(prior, w.sim, w.history, w.target, 3, r);
  CHECK(kl_per_path(prior, prior, w.sim, w.history, w.target, s) == doctest::Approx(0.0));

  PolicyParams moved = prior;
  moved.weights.data[3] += 0.5;
  CHECK(kl_per_path(moved, prior, w.sim, w.history, w.target, s) > 0.0);
}

TEST_CASE("the stop decision's state counts toward the path divergence") {
  World w(56, 3);
  PolicyParams p = randomized(w, 56);
  PolicyParams prior = randomized(w, 57);

  PathSample stopped;
  stopped.items = {0, 1};
  stopped.log_probs.assign(3, 0.0);
  stopped.truncated = false;
  PathSample truncated;
  truncated.items = {0, 1};
  truncated.log_probs.assign(2, 0.0);
  truncated.truncated = true;

  double kl_stop = kl_per_path(p, prior, w.sim, w.history, w.target, stopped);
  double kl_trunc = kl_per_path(p, prior, w.sim, w.history, w.target, truncated);
  CHECK(kl_stop > kl_trunc);  // one more realized state, each KL term >= 0
  CHECK(kl_trunc > 0.0);
}

TEST_CASE("the divergence gradient matches finite differences") {
  World w(58, 3);
  PolicyParams p = randomized(w, 58);
  PolicyParams prior = randomized(w, 59);
  Rng r = Rng::derive(58, {7ull});
  PathSample s = sample_path(p, w.sim, w.history, w.target, 2, r);

  Matrix g(p.weights.rows, p.weights.cols);
  accumulate_kl_gradient(p, prior, w.sim, w.history, w.target, s, 1.0, g);
  const double h = 1e-5;
  for (std::size_t c = 0; c < p.weights.data.size(); ++c) {
    PolicyParams plus = p, minus = p;
    plus.weights.data[c] += h;
    minus.weights.data[c] -= h;
    double fd = (kl_per_path(plus, prior, w.sim, w.history, w.target, s) -
                 kl_per_path(minus, prior, w.sim, w.history, w.target, s)) /
                (2.0 * h);
    CHECK(std::fabs(g.data[c] - fd) < 1e-7);
  }
}

TEST_CASE("the stop-or-continue model squashes its logit") {
  StopOnlyModel m;
  m.theta = 0.0;
  CHECK(m.stop_prob() == doctest::Approx(0.5));
  m.theta = 2.0;
  CHECK(m.stop_prob() == doctest::Approx(1.0 / (1.0 + std::exp(-2.0))));
  m.theta = -30.0;
  CHECK(m.stop_prob() < 1e-12);
}
