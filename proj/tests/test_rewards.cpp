#include "doctest.h"

#include <cmath>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "pathlab/catalog.hpp"
#include "pathlab/rewards.hpp"
#include "pathlab/rng.hpp"

using namespace pathlab;

namespace {

// Three items with orthogonal unit embeddings; 0 and 1 share an attribute,
// 1 and 2 share another, 0 and 2 share none.  Every score is a closed form.
Catalog hand_catalog() {
  Catalog cat;
  cat.items = {Item{0, {0}}, Item{1, {0, 1}}, Item{2, {1}}};
  cat.embeddings = {{1.0, 0.0, 0.0}, {0.0, 1.0, 0.0}, {0.0, 0.0, 1.0}};
  cat.embedding_dim = 3;
  cat.rebuild_index();
  return cat;
}

}  // namespace

TEST_CASE("guidance gain is the log-probability lift of the target") {
  Catalog cat = hand_catalog();
  SimulatorModel sim(cat, 0.5, 1.0);
  std::vector<int> history = {0};

  // Walking onto the target itself must raise its acceptance probability.
  std::vector<int> path = {2};
  CHECK(ioi(sim, history, path, 2) > 0.0);
  double expected = sim.log_prob(2, std::vector<int>{0, 2}) - sim.log_prob(2, history);
  CHECK(ioi(sim, history, path, 2) == doctest::Approx(expected));

  // An empty path changes nothing.
  std::vector<int> empty;
  CHECK(ioi(sim, history, empty, 2) == 0.0);
}

TEST_CASE("rank gain counts positions climbed by the target") {
  Catalog cat = hand_catalog();
  SimulatorModel sim(cat, 0.5, 1.0);
  std::vector<int> history = {0};
  // Before: scores (1, 0, 0), zero-score tie broken by id -> target 2 ranks 3.
  CHECK(sim.rank(2, history) == 3);
  std::vector<int> path = {2};
  // After seeing item 2 last, its score dominates -> rank 1; gain = 3 - 1.
  CHECK(ior(sim, history, path, 2) == doctest::Approx(2.0));
  std::vector<int> empty;
  CHECK(ior(sim, history, empty, 2) == 0.0);
}

TEST_CASE("acceptance rate averages the stepwise acceptance probabilities") {
  Catalog cat = hand_catalog();
  SimulatorModel sim(cat, 0.5, 1.0);
  std::vector<int> history = {0};

  std::vector<int> one = {2};
  MetricValue c1 = ctr(sim, history, one);
  REQUIRE(c1.defined);
  const double e = std::exp(1.0);
  CHECK(c1.value == doctest::Approx(1.0 / (e + 2.0)));  // softmax(1,0,0)[2]

  std::vector<int> two = {2, 1};
  MetricValue c2 = ctr(sim, history, two);
  REQUIRE(c2.defined);
  double expected = 0.5 * (sim.prob(2, history) + sim.prob(1, std::vector<int>{0, 2}));
  CHECK(c2.value == doctest::Approx(expected));

  std::vector<int> empty;
  CHECK_FALSE(ctr(sim, history, empty).defined);
}

TEST_CASE("coherence is the share of attribute-linked consecutive pairs") {
  Catalog cat = hand_catalog();
  std::vector<int> linked = {0, 1, 2};  // (0,1) share attr 0, (1,2) share attr 1
  MetricValue m = coherence(cat, linked);
  REQUIRE(m.defined);
  CHECK(m.value == doctest::Approx(1.0));

  std::vector<int> broken = {0, 2};  // no shared attribute
  CHECK(coherence(cat, broken).value == doctest::Approx(0.0));

  std::vector<int> mixed = {0, 1, 2, 0};  // last pair (2,0) is broken
  CHECK(coherence(cat, mixed).value == doctest::Approx(2.0 / 3.0));

  std::vector<int> single = {1};
  MetricValue s = coherence(cat, single);
  CHECK_FALSE(s.defined);  // vacuous
  CHECK(s.value == doctest::Approx(1.0));
}

TEST_CASE("the scalar path reward weights its three components") {
  Catalog cat = hand_catalog();
  SimulatorModel sim(cat, 0.5, 1.0);
  std::vector<int> history = {0};
  std::vector<int> path = {2, 1};
  RewardWeights w;
  w.alpha = 0.4;
  w.beta = 0.25;
  w.gamma = 2.0;
  double expected = w.alpha * ioi(sim, history, path, 2) +
                    w.beta * ior(sim, history, path, 2) +
                    w.gamma * ctr(sim, history, path).value;
  CHECK(path_reward(sim, history, path, 2, w) == doctest::Approx(expected));
  CHECK(w.raw_weight(kIoi) == 0.4);
  CHECK(w.raw_weight(kIor) == 0.25);
  CHECK(w.raw_weight(kCtr) == 2.0);

  // With no steps every component is zero or undefined: reward 0.
  std::vector<int> empty;
  CHECK(path_reward(sim, history, empty, 2, w) == 0.0);
}

TEST_CASE("step decomposition telescopes back to the path-level metrics") {
  Catalog cat = generate_catalog(31, 10, 4, 2, 3, 0.7);
  SimulatorModel sim(cat, 0.8, 0.7);
  Rng rng(77);
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<int> history = {static_cast<int>(rng.uniform_int(10))};
    int target = static_cast<int>(rng.uniform_int(10));
    std::vector<int> path;
    int len = 1 + static_cast<int>(rng.uniform_int(4));
    for (int t = 0; t < len; ++t) path.push_back(static_cast<int>(rng.uniform_int(10)));

    StepRewards sr = decompose(sim, history, path, target);
    REQUIRE(sr.length == len);
    for (int c = 0; c < kNumComponents; ++c)
      REQUIRE(sr.comp[c].size() == static_cast<std::size_t>(len));

    CHECK(sr.totals[kIoi] == doctest::Approx(ioi(sim, history, path, target)).epsilon(1e-12));
    CHECK(sr.totals[kIor] == doctest::Approx(ior(sim, history, path, target)).epsilon(1e-12));
    CHECK(sr.totals[kCtr] == doctest::Approx(ctr(sim, history, path).value).epsilon(1e-12));
    for (int c = 0; c < kNumComponents; ++c) {
      double s = 0.0;
      for (double v : sr.comp[c]) s += v;
      CHECK(std::fabs(s - sr.totals[c]) < 1e-12);
    }

    // Each increment is the metric lift of extending the prefix by one item.
    for (int t = 0; t < len; ++t) {
      std::vector<int> cur(path.begin(), path.begin() + t + 1);
      std::vector<int> prev(path.begin(), path.begin() + t);
      double cur_ioi = ioi(sim, history, cur, target);
      double prev_ioi = ioi(sim, history, prev, target);
      CHECK(sr.comp[kIoi][t] == doctest::Approx(cur_ioi - prev_ioi).epsilon(1e-10));
    }
  }
}

TEST_CASE("streaming statistics match the textbook population formulas") {
  // One position is counted once all components have reported it.
  RewardStats stats;
  for (double v : {1.0, 2.0, 3.0}) {
    stats.accumulate_value(kIoi, v);
    stats.accumulate_value(kIor, 10.0);
    stats.accumulate_value(kCtr, 2.0 * v);
  }
  stats.freeze();
  CHECK(stats.count() == 3);
  CHECK(stats.mean(kIoi) == doctest::Approx(2.0));
  CHECK(stats.variance(kIoi) == doctest::Approx(2.0 / 3.0));
  CHECK(stats.stddev(kIoi) == doctest::Approx(std::sqrt(2.0 / 3.0)));
  CHECK(stats.mean(kIor) == doctest::Approx(10.0));
  CHECK(stats.variance(kIor) == doctest::Approx(0.0));
  CHECK(stats.mean(kCtr) == doctest::Approx(4.0));
  CHECK(stats.variance(kCtr) == doctest::Approx(8.0 / 3.0));
}

TEST_CASE("streaming statistics agree with a two-pass reference") {
  Rng rng(123);
  std::vector<double> xs;
  RewardStats stats;
  for (int i = 0; i < 500; ++i) {
    double v = 3.0 * rng.normal() - 1.0;
    xs.push_back(v);
    stats.accumulate_value(kCtr, v);
  }
  stats.freeze();
  double mean = 0.0;
  for (double v : xs) mean += v;
  mean /= xs.size();
  double var = 0.0;
  for (double v : xs) var += (v - mean) * (v - mean);
  var /= xs.size();
  CHECK(stats.mean(kCtr) == doctest::Approx(mean).epsilon(1e-12));
  CHECK(stats.variance(kCtr) == doctest::Approx(var).epsilon(1e-10));
}

TEST_CASE("frozen statistics refuse further accumulation") {
  RewardStats stats;
  stats.accumulate_value(kIoi, 1.0);
  stats.freeze();
  CHECK(stats.frozen());
  CHECK_THROWS_AS(stats.accumulate_value(kIoi, 2.0), std::logic_error);
  StepRewards sr;
  sr.length = 1;
  for (auto& v : sr.comp) v.assign(1, 0.5);
  CHECK_THROWS_AS(stats.accumulate(sr), std::logic_error);
}

TEST_CASE("statistics serialization round-trips") {
  RewardStats stats;
  Rng rng(9);
  for (int i = 0; i < 64; ++i)
    for (int c = 0; c < kNumComponents; ++c) stats.accumulate_value(c, rng.normal());
  stats.freeze();
  std::ostringstream os;
  stats.save(os);
  std::istringstream is(os.str());
  RewardStats back = RewardStats::load(is);
  CHECK(back.frozen());
  CHECK(back.count() == stats.count());
  for (int c = 0; c < kNumComponents; ++c) {
    CHECK(back.mean(c) == stats.mean(c));
    CHECK(back.variance(c) == doctest::Approx(stats.variance(c)).epsilon(1e-15));
  }
}

TEST_CASE("centering modes implement their four distinct transforms") {
  Catalog cat = hand_catalog();
  SimulatorModel sim(cat, 0.5, 1.0);
  std::vector<int> history = {0};
  std::vector<int> path = {2, 1};
  int target = 2;
  StepRewards sr = decompose(sim, history, path, target);

  RewardWeights w;
  w.alpha = 0.5;
  w.beta = 0.25;
  w.gamma = 1.5;
  w.component_weights = {1.0, 0.5, 2.0};

  RewardStats stats;
  Rng rng(55);
  for (int i = 0; i < 200; ++i)
    for (int c = 0; c < kNumComponents; ++c)
      stats.accumulate_value(c, rng.normal() + 0.2 * c);
  stats.freeze();

  auto raw = apply_centering(sr, CenteringMode::raw(), w);
  REQUIRE(raw.size() == 2);
  for (int t = 0; t < 2; ++t) {
    double expect = w.alpha * sr.comp[kIoi][t] + w.beta * sr.comp[kIor][t] +
                    w.gamma * sr.comp[kCtr][t];
    CHECK(raw[t] == doctest::Approx(expect));
  }

  const double rbar = 0.37;
  auto centered = apply_centering(sr, CenteringMode::center(rbar), w);
  for (int t = 0; t < 2; ++t) CHECK(centered[t] == doctest::Approx(raw[t] - rbar));

  auto norm = apply_centering(sr, CenteringMode::normalize(stats), w);
  for (int t = 0; t < 2; ++t) {
    double expect = 0.0;
    for (int c = 0; c < kNumComponents; ++c)
      expect += w.component_weights[c] * (sr.comp[c][t] - stats.mean(c)) / stats.stddev(c);
    CHECK(norm[t] == doctest::Approx(expect));
  }

  const double eps = 0.05;
  auto fixed = apply_centering(sr, CenteringMode::fixed_offset(stats, eps), w);
  for (int t = 0; t < 2; ++t) {
    double expect = -eps;
    for (int c = 0; c < kNumComponents; ++c)
      expect += w.component_weights[c] * sr.comp[c][t] / stats.stddev(c);
    CHECK(fixed[t] == doctest::Approx(expect));
  }
}

TEST_CASE("normalization rejects unfrozen or degenerate statistics") {
  Catalog cat = hand_catalog();
  SimulatorModel sim(cat, 0.5, 1.0);
  std::vector<int> history = {0};
  std::vector<int> path = {2};
  StepRewards sr = decompose(sim, history, path, 2);
  RewardWeights w;

  RewardStats open;
  open.accumulate_value(kIoi, 1.0);
  CHECK_THROWS_AS(apply_centering(sr, CenteringMode::normalize(open), w), std::logic_error);

  // Constant warm-up values give zero spread: normalizing must refuse.
  RewardStats flat;
  for (int i = 0; i < 10; ++i)
    for (int c = 0; c < kNumComponents; ++c) flat.accumulate_value(c, 1.0);
  flat.freeze();
  CHECK_THROWS_AS(apply_centering(sr, CenteringMode::normalize(flat), w),
                  std::runtime_error);

  // Zero-weighted components are skipped, degenerate or not.
  RewardStats mixed;
  for (int i = 0; i < 10; ++i) {
    mixed.accumulate_value(kIoi, i * 0.1);
    mixed.accumulate_value(kIor, 1.0);  // flat
    mixed.accumulate_value(kCtr, i * 0.2);
  }
  mixed.freeze();
  RewardWeights skip;
  skip.component_weights = {1.0, 0.0, 1.0};
  CHECK_NOTHROW(apply_centering(sr, CenteringMode::normalize(mixed), skip));
}

TEST_CASE("the scalar mean combines per-component means with path weights") {
  RewardStats stats;
  for (int i = 0; i < 4; ++i) {
    stats.accumulate_value(kIoi, 1.0 + i);  // mean 2.5
    stats.accumulate_value(kIor, 2.0);      // mean 2.0
    stats.accumulate_value(kCtr, 0.5);      // mean 0.5
  }
  stats.freeze();
  RewardWeights w;
  w.alpha = 2.0;
  w.beta = 0.5;
  w.gamma = 4.0;
  CHECK(scalar_mean(stats, w) == doctest::Approx(2.0 * 2.5 + 0.5 * 2.0 + 4.0 * 0.5));
}

TEST_CASE("warm-up accumulation pools every step of every path") {
  Catalog cat = generate_catalog(33, 8, 4, 2, 3, 0.7);
  SimulatorModel sim(cat, 0.8, 0.7);
  std::vector<int> history = {0};
  std::vector<StepRewards> batch;
  batch.push_back(decompose(sim, history, std::vector<int>{1, 2}, 5));
  batch.push_back(decompose(sim, history, std::vector<int>{3}, 5));
  RewardStats stats;
  accumulate_warmup(stats, batch);
  stats.freeze();
  CHECK(stats.count() == 3);  // 2 + 1 positions
}
