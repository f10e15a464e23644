#include "doctest.h"

#include <algorithm>
#include <set>
#include <sstream>
#include <vector>

#include "pathlab/catalog.hpp"
#include "pathlab/mining.hpp"

using namespace pathlab;

namespace {

// Five items whose attribute overlaps are chosen by hand:
// 0-1 share attr 0, 1-2 share attr 1, 2-3 share nothing, 3-4 share attr 2.
Catalog chain_catalog() {
  Catalog cat;
  cat.items = {Item{0, {0}}, Item{1, {0, 1}}, Item{2, {1}}, Item{3, {2}}, Item{4, {2}}};
  cat.embeddings = {{1.0, 0.0}, {0.0, 1.0}, {1.0, 0.0}, {0.0, 1.0}, {1.0, 0.0}};
  cat.embedding_dim = 2;
  cat.rebuild_index();
  return cat;
}

}  // namespace

TEST_CASE("the pair test accepts exactly the shared-attribute pairs") {
  Catalog cat = chain_catalog();
  FeasibilityOracle oracle;
  CHECK(oracle.feasible(cat, 0, 1));
  CHECK(oracle.feasible(cat, 1, 2));
  CHECK_FALSE(oracle.feasible(cat, 2, 3));
  CHECK_FALSE(oracle.feasible(cat, 0, 2));
  CHECK(oracle.feasible(cat, 3, 4));
  CHECK(oracle.calls == 5);

  FeasibilityOracle strict;
  strict.min_shared = 2;
  CHECK_FALSE(strict.feasible(cat, 0, 1));  // only one shared attribute
}

TEST_CASE("a hand-traced sequence yields one run and one pair test per step") {
  Catalog cat = chain_catalog();
  FeasibilityOracle oracle;
  RawSequence seq{1, {0, 1, 2, 3, 4}};
  auto demos = mine_sequence(seq, 1, oracle, cat);
  // Runs: {0,1,2} (broken at 2-3), then trailing {3,4} which is dropped.
  REQUIRE(demos.size() == 1);
  CHECK(demos[0].path == std::vector<int>{0, 1, 2});
  CHECK(demos[0].goal == 2);
  // One test per adjacent pair: |S| - n with n sequences... here 5 items -> 4.
  CHECK(oracle.calls == 4);
}

TEST_CASE("keeping the trailing run archives the final segment too") {
  Catalog cat = chain_catalog();
  FeasibilityOracle oracle;
  RawSequence seq{1, {0, 1, 2, 3, 4}};
  auto demos = mine_sequence(seq, 1, oracle, cat, true);
  REQUIRE(demos.size() == 2);
  CHECK(demos[0].path == std::vector<int>{0, 1, 2});
  CHECK(demos[1].path == std::vector<int>{3, 4});
  CHECK(demos[1].goal == 4);
}

TEST_CASE("runs shorter than two items are never archived") {
  Catalog cat = chain_catalog();
  FeasibilityOracle oracle;
  // 0-2 infeasible, 2-0 infeasible: three singleton runs.
  RawSequence seq{1, {0, 2, 0}};
  CHECK(mine_sequence(seq, 1, oracle, cat).empty());
  CHECK(mine_sequence(seq, 1, oracle, cat, true).empty());
}

TEST_CASE("the position threshold filters early runs") {
  Catalog cat = chain_catalog();
  FeasibilityOracle oracle;
  RawSequence seq{1, {0, 1, 2, 3, 4}};
  // The run {0,1,2} ends at position 3 (1-based).  A threshold beyond that
  // rejects it; the trailing run would end at 5 but is dropped anyway.
  CHECK(mine_sequence(seq, 4, oracle, cat).empty());
  auto kept = mine_sequence(seq, 4, oracle, cat, true);
  REQUIRE(kept.size() == 1);
  CHECK(kept[0].path == std::vector<int>{3, 4});
}

TEST_CASE("mining all sequences pools per-user demonstrations") {
  Catalog cat = chain_catalog();
  FeasibilityOracle oracle;
  std::vector<RawSequence> seqs = {{1, {0, 1, 2, 3, 4}}, {2, {3, 4, 0}}};
  auto demos = mine_all(seqs, 1, oracle, cat);
  REQUIRE(demos.size() == 2);
  CHECK(demos[0].path == std::vector<int>{0, 1, 2});
  CHECK(demos[1].path == std::vector<int>{3, 4});
  // 4 pair tests for the first sequence + 2 for the second.
  CHECK(oracle.calls == 6);
}

TEST_CASE("every mined demonstration is pairwise feasible and goal-terminated") {
  Catalog cat = generate_catalog(21, 30, 6, 2, 3, 0.7);
  auto walks = random_walk_sequences(cat, 200, 10, 25, 0.7, 777);
  FeasibilityOracle oracle;
  auto demos = mine_all(walks, 3, oracle, cat);
  REQUIRE(!demos.empty());
  FeasibilityOracle checker;
  for (const auto& d : demos) {
    REQUIRE(d.path.size() >= 2);
    CHECK(d.goal == d.path.back());
    for (std::size_t i = 0; i + 1 < d.path.size(); ++i)
      CHECK(checker.feasible(cat, d.path[i], d.path[i + 1]));
  }
}

TEST_CASE("synthetic walks respect their length bounds and item universe") {
  Catalog cat = generate_catalog(22, 12, 4, 2, 3, 0.7);
  auto walks = random_walk_sequences(cat, 50, 5, 9, 0.5, 31);
  REQUIRE(walks.size() == 50);
  std::set<int> users;
  for (const auto& w : walks) {
    users.insert(w.user_id);
    CHECK(w.items.size() >= 5);
    CHECK(w.items.size() <= 9);
    for (int id : w.items) CHECK(cat.has_id(id));
  }
  CHECK(users.size() == 50);

  auto again = random_walk_sequences(cat, 50, 5, 9, 0.5, 31);
  bool identical = true;
  for (std::size_t i = 0; i < walks.size(); ++i)
    identical = identical && walks[i].items == again[i].items;
  CHECK(identical);

  auto other = random_walk_sequences(cat, 50, 5, 9, 0.5, 32);
  bool all_same = true;
  for (std::size_t i = 0; i < walks.size(); ++i)
    all_same = all_same && walks[i].items == other[i].items;
  CHECK_FALSE(all_same);
}

TEST_CASE("a high feasibility bias produces more linked steps") {
  Catalog cat = generate_catalog(23, 20, 5, 2, 3, 0.7);
  FeasibilityOracle oracle;
  auto count_linked = [&](const std::vector<RawSequence>& ws) {
    int linked = 0, total = 0;
    for (const auto& w : ws)
      for (std::size_t i = 0; i + 1 < w.items.size(); ++i) {
        linked += oracle.feasible(cat, w.items[i], w.items[i + 1]) ? 1 : 0;
        ++total;
      }
    return static_cast<double>(linked) / total;
  };
  double high = count_linked(random_walk_sequences(cat, 80, 15, 20, 0.95, 5));
  double low = count_linked(random_walk_sequences(cat, 80, 15, 20, 0.05, 5));
  CHECK(high > low);
}

TEST_CASE("user splits are deterministic, disjoint, and roughly 8:1:1") {
  Catalog cat = generate_catalog(24, 10, 4, 2, 3, 0.7);
  auto walks = random_walk_sequences(cat, 100, 5, 8, 0.5, 99);
  SplitSequences split = split_users(walks, 7);
  CHECK(split.train.size() + split.validation.size() + split.test.size() == walks.size());
  CHECK(split.train.size() >= 70);
  CHECK(!split.validation.empty());
  CHECK(!split.test.empty());

  std::set<int> seen;
  for (const auto* part : {&split.train, &split.validation, &split.test})
    for (const auto& s : *part) CHECK(seen.insert(s.user_id).second);

  SplitSequences again = split_users(walks, 7);
  CHECK(again.train.size() == split.train.size());
  bool same = true;
  for (std::size_t i = 0; i < split.train.size(); ++i)
    same = same && again.train[i].user_id == split.train[i].user_id;
  CHECK(same);
}

TEST_CASE("demonstration serialization round-trips") {
  std::vector<Demonstration> demos = {{{3, 1, 4}, 4}, {{2, 7}, 7}};
  std::ostringstream os;
  save_demonstrations(demos, os);
  std::istringstream is(os.str());
  auto back = load_demonstrations(is);
  REQUIRE(back.size() == demos.size());
  for (std::size_t i = 0; i < demos.size(); ++i) {
    CHECK(back[i].path == demos[i].path);
    CHECK(back[i].goal == demos[i].goal);
  }
  std::istringstream junk("definitely not demonstrations");
  CHECK_THROWS(load_demonstrations(junk));
}
