#pragma once

#include <cstdint>
#include <vector>

#include "pathlab/catalog.hpp"

namespace pathlab {

// One user's raw interaction log.
struct RawSequence {
  int user_id = 0;
  std::vector<int> items;
};

// A mined training example: a consecutive item segment that plausibly walks
// toward its final item, which is kept as the goal.
struct Demonstration {
  std::vector<int> path;  // includes the goal as its last element
  int goal = 0;
};

// Pairwise plausibility test between consecutive items.  The default
// instantiation accepts a pair when the items share at least min_shared
// attributes; `calls` counts how many pair tests were made.
struct FeasibilityOracle {
  int min_shared = 1;
  mutable std::uint64_t calls = 0;

  bool feasible(const Catalog& cat, int id_a, int id_b) const;
};

// Scan one sequence left to right, cutting it into maximal consecutive runs
// of pairwise-feasible items; runs of length > 1 that end at or after
// position n (1-based) are archived as demonstrations with the run's last
// item as goal.  The trailing run is dropped unless archive_trailing is set,
// since nothing after it confirms the goal was reached.
std::vector<Demonstration> mine_sequence(const RawSequence& seq, int n,
                                         const FeasibilityOracle& oracle,
                                         const Catalog& cat,
                                         bool archive_trailing = false);

std::vector<Demonstration> mine_all(const std::vector<RawSequence>& seqs, int n,
                                    const FeasibilityOracle& oracle, const Catalog& cat,
                                    bool archive_trailing = false);

// Seeded 80/10/10 user-level partition; every user lands in exactly one split.
struct SplitSequences {
  std::vector<RawSequence> train, validation, test;
};
SplitSequences split_users(const std::vector<RawSequence>& seqs, std::uint64_t seed);

// Synthetic interaction logs: attribute-biased random walks over the catalog.
// With probability feasible_bias the next item is drawn from the items
// sharing an attribute with the current one, otherwise uniformly.
std::vector<RawSequence> random_walk_sequences(const Catalog& cat, int n_users,
                                               int min_len, int max_len,
                                               double feasible_bias, std::uint64_t seed);

// Text round-trip: one line per demonstration, goal first then path ids.
void save_demonstrations(const std::vector<Demonstration>& demos, std::ostream& os);
std::vector<Demonstration> load_demonstrations(std::istream& is);

}  // namespace pathlab
