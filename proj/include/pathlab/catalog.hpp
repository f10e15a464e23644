#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <unordered_map>
#include <vector>

namespace pathlab {

// A catalog item: integer id plus a sorted attribute-id list (genres, tags).
struct Item {
  int id = 0;
  std::vector<int> attributes;  // sorted ascending, no duplicates
};

// Immutable item universe with unit-norm embeddings.  Embeddings drive the
// acceptance simulator; attributes drive feasibility checks and coherence.
struct Catalog {
  std::vector<Item> items;
  std::vector<std::vector<double>> embeddings;  // parallel to items, unit norm
  int embedding_dim = 0;

  int size() const { return static_cast<int>(items.size()); }
  bool has_id(int id) const { return index_.count(id) > 0; }
  int index_of(int id) const;  // throws std::out_of_range on unknown id
  const Item& item_of(int id) const { return items[index_of(id)]; }
  const std::vector<double>& embedding_of(int id) const { return embeddings[index_of(id)]; }

  void rebuild_index();

 private:
  std::unordered_map<int, int> index_;
};

// User interaction history: ordered item ids, oldest first.
struct InteractionHistory {
  std::vector<int> items;
};

// Frozen user simulator.  Scores every catalog item against an
// exponentially-decayed mean of the embeddings of the items seen so far and
// turns scores into acceptance probabilities with a temperature softmax.
//
// The simulator never trains; it plays the role of ground truth that both
// rewards and evaluation are measured against.
struct SimulatorModel {
  SimulatorModel(const Catalog& cat, double decay, double temperature);

  const Catalog* catalog = nullptr;
  double decay = 0.0;        // in (0,1)
  double temperature = 1.0;  // > 0

  // Decayed, re-normalized mean embedding of `seq`; zero vector for an empty
  // sequence (which makes the induced score distribution uniform).
  std::vector<double> context_vector(std::span<const int> seq) const;

  // Raw scores <emb_j, ctx> for all items, catalog order.
  std::vector<double> scores(std::span<const int> seq) const;

  // Softmax over all catalog items at this context.
  std::vector<double> probabilities(std::span<const int> seq) const;
  std::vector<double> log_probabilities(std::span<const int> seq) const;

  double prob(int item_id, std::span<const int> seq) const;
  double log_prob(int item_id, std::span<const int> seq) const;

  // 1-based rank of item_id by descending score, ties broken by ascending id.
  int rank(int item_id, std::span<const int> seq) const;
};

// Deterministic synthetic catalog: attribute sets drawn without replacement;
// embeddings blend a per-attribute anchor direction with gaussian noise
// (attr_mix 0 = pure noise, 1 = pure attribute geometry) and are then
// normalized, so items sharing attributes sit close in embedding space.
Catalog generate_catalog(std::uint64_t seed, int n_items, int n_attributes,
                         int attrs_per_item, int embedding_dim, double attr_mix = 0.7);

// Versioned text round-trip (full double precision).
void save_catalog(const Catalog& cat, std::ostream& os);
Catalog load_catalog(std::istream& is);

// Convenience: history followed by a generated path, as one id sequence.
std::vector<int> concat_seq(std::span<const int> a, std::span<const int> b);

}  // namespace pathlab
