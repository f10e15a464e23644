#include "pathlab/mining.hpp"

#include <algorithm>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

#include "pathlab/rng.hpp"

namespace pathlab {

bool FeasibilityOracle::feasible(const Catalog& cat, int id_a, int id_b) const {
  ++calls;
  const auto& a = cat.item_of(id_a).attributes;
  const auto& b = cat.item_of(id_b).attributes;
  int shared = 0;
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i] == b[j]) {
      ++shared;
      if (shared >= min_shared) return true;
      ++i;
      ++j;
    } else if (a[i] < b[j]) {
      ++i;
    } else {
      ++j;
    }
  }
  return shared >= min_shared;
}

std::vector<Demonstration> mine_sequence(const RawSequence& seq, int n,
                                         const FeasibilityOracle& oracle,
                                         const Catalog& cat, bool archive_trailing) {
  if (n < 1) throw std::invalid_argument("mine_sequence: history length must be >= 1");
  std::vector<Demonstration> out;
  const auto& s = seq.items;
  const int T = static_cast<int>(s.size());
  std::vector<int> run;

  auto archive = [&](const std::vector<int>& r) {
    if (r.size() > 1) out.push_back({r, r.back()});
  };

  // One oracle call per position n+1..T (1-based), i.e. exactly T-n calls.
  for (int t = n; t < T; ++t) {  // 0-based: s[t] is the 1-based item i_{t+1}
    if (run.empty()) run.push_back(s[t - 1]);
    if (oracle.feasible(cat, run.back(), s[t])) {
      run.push_back(s[t]);
    } else {
      archive(run);
      run.clear();
    }
  }
  if (archive_trailing) archive(run);
  return out;
}

std::vector<Demonstration> mine_all(const std::vector<RawSequence>& seqs, int n,
                                    const FeasibilityOracle& oracle, const Catalog& cat,
                                    bool archive_trailing) {
  std::vector<Demonstration> out;
  for (const auto& s : seqs) {
    auto d = mine_sequence(s, n, oracle, cat, archive_trailing);
    out.insert(out.end(), d.begin(), d.end());
  }
  return out;
}

SplitSequences split_users(const std::vector<RawSequence>& seqs, std::uint64_t seed) {
  const int n = static_cast<int>(seqs.size());
  if (n < 10) throw std::invalid_argument("split_users: need at least 10 users");
  std::vector<int> idx(n);
  for (int i = 0; i < n; ++i) idx[i] = i;
  Rng rng = Rng::derive(seed, {0x5711u});
  for (int i = n - 1; i > 0; --i) {
    const int j = static_cast<int>(rng.uniform_int(i + 1));
    std::swap(idx[i], idx[j]);
  }
  const int n_train = (n * 8) / 10;
  const int n_val = n / 10;
  SplitSequences sp;
  for (int i = 0; i < n; ++i) {
    const RawSequence& s = seqs[idx[i]];
    if (i < n_train) sp.train.push_back(s);
    else if (i < n_train + n_val) sp.validation.push_back(s);
    else sp.test.push_back(s);
  }
  return sp;
}

std::vector<RawSequence> random_walk_sequences(const Catalog& cat, int n_users,
                                               int min_len, int max_len,
                                               double feasible_bias, std::uint64_t seed) {
  if (n_users < 1) throw std::invalid_argument("random_walk_sequences: n_users must be >= 1");
  if (min_len < 1 || max_len < min_len)
    throw std::invalid_argument("random_walk_sequences: bad length range");
  if (!(feasible_bias >= 0.0 && feasible_bias <= 1.0))
    throw std::invalid_argument("random_walk_sequences: feasible_bias must be in [0,1]");

  // attribute -> item indices, then per-item neighbor lists (shared attribute)
  const int n_items = cat.size();
  std::vector<std::vector<int>> by_attr;
  for (int i = 0; i < n_items; ++i)
    for (int a : cat.items[i].attributes) {
      if (a >= static_cast<int>(by_attr.size())) by_attr.resize(a + 1);
      by_attr[a].push_back(i);
    }
  std::vector<std::vector<int>> neighbors(n_items);
  for (int i = 0; i < n_items; ++i) {
    std::vector<int>& nb = neighbors[i];
    for (int a : cat.items[i].attributes)
      for (int j : by_attr[a])
        if (j != i) nb.push_back(j);
    std::sort(nb.begin(), nb.end());
    nb.erase(std::unique(nb.begin(), nb.end()), nb.end());
  }

  std::vector<RawSequence> out;
  out.reserve(n_users);
  for (int u = 0; u < n_users; ++u) {
    Rng rng = Rng::derive(seed, {0x3A1Bu, static_cast<std::uint64_t>(u)});
    const int len = min_len + static_cast<int>(rng.uniform_int(max_len - min_len + 1));
    RawSequence seq;
    seq.user_id = u;
    int cur = static_cast<int>(rng.uniform_int(n_items));
    seq.items.push_back(cat.items[cur].id);
    for (int t = 1; t < len; ++t) {
      int next = -1;
      if (!neighbors[cur].empty() && rng.uniform() < feasible_bias) {
        next = neighbors[cur][rng.uniform_int(neighbors[cur].size())];
      } else {
        // uniform over everything but the current item (when possible)
        next = static_cast<int>(rng.uniform_int(n_items));
        if (n_items > 1)
          while (next == cur) next = static_cast<int>(rng.uniform_int(n_items));
      }
      cur = next;
      seq.items.push_back(cat.items[cur].id);
    }
    out.push_back(std::move(seq));
  }
  return out;
}

void save_demonstrations(const std::vector<Demonstration>& demos, std::ostream& os) {
  os << "demos 1\n" << demos.size() << '\n';
  for (const auto& d : demos) {
    os << d.goal << ' ' << d.path.size();
    for (int id : d.path) os << ' ' << id;
    os << '\n';
  }
}

std::vector<Demonstration> load_demonstrations(std::istream& is) {
  std::string tag;
  int version = 0;
  std::size_t n = 0;
  is >> tag >> version >> n;
  if (!is || tag != "demos" || version != 1)
    throw std::invalid_argument("load_demonstrations: malformed stream");
  std::vector<Demonstration> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Demonstration d;
    std::size_t k = 0;
    is >> d.goal >> k;
    d.path.resize(k);
    for (auto& id : d.path) is >> id;
    if (!is) throw std::invalid_argument("load_demonstrations: truncated stream");
    out.push_back(std::move(d));
  }
  return out;
}

}  // namespace pathlab
