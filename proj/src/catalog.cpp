#include "pathlab/catalog.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

#include "pathlab/rng.hpp"

namespace pathlab {

int Catalog::index_of(int id) const {
  auto it = index_.find(id);
  if (it == index_.end())
    throw std::out_of_range("Catalog: unknown item id " + std::to_string(id));
  return it->second;
}

void Catalog::rebuild_index() {
  index_.clear();
  for (int i = 0; i < size(); ++i) {
    if (!index_.emplace(items[i].id, i).second)
      throw std::invalid_argument("Catalog: duplicate item id " + std::to_string(items[i].id));
  }
}

SimulatorModel::SimulatorModel(const Catalog& cat, double d, double temp)
    : catalog(&cat), decay(d), temperature(temp) {
  if (!(d > 0.0 && d < 1.0))
    throw std::invalid_argument("SimulatorModel: decay must be in (0,1)");
  if (!(temp > 0.0))
    throw std::invalid_argument("SimulatorModel: temperature must be positive");
}

std::vector<double> SimulatorModel::context_vector(std::span<const int> seq) const {
  std::vector<double> ctx(catalog->embedding_dim, 0.0);
  const int n = static_cast<int>(seq.size());
  for (int k = 0; k < n; ++k) {
    const double w = std::pow(decay, n - 1 - k);  // most recent item gets weight 1
    const auto& e = catalog->embedding_of(seq[k]);
    for (int d = 0; d < catalog->embedding_dim; ++d) ctx[d] += w * e[d];
  }
  double norm = 0.0;
  for (double v : ctx) norm += v * v;
  norm = std::sqrt(norm);
  if (norm > 0.0)
    for (double& v : ctx) v /= norm;
  return ctx;
}

std::vector<double> SimulatorModel::scores(std::span<const int> seq) const {
  const auto ctx = context_vector(seq);
  std::vector<double> s(catalog->size(), 0.0);
  for (int i = 0; i < catalog->size(); ++i) {
    double dot = 0.0;
    for (int d = 0; d < catalog->embedding_dim; ++d) dot += catalog->embeddings[i][d] * ctx[d];
    s[i] = dot;
  }
  return s;
}

std::vector<double> SimulatorModel::log_probabilities(std::span<const int> seq) const {
  std::vector<double> z = scores(seq);
  for (double& v : z) v /= temperature;
  const double zmax = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (double v : z) sum += std::exp(v - zmax);
  const double lse = zmax + std::log(sum);
  for (double& v : z) v -= lse;
  return z;
}

std::vector<double> SimulatorModel::probabilities(std::span<const int> seq) const {
  std::vector<double> lp = log_probabilities(seq);
  for (double& v : lp) v = std::exp(v);
  return lp;
}

double SimulatorModel::prob(int item_id, std::span<const int> seq) const {
  return std::exp(log_prob(item_id, seq));
}

double SimulatorModel::log_prob(int item_id, std::span<const int> seq) const {
  const int idx = catalog->index_of(item_id);
  return log_probabilities(seq)[idx];
}

int SimulatorModel::rank(int item_id, std::span<const int> seq) const {
  const int idx = catalog->index_of(item_id);
  const auto s = scores(seq);
  const double si = s[idx];
  const int id_i = catalog->items[idx].id;
  int r = 1;
  for (int j = 0; j < catalog->size(); ++j) {
    if (s[j] > si) ++r;
    else if (s[j] == si && catalog->items[j].id < id_i) ++r;
  }
  return r;
}

Catalog generate_catalog(std::uint64_t seed, int n_items, int n_attributes,
                         int attrs_per_item, int embedding_dim, double attr_mix) {
  if (n_items <= 0 || n_attributes <= 0 || embedding_dim <= 0)
    throw std::invalid_argument("generate_catalog: sizes must be positive");
  if (attrs_per_item <= 0 || attrs_per_item > n_attributes)
    throw std::invalid_argument("generate_catalog: attrs_per_item out of range");
  if (!(attr_mix >= 0.0 && attr_mix <= 1.0))
    throw std::invalid_argument("generate_catalog: attr_mix must be in [0,1]");

  Rng rng = Rng::derive(seed, {0xCA7u});
  Catalog cat;
  cat.embedding_dim = embedding_dim;
  cat.items.reserve(n_items);
  cat.embeddings.reserve(n_items);

  // one unit anchor direction per attribute; items inherit the mean of
  // their attributes' anchors
  std::vector<std::vector<double>> anchors(n_attributes,
                                           std::vector<double>(embedding_dim));
  for (auto& a : anchors) {
    double norm = 0.0;
    for (double& v : a) {
      v = rng.normal();
      norm += v * v;
    }
    norm = std::sqrt(norm);
    for (double& v : a) v /= norm;
  }

  std::vector<int> pool(n_attributes);
  for (int a = 0; a < n_attributes; ++a) pool[a] = a;

  for (int i = 0; i < n_items; ++i) {
    Item it;
    it.id = i;
    // partial Fisher-Yates: first attrs_per_item entries are a uniform draw
    // without replacement
    for (int k = 0; k < attrs_per_item; ++k) {
      const int j = k + static_cast<int>(rng.uniform_int(n_attributes - k));
      std::swap(pool[k], pool[j]);
      it.attributes.push_back(pool[k]);
    }
    std::sort(it.attributes.begin(), it.attributes.end());

    std::vector<double> e(embedding_dim, 0.0);
    for (int a : it.attributes)
      for (int d = 0; d < embedding_dim; ++d)
        e[d] += anchors[a][d] / static_cast<double>(it.attributes.size());
    double norm = 0.0;
    for (double& v : e) {
      v = attr_mix * v + (1.0 - attr_mix) * rng.normal();
      norm += v * v;
    }
    norm = std::sqrt(norm);
    for (double& v : e) v /= norm;

    cat.items.push_back(std::move(it));
    cat.embeddings.push_back(std::move(e));
  }
  cat.rebuild_index();
  return cat;
}

namespace {
void write_double(std::ostream& os, double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  os << buf;
}
}  // namespace

void save_catalog(const Catalog& cat, std::ostream& os) {
  os << "catalog 1\n";
  os << cat.items.size() << ' ' << cat.embedding_dim << '\n';
  for (int i = 0; i < cat.size(); ++i) {
    const Item& it = cat.items[i];
    os << it.id << ' ' << it.attributes.size();
    for (int a : it.attributes) os << ' ' << a;
    for (double v : cat.embeddings[i]) {
      os << ' ';
      write_double(os, v);
    }
    os << '\n';
  }
}

Catalog load_catalog(std::istream& is) {
  std::string tag;
  int version = 0;
  is >> tag >> version;
  if (!is || tag != "catalog")
    throw std::invalid_argument("load_catalog: not a catalog file");
  if (version != 1)
    throw std::invalid_argument("load_catalog: unsupported version " + std::to_string(version));
  std::size_t n = 0;
  Catalog cat;
  is >> n >> cat.embedding_dim;
  if (!is) throw std::invalid_argument("load_catalog: truncated header");
  for (std::size_t i = 0; i < n; ++i) {
    Item it;
    std::size_t na = 0;
    is >> it.id >> na;
    it.attributes.resize(na);
    for (auto& a : it.attributes) is >> a;
    std::vector<double> e(cat.embedding_dim);
    for (auto& v : e) is >> v;
    if (!is) throw std::invalid_argument("load_catalog: truncated item record");
    cat.items.push_back(std::move(it));
    cat.embeddings.push_back(std::move(e));
  }
  cat.rebuild_index();
  return cat;
}

std::vector<int> concat_seq(std::span<const int> a, std::span<const int> b) {
  std::vector<int> out;
  out.reserve(a.size() + b.size());
  out.insert(out.end(), a.begin(), a.end());
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

}  // namespace pathlab
