#include "pathlab/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace pathlab {

namespace {

constexpr char kMagic[8] = {'P', 'L', 'C', 'K', 'P', 'T', '0', '1'};

template <typename T>
void put(std::ostream& os, const T& v) {
  static_assert(std::is_trivially_copyable_v<T>);
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!is) throw std::invalid_argument("checkpoint: truncated stream");
  return v;
}

void put_string(std::ostream& os, const std::string& s) {
  put<std::uint64_t>(os, s.size());
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::istream& is) {
  const auto n = get<std::uint64_t>(is);
  if (n > (1u << 26)) throw std::invalid_argument("checkpoint: unreasonable string length");
  std::string s(n, '\0');
  is.read(s.data(), static_cast<std::streamsize>(n));
  if (!is) throw std::invalid_argument("checkpoint: truncated string");
  return s;
}

void put_policy(std::ostream& os, const PolicyParams& p) {
  put<std::int32_t>(os, p.n_actions);
  put<std::int32_t>(os, p.weights.rows);
  put<std::int32_t>(os, p.weights.cols);
  put<double>(os, p.temperature);
  for (double v : p.weights.data) put<double>(os, v);
}

PolicyParams get_policy(std::istream& is) {
  PolicyParams p;
  p.n_actions = get<std::int32_t>(is);
  const int rows = get<std::int32_t>(is);
  const int cols = get<std::int32_t>(is);
  if (rows < 0 || cols < 0 || rows != p.n_actions)
    throw std::invalid_argument("checkpoint: inconsistent policy shape");
  p.temperature = get<double>(is);
  p.weights = Matrix(rows, cols);
  for (double& v : p.weights.data) v = get<double>(is);
  return p;
}

}  // namespace

void save_checkpoint(const Checkpoint& ck, std::ostream& os) {
  os.write(kMagic, sizeof kMagic);
  put<std::uint32_t>(os, ck.version);
  put<std::uint64_t>(os, ck.config_hash);
  put<std::uint64_t>(os, ck.feature_hash);
  put_policy(os, ck.policy);
  put_policy(os, ck.prior);
  std::ostringstream stats;
  ck.stats.save(stats);
  put_string(os, stats.str());
  put_string(os, ck.rng_state);
  put<std::int32_t>(os, ck.epochs_done);
}

Checkpoint load_checkpoint(std::istream& is) {
  char magic[8];
  is.read(magic, sizeof magic);
  if (!is || std::memcmp(magic, kMagic, sizeof kMagic) != 0)
    throw std::invalid_argument("checkpoint: bad magic (not a checkpoint file)");
  Checkpoint ck;
  ck.version = get<std::uint32_t>(is);
  if (ck.version != 1)
    throw std::invalid_argument("checkpoint: unsupported version " + std::to_string(ck.version));
  ck.config_hash = get<std::uint64_t>(is);
  ck.feature_hash = get<std::uint64_t>(is);
  ck.policy = get_policy(is);
  ck.prior = get_policy(is);
  std::istringstream stats(get_string(is));
  ck.stats = RewardStats::load(stats);
  ck.rng_state = get_string(is);
  ck.epochs_done = get<std::int32_t>(is);
  return ck;
}

void save_checkpoint_file(const Checkpoint& ck, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("checkpoint: cannot open '" + path + "' for writing");
  save_checkpoint(ck, f);
  if (!f) throw std::runtime_error("checkpoint: write failed for '" + path + "'");
}

Checkpoint load_checkpoint_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("checkpoint: cannot open '" + path + "'");
  return load_checkpoint(f);
}

}  // namespace pathlab
