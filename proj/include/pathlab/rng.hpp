#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>

namespace pathlab {

// splitmix64 finalizer; used to fold stream tags into derived seeds.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Deterministic generator wrapper.  All randomness in the project flows
// through this type so that runs are reproducible bit-for-bit, including
// across checkpoint save/restore (the engine state serializes as text).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  // Independent stream addressed by (seed, path).  Used to give every
  // (epoch, input, sample) its own generator so results do not depend on
  // evaluation order.
  static Rng derive(std::uint64_t seed, std::initializer_list<std::uint64_t> path) {
    std::uint64_t h = mix64(seed);
    for (std::uint64_t v : path) h = mix64(h ^ (v + 0x9e3779b97f4a7c15ULL));
    return Rng(h);
  }

  std::uint64_t next_u64() { return gen_(); }

  // Uniform on [0, 1): top 53 bits of the engine output.
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n).
  std::uint64_t uniform_int(std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("uniform_int: n must be positive");
    return gen_() % n;
  }

  // Standard normal via Box-Muller (no cached spare, so the engine state is
  // the whole state).
  double normal() {
    double u1 = 1.0 - uniform();
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  std::string state() const {
    std::ostringstream os;
    os << gen_;
    return os.str();
  }

  void set_state(const std::string& s) {
    std::istringstream is(s);
    is >> gen_;
    if (is.fail()) throw std::invalid_argument("Rng::set_state: malformed state string");
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace pathlab
