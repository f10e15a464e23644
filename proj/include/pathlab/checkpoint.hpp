#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>

#include "pathlab/policy.hpp"
#include "pathlab/rewards.hpp"

namespace pathlab {

// Everything needed to continue a training run exactly where it stopped:
// current policy, frozen prior, frozen warm-up statistics, the trainer's
// stateful generator, and hashes that reject mismatched configs or feature
// maps.  (The a2c critic is deliberately not persisted; resuming an a2c run
// restarts its critic from warm-up.)
struct Checkpoint {
  std::uint32_t version = 1;
  std::uint64_t config_hash = 0;
  std::uint64_t feature_hash = 0;
  PolicyParams policy;
  PolicyParams prior;
  RewardStats stats;
  std::string rng_state;
  std::int32_t epochs_done = 0;
};

void save_checkpoint(const Checkpoint& ck, std::ostream& os);
Checkpoint load_checkpoint(std::istream& is);

void save_checkpoint_file(const Checkpoint& ck, const std::string& path);
Checkpoint load_checkpoint_file(const std::string& path);

}  // namespace pathlab
