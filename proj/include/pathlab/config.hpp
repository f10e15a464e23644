#pragma once

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace pathlab {

// Any malformed key, value, or constraint violation in experiment
// configuration.  The command line maps this to exit code 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Flat experiment configuration.  External form is INI-style sections of
// key = value lines; every field is addressable as "section.key" for
// command-line overrides.
struct ExperimentConfig {
  // [env] synthetic catalog and user simulator
  int n_items = 30;
  int n_attributes = 8;
  int attrs_per_item = 2;
  int embedding_dim = 8;
  double attr_mix = 0.8;   // 0 = noise embeddings, 1 = pure attribute geometry
  double decay = 0.8;
  double sim_temperature = 0.7;

  // [data] interaction logs, mining, splits
  int n_users = 200;
  int seq_min_len = 20;
  int seq_max_len = 40;
  double feasible_bias = 0.7;
  int history_len = 5;       // mined history prefix and rollout-input prefix
  int min_shared = 1;        // attributes two consecutive items must share
  bool archive_trailing = false;

  // [policy]
  double temperature = 1.0;
  int l_max = 10;

  // [rewards]
  double alpha = 1.0;
  double beta = 1.0;
  double gamma = 1.0;
  double w_ioi = 1.0;
  double w_ior = 1.0;
  double w_ctr = 1.0;
  std::string centering = "normalize";  // raw | center | normalize | fixed_offset
  double epsilon = 0.0;                 // fixed_offset only

  // [pretrain]
  int pretrain_epochs = 300;
  double pretrain_lr = 4.0;

  // [train]
  std::uint64_t seed = 1;
  std::string estimator = "prorl";  // std | rtg | grpo | a2c | prorl
  int batch_size = 128;
  int m = 16;
  int epochs = 50;
  double lr = 0.1;
  double kl_coeff = 0.01;
  int warmup_epochs = 1;
  // Exactly unbiased prorl weights (leave-one-out slot baselines with the
  // stop decision included); the default keeps the plain position grouping.
  bool prorl_leave_one_out = false;

  // [a2c]
  int a2c_hidden = 256;
  double a2c_loss_coeff = 0.25;
  int a2c_warmup_epochs = 5;
  double a2c_lr = 0.05;

  // [eval]
  bool eval_greedy = false;  // sample one path per input unless set
  int eval_max_inputs = 64;

  // [collapse] length-collapse demonstration (separate from the main RL loop:
  // the degeneration needs aggressive uncentered updates on a narrow task)
  int collapse_updates = 500;
  double collapse_lr = 0.6;
  double collapse_kl_coeff = 0.0;
  int collapse_batch_size = 32;
  int collapse_m = 8;
  bool collapse_single_task = true;     // one history+target promotion task
  std::string collapse_components = "ioi,ior,ctr";

  void set(const std::string& dotted_key, const std::string& value);
  void validate() const;  // throws ConfigError on any violated constraint
};

// Split a comma-separated list, trimming whitespace and dropping empties.
std::vector<std::string> split_components(const std::string& csv);

// Parse an INI stream into cfg (unknown keys are errors).
void parse_config(std::istream& is, ExperimentConfig& cfg);
ExperimentConfig load_config_file(const std::string& path);

// Canonical dump: sorted section.key=value lines, doubles at full precision.
std::string dump_config(const ExperimentConfig& cfg);
void save_config(const ExperimentConfig& cfg, std::ostream& os);  // INI form

// FNV-1a over the canonical dump; stored in checkpoints so a resume against
// a different configuration is rejected.
std::uint64_t config_hash(const ExperimentConfig& cfg);

}  // namespace pathlab
