#include "pathlab/config.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <sstream>
#include <variant>
#include <vector>

#include "pathlab/estimators.hpp"

namespace pathlab {

namespace {

using Member = std::variant<int ExperimentConfig::*, double ExperimentConfig::*,
                            bool ExperimentConfig::*, std::uint64_t ExperimentConfig::*,
                            std::string ExperimentConfig::*>;

struct Field {
  const char* key;  // "section.name"
  Member member;
};

const std::vector<Field>& fields() {
  using C = ExperimentConfig;
  static const std::vector<Field> f = {
      {"env.n_items", &C::n_items},
      {"env.n_attributes", &C::n_attributes},
      {"env.attrs_per_item", &C::attrs_per_item},
      {"env.embedding_dim", &C::embedding_dim},
      {"env.attr_mix", &C::attr_mix},
      {"env.decay", &C::decay},
      {"env.sim_temperature", &C::sim_temperature},
      {"data.n_users", &C::n_users},
      {"data.seq_min_len", &C::seq_min_len},
      {"data.seq_max_len", &C::seq_max_len},
      {"data.feasible_bias", &C::feasible_bias},
      {"data.history_len", &C::history_len},
      {"data.min_shared", &C::min_shared},
      {"data.archive_trailing", &C::archive_trailing},
      {"policy.temperature", &C::temperature},
      {"policy.l_max", &C::l_max},
      {"rewards.alpha", &C::alpha},
      {"rewards.beta", &C::beta},
      {"rewards.gamma", &C::gamma},
      {"rewards.w_ioi", &C::w_ioi},
      {"rewards.w_ior", &C::w_ior},
      {"rewards.w_ctr", &C::w_ctr},
      {"rewards.centering", &C::centering},
      {"rewards.epsilon", &C::epsilon},
      {"pretrain.epochs", &C::pretrain_epochs},
      {"pretrain.lr", &C::pretrain_lr},
      {"train.seed", &C::seed},
      {"train.estimator", &C::estimator},
      {"train.batch_size", &C::batch_size},
      {"train.m", &C::m},
      {"train.epochs", &C::epochs},
      {"train.lr", &C::lr},
      {"train.kl_coeff", &C::kl_coeff},
      {"train.warmup_epochs", &C::warmup_epochs},
      {"train.prorl_leave_one_out", &C::prorl_leave_one_out},
      {"a2c.hidden", &C::a2c_hidden},
      {"a2c.loss_coeff", &C::a2c_loss_coeff},
      {"a2c.warmup_epochs", &C::a2c_warmup_epochs},
      {"a2c.lr", &C::a2c_lr},
      {"eval.greedy", &C::eval_greedy},
      {"eval.max_inputs", &C::eval_max_inputs},
      {"collapse.updates", &C::collapse_updates},
      {"collapse.lr", &C::collapse_lr},
      {"collapse.kl_coeff", &C::collapse_kl_coeff},
      {"collapse.batch_size", &C::collapse_batch_size},
      {"collapse.m", &C::collapse_m},
      {"collapse.single_task", &C::collapse_single_task},
      {"collapse.components", &C::collapse_components},
  };
  return f;
}

int parse_int(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const long long x = std::stoll(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trailing characters");
    if (x < INT32_MIN || x > INT32_MAX) throw std::out_of_range("out of int range");
    return static_cast<int>(x);
  } catch (const std::exception&) {
    throw ConfigError("config: bad integer for " + key + ": '" + v + "'");
  }
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const unsigned long long x = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trailing characters");
    return x;
  } catch (const std::exception&) {
    throw ConfigError("config: bad seed/unsigned for " + key + ": '" + v + "'");
  }
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double x = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trailing characters");
    return x;
  } catch (const std::exception&) {
    throw ConfigError("config: bad number for " + key + ": '" + v + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("config: bad boolean for " + key + ": '" + v + "' (use true/false)");
}

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string format_value(const ExperimentConfig& cfg, const Member& m) {
  return std::visit(
      [&](auto ptr) -> std::string {
        const auto& v = cfg.*ptr;
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, std::string>) {
          return v;
        } else if constexpr (std::is_same_v<T, bool>) {
          return v ? "true" : "false";
        } else if constexpr (std::is_same_v<T, double>) {
          char buf[40];
          std::snprintf(buf, sizeof buf, "%.17g", v);
          return buf;
        } else {
          return std::to_string(v);
        }
      },
      m);
}

}  // namespace

std::vector<std::string> split_components(const std::string& csv) {
  std::vector<std::string> out;
  std::string cur;
  std::stringstream ss(csv);
  while (std::getline(ss, cur, ',')) {
    cur = trim(cur);
    if (!cur.empty()) out.push_back(cur);
  }
  return out;
}

void ExperimentConfig::set(const std::string& dotted_key, const std::string& value) {
  for (const auto& f : fields()) {
    if (dotted_key != f.key) continue;
    std::visit(
        [&](auto ptr) {
          using T = std::decay_t<decltype(this->*ptr)>;
          if constexpr (std::is_same_v<T, int>) {
            this->*ptr = parse_int(dotted_key, value);
          } else if constexpr (std::is_same_v<T, double>) {
            this->*ptr = parse_double(dotted_key, value);
          } else if constexpr (std::is_same_v<T, bool>) {
            this->*ptr = parse_bool(dotted_key, value);
          } else if constexpr (std::is_same_v<T, std::uint64_t>) {
            this->*ptr = parse_u64(dotted_key, value);
          } else {
            this->*ptr = value;
          }
        },
        f.member);
    return;
  }
  throw ConfigError("config: unknown key '" + dotted_key + "'");
}

void ExperimentConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError("config: " + msg); };
  if (n_items < 1) fail("env.n_items must be >= 1");
  if (n_attributes < 1) fail("env.n_attributes must be >= 1");
  if (attrs_per_item < 1 || attrs_per_item > n_attributes)
    fail("env.attrs_per_item must be in [1, env.n_attributes]");
  if (embedding_dim < 1) fail("env.embedding_dim must be >= 1");
  if (!(attr_mix >= 0.0 && attr_mix <= 1.0)) fail("env.attr_mix must be in [0,1]");
  if (!(decay > 0.0 && decay < 1.0)) fail("env.decay must be in (0,1)");
  if (!(sim_temperature > 0.0)) fail("env.sim_temperature must be positive");
  if (n_users < 10) fail("data.n_users must be >= 10 (user split needs every part non-empty)");
  if (seq_min_len < 1 || seq_max_len < seq_min_len)
    fail("data sequence lengths must satisfy 1 <= seq_min_len <= seq_max_len");
  if (!(feasible_bias >= 0.0 && feasible_bias <= 1.0)) fail("data.feasible_bias must be in [0,1]");
  if (history_len < 1) fail("data.history_len must be >= 1");
  if (min_shared < 1) fail("data.min_shared must be >= 1");
  if (!(temperature > 0.0)) fail("policy.temperature must be positive");
  if (l_max < 1) fail("policy.l_max must be >= 1");
  if (centering != "raw" && centering != "center" && centering != "normalize" &&
      centering != "fixed_offset")
    fail("rewards.centering must be raw|center|normalize|fixed_offset");
  if (pretrain_epochs < 0) fail("pretrain.epochs must be >= 0");
  if (!(pretrain_lr > 0.0)) fail("pretrain.lr must be positive");
  try {
    estimator_from_name(estimator);
  } catch (const std::exception& e) {
    fail(e.what());
  }
  if (batch_size < 1) fail("train.batch_size must be >= 1");
  if (m < 1) fail("train.m must be >= 1");
  const EstimatorKind kind = estimator_from_name(estimator);
  if ((kind == EstimatorKind::Grpo || kind == EstimatorKind::Prorl) && m < 2)
    fail("train.m must be >= 2 for group-baseline estimators (grpo, prorl)");
  if (epochs < 0) fail("train.epochs must be >= 0");
  if (!(lr > 0.0)) fail("train.lr must be positive");
  if (kl_coeff < 0.0) fail("train.kl_coeff must be >= 0");
  if (warmup_epochs < 0) fail("train.warmup_epochs must be >= 0");
  if ((centering == "center" || centering == "normalize" || centering == "fixed_offset") &&
      warmup_epochs < 1)
    fail("train.warmup_epochs must be >= 1 when centering uses warm-up statistics");
  if (a2c_hidden < 1) fail("a2c.hidden must be >= 1");
  if (a2c_loss_coeff < 0.0) fail("a2c.loss_coeff must be >= 0");
  if (a2c_warmup_epochs < 0) fail("a2c.warmup_epochs must be >= 0");
  if (!(a2c_lr > 0.0)) fail("a2c.lr must be positive");
  if (eval_max_inputs < 1) fail("eval.max_inputs must be >= 1");
  if (collapse_updates < 1) fail("collapse.updates must be >= 1");
  if (!(collapse_lr > 0.0)) fail("collapse.lr must be positive");
  if (collapse_kl_coeff < 0.0) fail("collapse.kl_coeff must be >= 0");
  if (collapse_batch_size < 1) fail("collapse.batch_size must be >= 1");
  if (collapse_m < 1) fail("collapse.m must be >= 1");
  if (static_cast<long long>(collapse_batch_size) * collapse_m < 2)
    fail("collapse batch must contain at least two rollouts for the diversity trace");
  for (const std::string& c : split_components(collapse_components))
    if (c != "ioi" && c != "ior" && c != "ctr")
      fail("collapse.components must be a comma-separated subset of ioi,ior,ctr");
  if (split_components(collapse_components).empty())
    fail("collapse.components must name at least one component");
}

void parse_config(std::istream& is, ExperimentConfig& cfg) {
  std::string line;
  std::string section;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const std::size_t hash = line.find_first_of("#;");
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ConfigError("config line " + std::to_string(lineno) + ": malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      if (section.empty())
        throw ConfigError("config line " + std::to_string(lineno) + ": empty section name");
      continue;
    }
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
    if (section.empty())
      throw ConfigError("config line " + std::to_string(lineno) + ": key outside any section");
    cfg.set(section + "." + key, value);
  }
}

ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("config: cannot open '" + path + "'");
  ExperimentConfig cfg;
  parse_config(f, cfg);
  return cfg;
}

std::string dump_config(const ExperimentConfig& cfg) {
  std::vector<std::string> lines;
  for (const auto& f : fields()) lines.push_back(std::string(f.key) + "=" + format_value(cfg, f.member));
  std::sort(lines.begin(), lines.end());
  std::string out;
  for (const auto& l : lines) {
    out += l;
    out += '\n';
  }
  return out;
}

void save_config(const ExperimentConfig& cfg, std::ostream& os) {
  std::string section;
  for (const auto& f : fields()) {
    const std::string key = f.key;
    const std::size_t dot = key.find('.');
    const std::string sec = key.substr(0, dot);
    if (sec != section) {
      if (!section.empty()) os << '\n';
      os << '[' << sec << "]\n";
      section = sec;
    }
    os << key.substr(dot + 1) << " = " << format_value(cfg, f.member) << '\n';
  }
}

std::uint64_t config_hash(const ExperimentConfig& cfg) {
  const std::string dump = dump_config(cfg);
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : dump) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace pathlab
