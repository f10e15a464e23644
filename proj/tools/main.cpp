// pathlab: desk-scale laboratory for path-recommendation policy gradients.
//
// Exit codes: 0 success, 2 configuration error, 3 numerical abort,
// 4 verification failure (oracle-check / theory-verify).

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "pathlab/checkpoint.hpp"
#include "pathlab/config.hpp"
#include "pathlab/estimators.hpp"
#include "pathlab/oracle.hpp"
#include "pathlab/theory.hpp"
#include "pathlab/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace pathlab;

namespace {

struct CommonOpts {
  std::string config_path;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  std::string out = "out";
};

void add_common(CLI::App* cmd, CommonOpts& o) {
  cmd->add_option("--config", o.config_path, "INI configuration file");
  cmd->add_option("--set", o.sets, "override, e.g. --set train.lr=0.2")->take_all();
  cmd->add_option("--seed", o.seed, "override train.seed");
  cmd->add_option("--out", o.out, "output directory");
}

ExperimentConfig build_config(const CommonOpts& o) {
  ExperimentConfig cfg;
  if (!o.config_path.empty()) cfg = load_config_file(o.config_path);
  for (const auto& s : o.sets) {
    const std::size_t eq = s.find('=');
    if (eq == std::string::npos)
      throw ConfigError("--set expects section.key=value, got '" + s + "'");
    cfg.set(s.substr(0, eq), s.substr(eq + 1));
  }
  if (o.seed) cfg.seed = *o.seed;
  cfg.validate();
  return cfg;
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open '" + p.string() + "' for writing");
  return f;
}

json eval_json(const EvalReport& r) {
  return json{{"mean_ioi", r.mean_ioi},       {"mean_ior", r.mean_ior},
              {"mean_ctr", r.mean_ctr},       {"mean_coherence", r.mean_coherence},
              {"mean_length", r.mean_length}, {"n_inputs", r.n_inputs},
              {"n_empty", r.n_empty},         {"all_empty", r.all_empty}};
}

void write_summary(const fs::path& dir, const json& j) {
  auto f = open_out(dir / "summary.json");
  f << j.dump(2) << '\n';
}

Checkpoint prior_checkpoint(const ExperimentConfig& cfg, const ExperimentSetup& setup,
                            const RewardStats& stats) {
  Checkpoint ck;
  ck.config_hash = config_hash(cfg);
  ck.feature_hash = feature_map_hash(*setup.sim);
  ck.policy = setup.prior;
  ck.prior = setup.prior;
  ck.stats = stats;
  ck.rng_state = Rng::derive(cfg.seed, {0x77}).state();
  ck.epochs_done = 0;
  return ck;
}

int cmd_pretrain(const CommonOpts& o) {
  const ExperimentConfig cfg = build_config(o);
  const ExperimentSetup setup = prepare_experiment(cfg);
  fs::create_directories(o.out);

  {
    auto f = open_out(fs::path(o.out) / "catalog.txt");
    save_catalog(*setup.catalog, f);
  }
  {
    auto f = open_out(fs::path(o.out) / "demos.txt");
    save_demonstrations(setup.demos, f);
  }
  save_checkpoint_file(prior_checkpoint(cfg, setup, RewardStats{}),
                       (fs::path(o.out) / "prior.ckpt").string());

  const EvalReport ev = evaluate(setup.prior, *setup.sim,
                                 std::span(setup.val_pool.data(),
                                           std::min<std::size_t>(setup.val_pool.size(),
                                                                 cfg.eval_max_inputs)),
                                 cfg.l_max, cfg.eval_greedy, cfg.seed);
  const double ll = demo_log_likelihood(setup.prior, *setup.sim, setup.demos, cfg.l_max);
  json j{{"n_demos", setup.demos.size()},
         {"demo_log_likelihood_per_action", ll},
         {"prior_eval", eval_json(ev)},
         {"config_hash", config_hash(cfg)}};
  write_summary(o.out, j);
  std::cout << "pretrained on " << setup.demos.size() << " demos, per-action ll " << ll
            << ", heldout ioi " << ev.mean_ioi << '\n';
  return 0;
}

int cmd_warmup(const CommonOpts& o) {
  const ExperimentConfig cfg = build_config(o);
  const ExperimentSetup setup = prepare_experiment(cfg);
  fs::create_directories(o.out);

  Rng master = Rng::derive(cfg.seed, {0x77});
  const RewardStats stats = run_warmup(cfg, setup, setup.prior, master);
  Checkpoint ck = prior_checkpoint(cfg, setup, stats);
  ck.rng_state = master.state();
  save_checkpoint_file(ck, (fs::path(o.out) / "warmup.ckpt").string());

  json comps;
  for (int c = 0; c < kNumComponents; ++c)
    comps[component_name(c)] = {{"mean", stats.mean(c)}, {"stddev", stats.stddev(c)}};
  write_summary(o.out, json{{"positions", stats.count()}, {"components", comps}});
  for (int c = 0; c < kNumComponents; ++c)
    std::cout << component_name(c) << ": mean " << stats.mean(c) << " stddev "
              << stats.stddev(c) << '\n';
  return 0;
}

int cmd_train(const CommonOpts& o, const std::string& resume_path) {
  const ExperimentConfig cfg = build_config(o);
  const ExperimentSetup setup = prepare_experiment(cfg);
  fs::create_directories(o.out);

  std::optional<Checkpoint> resume;
  if (!resume_path.empty()) resume = load_checkpoint_file(resume_path);

  const TrainResult res = train(cfg, setup, resume ? &*resume : nullptr, &std::cout);

  {
    auto f = open_out(fs::path(o.out) / "metrics.csv");
    write_metrics_csv(f, res.metrics);
  }
  save_checkpoint_file(res.checkpoint, (fs::path(o.out) / "checkpoint.bin").string());
  {
    auto f = open_out(fs::path(o.out) / "config.ini");
    save_config(cfg, f);
  }

  json j{{"config_hash", config_hash(cfg)},
         {"epochs", cfg.epochs},
         {"estimator", cfg.estimator},
         {"prior_eval", eval_json(res.prior_eval)},
         {"final_eval", eval_json(res.final_eval)}};
  if (!res.metrics.empty()) {
    const auto& last = res.metrics.back();
    j["final_epoch"] = {{"mean_length", last.mean_length},
                        {"diversity", last.diversity},
                        {"mean_kl", last.mean_kl},
                        {"adv_variance", last.adv_variance},
                        {"adv_variance_std_ratio", last.adv_variance_std_ratio}};
  }
  write_summary(o.out, j);
  std::cout << "trained " << cfg.epochs << " epochs (" << cfg.estimator << "); heldout ioi "
            << res.prior_eval.mean_ioi << " -> " << res.final_eval.mean_ioi << '\n';
  return 0;
}

int cmd_eval(const CommonOpts& o, const std::string& ckpt_path, const std::string& split) {
  const ExperimentConfig cfg = build_config(o);
  const ExperimentSetup setup = prepare_experiment(cfg);
  fs::create_directories(o.out);

  PolicyParams policy = setup.prior;
  if (!ckpt_path.empty()) {
    const Checkpoint ck = load_checkpoint_file(ckpt_path);
    if (ck.feature_hash != feature_map_hash(*setup.sim))
      throw ConfigError("eval: checkpoint feature map does not match this environment");
    policy = ck.policy;
  }
  const std::vector<RolloutInput>* pool = &setup.test_pool;
  if (split == "train") pool = &setup.train_pool;
  else if (split == "val") pool = &setup.val_pool;
  else if (split != "test") throw ConfigError("eval: --split must be train|val|test");

  const EvalReport ev = evaluate(policy, *setup.sim,
                                 std::span(pool->data(),
                                           std::min<std::size_t>(pool->size(),
                                                                 cfg.eval_max_inputs)),
                                 cfg.l_max, cfg.eval_greedy, cfg.seed);
  write_summary(o.out, json{{"split", split}, {"eval", eval_json(ev)}});
  std::cout << split << ": ioi " << ev.mean_ioi << " ior " << ev.mean_ior << " ctr "
            << ev.mean_ctr << " coherence " << ev.mean_coherence << " len "
            << ev.mean_length << (ev.all_empty ? " (all paths empty)" : "") << '\n';
  return 0;
}

int cmd_collapse_demo(const CommonOpts& o) {
  const ExperimentConfig cfg = build_config(o);
  const ExperimentSetup setup = prepare_experiment(cfg);
  fs::create_directories(o.out);

  const CollapseResult res = collapse_demo(cfg, setup, &std::cout);
  json prof;
  for (int c = 0; c < kNumComponents; ++c) {
    if (res.runs[c].empty()) continue;
    auto f = open_out(fs::path(o.out) / (std::string("collapse_") + component_name(c) + ".csv"));
    write_collapse_csv(f, res.runs[c]);
    auto g = open_out(fs::path(o.out) /
                      (std::string("collapse_") + component_name(c) + "_normalized.csv"));
    write_collapse_csv(g, res.normalized_runs[c]);
    prof[component_name(c)] = res.prior_step_mean[c];
    double norm_max_len = 0.0;
    for (const auto& row : res.normalized_runs[c])
      norm_max_len = std::max(norm_max_len, row.mean_length);
    std::cout << component_name(c) << ": raw length " << res.runs[c].front().mean_length
              << " -> " << res.runs[c].back().mean_length << ", raw diversity "
              << res.runs[c].front().diversity << " -> " << res.runs[c].back().diversity
              << ", normalized max length " << norm_max_len << '\n';
  }
  write_summary(o.out, json{{"updates", cfg.collapse_updates}, {"prior_step_mean", prof}});
  return 0;
}

int cmd_theory_verify(const CommonOpts& o, double horizon, double step) {
  fs::create_directories(o.out);
  const double mu_mins[] = {0.5, 1.0, 2.0};
  const int l_maxes[] = {3, 10};
  const double theta0s[] = {-1.0, 0.0, 2.0};

  bool ok = true;
  json cases = json::array();
  for (double mu_min : mu_mins)
    for (int l_max : l_maxes)
      for (double theta0 : theta0s) {
        StopOnlyModel model;
        model.theta = theta0;
        model.l_max = l_max;
        model.mu.assign(l_max, mu_min);
        const FlowTrace tr = integrate_flow(model, horizon, step);

        bool decreasing = true;
        for (std::size_t i = 1; i < tr.p.size(); ++i)
          if (!(tr.p[i] < tr.p[i - 1])) { decreasing = false; break; }
        const BoundReport rep = verify_bound(tr, mu_min);
        const bool holds = rep.status == BoundReport::Status::Holds;
        if (!holds || !decreasing) ok = false;

        char name[64];
        std::snprintf(name, sizeof name, "mu%.1f_L%d_t%+.0f", mu_min, l_max, theta0);
        {
          auto f = open_out(fs::path(o.out) / (std::string("trace_") + name + ".csv"));
          f << "s,theta,p,bound\n";
          for (std::size_t i = 0; i < tr.s.size(); ++i) {
            const double ds = tr.s[i] - tr.s_half;
            const double bound =
                tr.reached_half && ds > tr.step ? 4.0 / (mu_min * ds) : std::nan("");
            char buf[160];
            std::snprintf(buf, sizeof buf, "%.10g,%.10g,%.10g,%.10g\n", tr.s[i], tr.theta[i],
                          tr.p[i], bound);
            f << buf;
          }
        }
        cases.push_back({{"mu_min", mu_min},
                         {"l_max", l_max},
                         {"theta0", theta0},
                         {"p_final", tr.p.back()},
                         {"strictly_decreasing", decreasing},
                         {"bound_holds", holds},
                         {"max_violation", rep.max_violation}});
        std::cout << name << ": p " << tr.p.front() << " -> " << tr.p.back()
                  << (decreasing ? ", strictly decreasing" : ", NOT decreasing")
                  << (holds ? ", bound holds" : ", BOUND FAILS") << '\n';
      }
  write_summary(o.out, json{{"ok", ok}, {"cases", cases}});
  return ok ? 0 : 4;
}

int cmd_oracle_check(const CommonOpts& o) {
  fs::create_directories(o.out);
  double worst = 0.0;
  json cases = json::array();
  for (std::uint64_t seed : {11u, 12u, 13u, 14u, 15u}) {
    const Catalog cat = generate_catalog(seed, 3, 4, 2, 2);
    const SimulatorModel sim(cat, 0.7, 0.8);
    PolicyParams p = make_policy(cat, 1.0);
    Rng rng = Rng::derive(seed, {0xAB});
    for (double& v : p.weights.data) v = 0.4 * rng.normal();

    const std::vector<int> history = {0};
    const int target = 2;
    const int l_max = 3;
    RewardWeights w;
    auto reward = [&](const EnumeratedPath& ep) {
      return path_reward(sim, history, ep.items, target, w);
    };
    const auto paths = enumerate_paths(p, sim, history, target, l_max);
    const Matrix g = exact_gradient(paths, reward);

    // central finite differences of the exact expected reward
    Matrix fd(p.n_actions, p.feature_dim());
    const double h = 1e-5;
    for (std::size_t i = 0; i < p.weights.data.size(); ++i) {
      PolicyParams q = p;
      q.weights.data[i] = p.weights.data[i] + h;
      const double up = exact_expected_reward(enumerate_paths(q, sim, history, target, l_max),
                                              reward);
      q.weights.data[i] = p.weights.data[i] - h;
      const double dn = exact_expected_reward(enumerate_paths(q, sim, history, target, l_max),
                                              reward);
      fd.data[i] = (up - dn) / (2.0 * h);
    }
    double diff = 0.0;
    for (std::size_t i = 0; i < fd.data.size(); ++i)
      diff = std::max(diff, std::fabs(fd.data[i] - g.data[i]));
    const double rel = diff / std::max(g.max_abs(), 1e-9);
    worst = std::max(worst, rel);
    cases.push_back({{"seed", seed}, {"rel_err", rel}});
  }
  const bool ok = worst < 1e-6;
  write_summary(o.out, json{{"ok", ok}, {"worst_rel_err", worst}, {"cases", cases}});
  std::cout << "oracle gradient vs finite differences: worst rel err " << worst
            << (ok ? " (ok)" : " (FAIL)") << '\n';
  return ok ? 0 : 4;
}

int cmd_mine(const CommonOpts& o) {
  const ExperimentConfig cfg = build_config(o);
  const Catalog cat = generate_catalog(cfg.seed, cfg.n_items, cfg.n_attributes,
                                       cfg.attrs_per_item, cfg.embedding_dim, cfg.attr_mix);
  const auto seqs = random_walk_sequences(cat, cfg.n_users, cfg.seq_min_len, cfg.seq_max_len,
                                          cfg.feasible_bias, cfg.seed);
  const SplitSequences splits = split_users(seqs, cfg.seed);
  FeasibilityOracle oracle;
  oracle.min_shared = cfg.min_shared;
  const auto demos = mine_all(splits.train, cfg.history_len, oracle, cat, cfg.archive_trailing);

  fs::create_directories(o.out);
  {
    auto f = open_out(fs::path(o.out) / "demos.txt");
    save_demonstrations(demos, f);
  }
  double mean_len = 0.0;
  for (const auto& d : demos) mean_len += static_cast<double>(d.path.size());
  if (!demos.empty()) mean_len /= static_cast<double>(demos.size());
  write_summary(o.out, json{{"n_sequences", splits.train.size()},
                            {"n_demos", demos.size()},
                            {"oracle_calls", oracle.calls},
                            {"mean_demo_length", mean_len}});
  std::cout << "mined " << demos.size() << " demos from " << splits.train.size()
            << " sequences (" << oracle.calls << " oracle calls, mean length " << mean_len
            << ")\n";
  return 0;
}

int cmd_rollout_at_k(const CommonOpts& o, const std::string& ckpt_path, std::vector<int> ks) {
  const ExperimentConfig cfg = build_config(o);
  const ExperimentSetup setup = prepare_experiment(cfg);
  fs::create_directories(o.out);

  PolicyParams policy = setup.prior;
  if (!ckpt_path.empty()) {
    const Checkpoint ck = load_checkpoint_file(ckpt_path);
    if (ck.feature_hash != feature_map_hash(*setup.sim))
      throw ConfigError("rollout-at-k: checkpoint feature map does not match this environment");
    policy = ck.policy;
  }
  if (ks.empty()) ks = {1, 2, 4, 8, 16};
  const auto rows = rollout_at_k(policy, *setup.sim,
                                 std::span(setup.test_pool.data(),
                                           std::min<std::size_t>(setup.test_pool.size(),
                                                                 cfg.eval_max_inputs)),
                                 cfg.l_max, ks, cfg.seed);
  {
    auto f = open_out(fs::path(o.out) / "rollout_at_k.csv");
    write_rollout_at_k_csv(f, rows);
  }
  json jrows = json::array();
  for (const auto& r : rows) {
    jrows.push_back({{"k", r.k}, {"mean_best_ioi", r.mean_best_ioi},
                     {"mean_best_ior", r.mean_best_ior}});
    std::cout << "k=" << r.k << " best ioi " << r.mean_best_ioi << " best ior "
              << r.mean_best_ior << '\n';
  }
  write_summary(o.out, json{{"rows", jrows}});
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"desk-scale laboratory for path-recommendation policy gradients"};
  app.require_subcommand(1);

  CommonOpts o;
  std::string resume_path, ckpt_path, split = "test";
  std::vector<int> ks;
  int updates = 500;
  double horizon = 200.0, step = 1e-3;

  auto* pretrain = app.add_subcommand("pretrain", "mine demos and fit the prior policy");
  add_common(pretrain, o);
  auto* warmup = app.add_subcommand("warmup", "collect frozen reward statistics under the prior");
  add_common(warmup, o);
  auto* train = app.add_subcommand("train", "policy-gradient training");
  add_common(train, o);
  train->add_option("--resume", resume_path, "checkpoint to continue from");
  auto* eval = app.add_subcommand("eval", "score a policy on a data split");
  add_common(eval, o);
  eval->add_option("--checkpoint", ckpt_path, "policy checkpoint (default: the prior)");
  eval->add_option("--split", split, "train|val|test (default test)");
  auto* collapse = app.add_subcommand("collapse-demo",
                                      "raw vs normalized single-component degeneration runs");
  add_common(collapse, o);
  collapse->add_option("--updates", updates,
                       "override collapse.updates (gradient updates per arm)");
  auto* theory = app.add_subcommand("theory-verify",
                                    "integrate the stop-only flow and check the decay bound");
  add_common(theory, o);
  theory->add_option("--horizon", horizon, "integration horizon");
  theory->add_option("--step", step, "integration step");
  auto* oracle = app.add_subcommand("oracle-check",
                                    "exact gradients vs finite differences on toy setups");
  add_common(oracle, o);
  auto* mine = app.add_subcommand("mine", "goal-segment mining over synthetic logs");
  add_common(mine, o);
  auto* rak = app.add_subcommand("rollout-at-k", "best-of-k guidance curves");
  add_common(rak, o);
  rak->add_option("--checkpoint", ckpt_path, "policy checkpoint (default: the prior)");
  rak->add_option("--ks", ks, "k values, ascending")->take_all();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (pretrain->parsed()) return cmd_pretrain(o);
    if (warmup->parsed()) return cmd_warmup(o);
    if (train->parsed()) return cmd_train(o, resume_path);
    if (eval->parsed()) return cmd_eval(o, ckpt_path, split);
    if (collapse->parsed()) {
      if (collapse->count("--updates") > 0)
        o.sets.push_back("collapse.updates=" + std::to_string(updates));
      return cmd_collapse_demo(o);
    }
    if (theory->parsed()) return cmd_theory_verify(o, horizon, step);
    if (oracle->parsed()) return cmd_oracle_check(o);
    if (mine->parsed()) return cmd_mine(o);
    if (rak->parsed()) return cmd_rollout_at_k(o, ckpt_path, ks);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "numerical abort: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
