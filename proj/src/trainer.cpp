#include "pathlab/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <stdexcept>

namespace pathlab {

namespace {

// stream tags for derived generators
constexpr std::uint64_t kTagTarget = 0x7A6;
constexpr std::uint64_t kTagMaster = 0x77;
constexpr std::uint64_t kTagRollout = 0xB0;
constexpr std::uint64_t kTagEval = 0xE7A;
constexpr std::uint64_t kTagBestOfK = 0x4A7;
constexpr std::uint64_t kTagCritic = 0xC1;

// rollout phases (kept distinct so no stream is ever reused)
constexpr std::uint64_t kPhaseWarmup = 1;
constexpr std::uint64_t kPhaseTrain = 2;
constexpr std::uint64_t kPhaseCriticWarmup = 3;
constexpr std::uint64_t kPhaseCollapse = 4;          // + component index
constexpr std::uint64_t kPhaseProfile = 8;           // + component index
constexpr std::uint64_t kPhaseCollapseNorm = 12;     // + component index
constexpr std::uint64_t kPhaseCollapseWarmup = 16;   // + component index

std::vector<RolloutInput> pool_from_sequences(const std::vector<RawSequence>& seqs,
                                              const Catalog& cat, int history_len,
                                              std::uint64_t seed) {
  std::vector<RolloutInput> pool;
  pool.reserve(seqs.size());
  for (const auto& s : seqs) {
    RolloutInput in;
    const int keep = std::min<int>(history_len, static_cast<int>(s.items.size()));
    in.history.items.assign(s.items.begin(), s.items.begin() + keep);
    // fixed held-out target: uniform over items absent from the history
    Rng rng = Rng::derive(seed, {kTagTarget, static_cast<std::uint64_t>(s.user_id)});
    std::vector<int> candidates;
    for (const auto& it : cat.items)
      if (std::find(in.history.items.begin(), in.history.items.end(), it.id) ==
          in.history.items.end())
        candidates.push_back(it.id);
    if (candidates.empty())
      for (const auto& it : cat.items) candidates.push_back(it.id);  // tiny catalogs
    in.target = candidates[rng.uniform_int(candidates.size())];
    pool.push_back(std::move(in));
  }
  return pool;
}

double checked_ratio(double num, double den) { return den > 0.0 ? num / den : 0.0; }

void write_double_field(std::ostream& os, double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  os << buf;
}

}  // namespace

ExperimentSetup prepare_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  ExperimentSetup s;
  s.catalog = std::make_unique<Catalog>(generate_catalog(
      cfg.seed, cfg.n_items, cfg.n_attributes, cfg.attrs_per_item, cfg.embedding_dim,
      cfg.attr_mix));
  s.sim = std::make_unique<SimulatorModel>(*s.catalog, cfg.decay, cfg.sim_temperature);

  const auto seqs = random_walk_sequences(*s.catalog, cfg.n_users, cfg.seq_min_len,
                                          cfg.seq_max_len, cfg.feasible_bias, cfg.seed);
  s.splits = split_users(seqs, cfg.seed);

  FeasibilityOracle oracle;
  oracle.min_shared = cfg.min_shared;
  s.demos = mine_all(s.splits.train, cfg.history_len, oracle, *s.catalog,
                     cfg.archive_trailing);
  if (s.demos.empty())
    throw ConfigError("prepare_experiment: mining produced no demonstrations; "
                      "raise data.feasible_bias or lower data.min_shared");

  s.prior = pretrain_supervised(*s.sim, s.demos, cfg.l_max, cfg.pretrain_epochs,
                                cfg.pretrain_lr, cfg.temperature);

  s.train_pool = pool_from_sequences(s.splits.train, *s.catalog, cfg.history_len, cfg.seed);
  s.val_pool = pool_from_sequences(s.splits.validation, *s.catalog, cfg.history_len, cfg.seed);
  s.test_pool = pool_from_sequences(s.splits.test, *s.catalog, cfg.history_len, cfg.seed);
  return s;
}

double jaccard_diversity(std::span<const PathSample> samples, int max_paths) {
  const int n = std::min<int>(static_cast<int>(samples.size()), max_paths);
  if (n < 2) throw std::invalid_argument("jaccard_diversity: need at least two paths");
  std::vector<std::vector<int>> sets(n);
  for (int i = 0; i < n; ++i) {
    sets[i].assign(samples[i].items.begin(), samples[i].items.end());
    std::sort(sets[i].begin(), sets[i].end());
    sets[i].erase(std::unique(sets[i].begin(), sets[i].end()), sets[i].end());
  }
  double sim_sum = 0.0;
  std::int64_t pairs = 0;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const auto& a = sets[i];
      const auto& b = sets[j];
      if (a.empty() && b.empty()) {
        sim_sum += 1.0;
      } else {
        std::size_t x = 0, y = 0, inter = 0;
        while (x < a.size() && y < b.size()) {
          if (a[x] == b[y]) { ++inter; ++x; ++y; }
          else if (a[x] < b[y]) ++x;
          else ++y;
        }
        sim_sum += static_cast<double>(inter) /
                   static_cast<double>(a.size() + b.size() - inter);
      }
      ++pairs;
    }
  }
  return 1.0 - sim_sum / static_cast<double>(pairs);
}

RolloutBatch make_batch(const PolicyParams& p, const SimulatorModel& sim,
                        std::span<const RolloutInput> pool, int batch_size, int m, int l_max,
                        const CenteringMode& mode, const RewardWeights& w,
                        std::uint64_t seed, std::uint64_t phase, std::uint64_t epoch,
                        Rng& input_rng) {
  if (pool.empty()) throw std::invalid_argument("make_batch: empty input pool");
  RolloutBatch batch;
  batch.m = m;
  batch.inputs.reserve(batch_size);
  for (int i = 0; i < batch_size; ++i)
    batch.inputs.push_back(pool[input_rng.uniform_int(pool.size())]);
  batch.samples.reserve(static_cast<std::size_t>(batch_size) * m);
  batch.step_rewards.reserve(static_cast<std::size_t>(batch_size) * m);
  for (int i = 0; i < batch_size; ++i) {
    const auto& in = batch.inputs[i];
    for (int j = 0; j < m; ++j) {
      Rng rng = Rng::derive(seed, {kTagRollout, phase, epoch,
                                   static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(j)});
      PathSample s = sample_path(p, sim, in.history.items, in.target, l_max, rng);
      s.input_index = i;
      s.sample_index = j;
      const StepRewards sr = decompose(sim, in.history.items, s.items, in.target);
      batch.step_rewards.push_back(apply_centering(sr, mode, w));
      batch.samples.push_back(std::move(s));
    }
  }
  return batch;
}

RewardStats run_warmup(const ExperimentConfig& cfg, const ExperimentSetup& setup,
                       const PolicyParams& p, Rng& input_rng) {
  const SimulatorModel& sim = *setup.sim;
  RewardStats stats;
  for (int e = 0; e < cfg.warmup_epochs; ++e) {
    for (int i = 0; i < cfg.batch_size; ++i) {
      const auto& in = setup.train_pool[input_rng.uniform_int(setup.train_pool.size())];
      for (int j = 0; j < cfg.m; ++j) {
        Rng rng = Rng::derive(cfg.seed, {kTagRollout, kPhaseWarmup,
                                         static_cast<std::uint64_t>(e),
                                         static_cast<std::uint64_t>(i),
                                         static_cast<std::uint64_t>(j)});
        const PathSample s = sample_path(p, sim, in.history.items, in.target, cfg.l_max, rng);
        stats.accumulate(decompose(sim, in.history.items, s.items, in.target));
      }
    }
  }
  if (stats.count() == 0)
    throw NumericError("run_warmup: no path positions observed (all rollouts empty); "
                       "warm-up statistics are undefined");
  stats.freeze();
  return stats;
}

CenteringMode centering_from_config(const ExperimentConfig& cfg, const RewardStats& stats) {
  const RewardWeights w = weights_from_config(cfg);
  if (cfg.centering == "raw") return CenteringMode::raw();
  if (cfg.centering == "center") return CenteringMode::center(scalar_mean(stats, w));
  if (cfg.centering == "normalize") return CenteringMode::normalize(stats);
  if (cfg.centering == "fixed_offset") return CenteringMode::fixed_offset(stats, cfg.epsilon);
  throw ConfigError("config: rewards.centering must be raw|center|normalize|fixed_offset");
}

RewardWeights weights_from_config(const ExperimentConfig& cfg) {
  RewardWeights w;
  w.alpha = cfg.alpha;
  w.beta = cfg.beta;
  w.gamma = cfg.gamma;
  w.component_weights = {cfg.w_ioi, cfg.w_ior, cfg.w_ctr};
  return w;
}

EvalReport evaluate(const PolicyParams& p, const SimulatorModel& sim,
                    std::span<const RolloutInput> inputs, int l_max, bool greedy,
                    std::uint64_t seed) {
  if (inputs.empty()) throw std::invalid_argument("evaluate: no inputs");
  EvalReport rep;
  rep.n_inputs = static_cast<int>(inputs.size());
  double ctr_sum = 0.0, coh_sum = 0.0;
  int scored = 0;
  for (std::size_t idx = 0; idx < inputs.size(); ++idx) {
    const auto& in = inputs[idx];
    PathSample s;
    if (greedy) {
      s = greedy_path(p, sim, in.history.items, in.target, l_max);
    } else {
      Rng rng = Rng::derive(seed, {kTagEval, idx});
      s = sample_path(p, sim, in.history.items, in.target, l_max, rng);
    }
    rep.mean_length += static_cast<double>(s.items.size());
    if (s.items.empty()) {
      ++rep.n_empty;  // contributes zero guidance and is skipped for ctr/coherence
      continue;
    }
    rep.mean_ioi += ioi(sim, in.history.items, s.items, in.target);
    rep.mean_ior += ior(sim, in.history.items, s.items, in.target);
    ctr_sum += ctr(sim, in.history.items, s.items).value;
    coh_sum += coherence(*sim.catalog, s.items).value;
    ++scored;
  }
  rep.mean_ioi /= rep.n_inputs;
  rep.mean_ior /= rep.n_inputs;
  rep.mean_length /= rep.n_inputs;
  if (scored > 0) {
    rep.mean_ctr = ctr_sum / scored;
    rep.mean_coherence = coh_sum / scored;
  } else {
    rep.all_empty = true;  // zero-filled guidance metrics
  }
  return rep;
}

namespace {

struct EstimatorContext {
  EstimatorKind kind;
  CriticModel critic;
  bool has_critic = false;

  ValueFn value_fn() const {
    if (!has_critic) return {};
    return [this](std::span<const double> phi, int t) { return critic.value(phi, t); };
  }
};

EpochMetrics batch_metrics(const PolicyParams& policy, const PolicyParams& prior,
                           const SimulatorModel& sim, const RolloutBatch& batch,
                           const EstimatorContext& ctx, bool prorl_loo) {
  EpochMetrics row;
  double len = 0.0, ret = 0.0, kl = 0.0;
  for (int i = 0; i < batch.n(); ++i)
    for (int j = 0; j < batch.m; ++j) {
      const auto& s = batch.sample(i, j);
      len += static_cast<double>(s.items.size());
      ret += batch.path_return(i, j);
      kl += kl_per_path(policy, prior, sim, batch.inputs[i].history.items,
                        batch.inputs[i].target, s);
    }
  const double denom = static_cast<double>(batch.samples.size());
  row.mean_length = len / denom;
  row.mean_return = ret / denom;
  row.mean_kl = kl / denom;
  row.diversity = jaccard_diversity(batch.samples);
  row.adv_variance = advantage_variance(sim, batch, ctx.kind, ctx.value_fn(), prorl_loo);
  const double std_var = advantage_variance(sim, batch, EstimatorKind::Std);
  row.adv_variance_std_ratio = checked_ratio(row.adv_variance, std_var);
  return row;
}

}  // namespace

TrainResult train(const ExperimentConfig& cfg, const ExperimentSetup& setup,
                  const Checkpoint* resume, std::ostream* log) {
  cfg.validate();
  const SimulatorModel& sim = *setup.sim;
  const RewardWeights w = weights_from_config(cfg);
  const EstimatorKind kind = estimator_from_name(cfg.estimator);
  const std::uint64_t chash = config_hash(cfg);
  const std::uint64_t fhash = feature_map_hash(sim);

  TrainResult res;
  Rng master = Rng::derive(cfg.seed, {kTagMaster});
  int start_epoch = 0;

  if (resume) {
    if (resume->config_hash != chash)
      throw ConfigError("resume: checkpoint was written under a different configuration");
    if (resume->feature_hash != fhash)
      throw ConfigError("resume: checkpoint feature map does not match this environment");
    if (resume->epochs_done > cfg.epochs)
      throw ConfigError("resume: checkpoint already has more epochs than train.epochs");
    res.policy = resume->policy;
    res.stats = resume->stats;
    master.set_state(resume->rng_state);
    start_epoch = resume->epochs_done;
  } else {
    res.policy = setup.prior;
    res.stats = run_warmup(cfg, setup, setup.prior, master);
  }

  const CenteringMode mode = centering_from_config(cfg, res.stats);

  EstimatorContext ctx{kind, {}, false};
  if (kind == EstimatorKind::A2c) {
    ctx.critic = CriticModel(feature_dim(*setup.catalog) + 1, cfg.a2c_hidden,
                             Rng::derive(cfg.seed, {kTagCritic}).next_u64());
    ctx.has_critic = true;
    for (int e = 0; e < cfg.a2c_warmup_epochs; ++e) {
      const RolloutBatch batch =
          make_batch(res.policy, sim, setup.train_pool, cfg.batch_size, cfg.m, cfg.l_max,
                     mode, w, cfg.seed, kPhaseCriticWarmup, e, master);
      const double mse = ctx.critic.fit_batch(sim, batch, cfg.a2c_lr, cfg.a2c_loss_coeff);
      if (log) *log << "critic warmup " << e << " mse " << mse << '\n';
    }
  }

  res.prior_eval = evaluate(setup.prior, sim,
                            std::span(setup.test_pool.data(),
                                      std::min<std::size_t>(setup.test_pool.size(),
                                                            cfg.eval_max_inputs)),
                            cfg.l_max, cfg.eval_greedy, Rng::derive(cfg.seed, {0xF1}).next_u64());

  for (int e = start_epoch; e < cfg.epochs; ++e) {
    const RolloutBatch batch =
        make_batch(res.policy, sim, setup.train_pool, cfg.batch_size, cfg.m, cfg.l_max,
                   mode, w, cfg.seed, kPhaseTrain, e, master);

    GradientEstimate est =
        estimate_gradient(res.policy, sim, batch, kind, ctx.value_fn(),
                          cfg.prorl_leave_one_out);
    if (cfg.kl_coeff > 0.0)
      add_kl_gradient(est, res.policy, setup.prior, sim, batch, cfg.kl_coeff);
    if (!est.grad.all_finite())
      throw NumericError("train: non-finite gradient at epoch " + std::to_string(e));

    EpochMetrics row = batch_metrics(res.policy, setup.prior, sim, batch, ctx,
                                     cfg.prorl_leave_one_out);
    row.epoch = e;
    row.grad_max_abs = est.grad.max_abs();

    res.policy.weights.add_scaled(est.grad, cfg.lr);
    if (!res.policy.weights.all_finite())
      throw NumericError("train: policy parameters became non-finite at epoch " +
                         std::to_string(e));

    if (ctx.has_critic) ctx.critic.fit_batch(sim, batch, cfg.a2c_lr, cfg.a2c_loss_coeff);

    const EvalReport ev = evaluate(res.policy, sim,
                                   std::span(setup.val_pool.data(),
                                             std::min<std::size_t>(setup.val_pool.size(),
                                                                   cfg.eval_max_inputs)),
                                   cfg.l_max, cfg.eval_greedy,
                                   Rng::derive(cfg.seed, {kTagEval, 0xEE, static_cast<std::uint64_t>(e)}).next_u64());
    row.heldout_ioi = ev.mean_ioi;
    row.heldout_ior = ev.mean_ior;
    row.heldout_ctr = ev.mean_ctr;
    row.heldout_coherence = ev.mean_coherence;
    row.heldout_length = ev.mean_length;
    res.metrics.push_back(row);
    if (log)
      *log << "epoch " << e << " len " << row.mean_length << " ret " << row.mean_return
           << " kl " << row.mean_kl << " ioi " << row.heldout_ioi << '\n';
  }

  res.final_eval = evaluate(res.policy, sim,
                            std::span(setup.test_pool.data(),
                                      std::min<std::size_t>(setup.test_pool.size(),
                                                            cfg.eval_max_inputs)),
                            cfg.l_max, cfg.eval_greedy, Rng::derive(cfg.seed, {0xF2}).next_u64());

  res.checkpoint.version = 1;
  res.checkpoint.config_hash = chash;
  res.checkpoint.feature_hash = fhash;
  res.checkpoint.policy = res.policy;
  res.checkpoint.prior = setup.prior;
  res.checkpoint.stats = res.stats;
  res.checkpoint.rng_state = master.state();
  res.checkpoint.epochs_done = cfg.epochs;
  return res;
}

void write_metrics_csv(std::ostream& os, std::span<const EpochMetrics> rows) {
  os << "epoch,mean_length,diversity,mean_return,mean_kl,adv_variance,"
        "adv_variance_std_ratio,grad_max_abs,heldout_ioi,heldout_ior,heldout_ctr,"
        "heldout_coherence,heldout_length\n";
  for (const auto& r : rows) {
    os << r.epoch;
    for (double v : {r.mean_length, r.diversity, r.mean_return, r.mean_kl, r.adv_variance,
                     r.adv_variance_std_ratio, r.grad_max_abs, r.heldout_ioi, r.heldout_ior,
                     r.heldout_ctr, r.heldout_coherence, r.heldout_length}) {
      os << ',';
      write_double_field(os, v);
    }
    os << '\n';
  }
}

CollapseResult collapse_demo(const ExperimentConfig& cfg, const ExperimentSetup& setup,
                             std::ostream* log) {
  cfg.validate();
  const SimulatorModel& sim = *setup.sim;
  CollapseResult out;

  // The degeneration is demonstrated on one fixed promotion task: with a
  // population of tasks, per-input conditioning (distinct targets and
  // histories) keeps paths separated across inputs even after each task's
  // own distribution has collapsed, masking the effect in the pooled
  // diversity statistic.
  std::vector<RolloutInput> pool;
  if (cfg.collapse_single_task)
    pool.push_back(setup.train_pool.front());
  else
    pool.assign(setup.train_pool.begin(), setup.train_pool.end());

  const std::vector<std::string> selected = split_components(cfg.collapse_components);
  const auto is_selected = [&selected](int c) {
    return std::find(selected.begin(), selected.end(), component_name(c)) != selected.end();
  };

  for (int c = 0; c < kNumComponents; ++c) {
    if (!is_selected(c)) continue;
    RewardWeights w;  // single component
    w.alpha = c == kIoi ? 1.0 : 0.0;
    w.beta = c == kIor ? 1.0 : 0.0;
    w.gamma = c == kCtr ? 1.0 : 0.0;

    // positionwise mean raw increment under the prior: the positive drift
    // that makes path-level weighting inflate length
    {
      Rng input_rng = Rng::derive(cfg.seed, {kTagMaster, kPhaseProfile + c});
      const RolloutBatch batch = make_batch(
          setup.prior, sim, pool, cfg.collapse_batch_size, cfg.collapse_m, cfg.l_max,
          CenteringMode::raw(), w, cfg.seed, kPhaseProfile + c, 0, input_rng);
      std::vector<double> sum(cfg.l_max, 0.0);
      std::vector<std::int64_t> cnt(cfg.l_max, 0);
      for (const auto& r : batch.step_rewards)
        for (std::size_t t = 0; t < r.size(); ++t) {
          sum[t] += r[t];
          cnt[t] += 1;
        }
      auto& prof = out.prior_step_mean[c];
      for (int t = 0; t < cfg.l_max; ++t)
        prof.push_back(cnt[t] > 0 ? sum[t] / cnt[t] : 0.0);
    }

    // frozen statistics for the contrast arm, gathered under the prior on
    // the same task
    RewardStats stats;
    for (int i = 0; i < cfg.collapse_batch_size; ++i) {
      const RolloutInput& in = pool[static_cast<std::size_t>(i) % pool.size()];
      for (int j = 0; j < cfg.collapse_m; ++j) {
        Rng rng = Rng::derive(cfg.seed, {kTagRollout, kPhaseCollapseWarmup + c,
                                         static_cast<std::uint64_t>(i),
                                         static_cast<std::uint64_t>(j)});
        const PathSample s =
            sample_path(setup.prior, sim, in.history.items, in.target, cfg.l_max, rng);
        stats.accumulate(decompose(sim, in.history.items, s.items, in.target));
      }
    }
    if (stats.count() == 0)
      throw NumericError("collapse_demo: all warm-up rollouts were empty; "
                         "normalization statistics are undefined");
    stats.freeze();

    for (int arm = 0; arm < 2; ++arm) {
      const bool normalized = arm == 1;
      const CenteringMode mode =
          normalized ? CenteringMode::normalize(stats) : CenteringMode::raw();
      const std::uint64_t phase = (normalized ? kPhaseCollapseNorm : kPhaseCollapse) + c;
      PolicyParams policy = setup.prior;
      Rng input_rng = Rng::derive(cfg.seed, {kTagMaster, phase});
      auto& rows = normalized ? out.normalized_runs[c] : out.runs[c];
      for (int u = 0; u < cfg.collapse_updates; ++u) {
        const RolloutBatch batch =
            make_batch(policy, sim, pool, cfg.collapse_batch_size, cfg.collapse_m, cfg.l_max,
                       mode, w, cfg.seed, phase, u, input_rng);
        GradientEstimate est = estimate_std(policy, sim, batch);
        if (cfg.collapse_kl_coeff > 0.0)
          add_kl_gradient(est, policy, setup.prior, sim, batch, cfg.collapse_kl_coeff);
        if (!est.grad.all_finite())
          throw NumericError("collapse_demo: non-finite gradient at update " +
                             std::to_string(u));
        CollapseRow row;
        row.update = u;
        double len = 0.0, ret = 0.0;
        for (int i = 0; i < batch.n(); ++i)
          for (int j = 0; j < batch.m; ++j) {
            len += static_cast<double>(batch.sample(i, j).items.size());
            ret += batch.path_return(i, j);
          }
        row.mean_length = len / static_cast<double>(batch.samples.size());
        row.mean_return = ret / static_cast<double>(batch.samples.size());
        row.diversity = jaccard_diversity(batch.samples);
        rows.push_back(row);
        policy.weights.add_scaled(est.grad, cfg.collapse_lr);
        if (!policy.weights.all_finite())
          throw NumericError("collapse_demo: parameters became non-finite at update " +
                             std::to_string(u));
        if (log && (u % 25 == 0 || u + 1 == cfg.collapse_updates))
          *log << component_name(c) << (normalized ? "[normalized]" : "[raw]") << " update "
               << u << " len " << row.mean_length << " div " << row.diversity << '\n';
      }
    }
  }
  return out;
}

void write_collapse_csv(std::ostream& os, std::span<const CollapseRow> rows) {
  os << "update,mean_length,diversity,mean_return\n";
  for (const auto& r : rows) {
    os << r.update;
    for (double v : {r.mean_length, r.diversity, r.mean_return}) {
      os << ',';
      write_double_field(os, v);
    }
    os << '\n';
  }
}

std::vector<RolloutAtKRow> rollout_at_k(const PolicyParams& p, const SimulatorModel& sim,
                                        std::span<const RolloutInput> inputs, int l_max,
                                        std::span<const int> ks, std::uint64_t seed) {
  if (inputs.empty()) throw std::invalid_argument("rollout_at_k: no inputs");
  if (ks.empty()) throw std::invalid_argument("rollout_at_k: no k values");
  for (std::size_t i = 0; i < ks.size(); ++i) {
    if (ks[i] < 1) throw std::invalid_argument("rollout_at_k: k values must be >= 1");
    if (i > 0 && ks[i] <= ks[i - 1])
      throw std::invalid_argument("rollout_at_k: k values must be strictly increasing");
  }
  const int k_max = ks.back();
  std::vector<RolloutAtKRow> rows(ks.size());
  for (std::size_t r = 0; r < ks.size(); ++r) rows[r].k = ks[r];

  for (std::size_t idx = 0; idx < inputs.size(); ++idx) {
    const auto& in = inputs[idx];
    double best_ioi = 0.0, best_ior = 0.0;
    std::size_t next_row = 0;
    for (int j = 0; j < k_max; ++j) {
      Rng rng = Rng::derive(seed, {kTagBestOfK, idx, static_cast<std::uint64_t>(j)});
      const PathSample s = sample_path(p, sim, in.history.items, in.target, l_max, rng);
      // empty paths score zero guidance by definition
      const double v_ioi = s.items.empty() ? 0.0 : ioi(sim, in.history.items, s.items, in.target);
      const double v_ior = s.items.empty() ? 0.0 : ior(sim, in.history.items, s.items, in.target);
      if (j == 0) {
        best_ioi = v_ioi;
        best_ior = v_ior;
      } else {
        best_ioi = std::max(best_ioi, v_ioi);
        best_ior = std::max(best_ior, v_ior);
      }
      while (next_row < ks.size() && j + 1 == ks[next_row]) {
        rows[next_row].mean_best_ioi += best_ioi;
        rows[next_row].mean_best_ior += best_ior;
        ++next_row;
      }
    }
  }
  for (auto& r : rows) {
    r.mean_best_ioi /= static_cast<double>(inputs.size());
    r.mean_best_ior /= static_cast<double>(inputs.size());
  }
  return rows;
}

void write_rollout_at_k_csv(std::ostream& os, std::span<const RolloutAtKRow> rows) {
  os << "k,mean_best_ioi,mean_best_ior\n";
  for (const auto& r : rows) {
    os << r.k << ',';
    write_double_field(os, r.mean_best_ioi);
    os << ',';
    write_double_field(os, r.mean_best_ior);
    os << '\n';
  }
}

}  // namespace pathlab
