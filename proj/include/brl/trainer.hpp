#pragma once

#include <chrono>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "brl/barrier.hpp"
#include "brl/checkpoint.hpp"
#include "brl/envs/factory.hpp"
#include "brl/rollout.hpp"
#include "brl/trpo.hpp"

namespace brl {

enum class RunMode { Constrained, RewardOnly, Penalty };

inline const char* to_string(RunMode m) {
  switch (m) {
    case RunMode::Constrained: return "constrained";
    case RunMode::RewardOnly: return "reward_only";
    case RunMode::Penalty: return "penalty";
  }
  return "?";
}

struct TrainerConfig {
  std::uint64_t seed = 0;
  int iterations = 500;
  int num_envs = 32;
  int steps_per_env = 80;
  double gamma = 0.99;
  double lambda = 0.97;
  BarrierConfig barrier;
  int critic_minibatch = 256;
  std::vector<int> hidden = {64, 64};
  Activation activation = Activation::LeakyRelu;
  double leaky_slope = 0.01;
  double init_log_std = 0.0;
  RunMode mode = RunMode::Constrained;
  Vec penalty_lambda;  // one weight per cost channel
  bool multi_head_critic = true;
  std::map<std::string, double> limit_overrides;  // by constraint name
  std::set<std::string> disabled;                 // by constraint name

  int total_steps() const { return num_envs * steps_per_env; }
};

// Name, kind, and limits of one constraint as reported each iteration.
struct ReportedConstraint {
  std::string name;
  ConstraintKind kind;
  double limit_raw;   // D_k in natural units
  double limit;       // discounted scale for kernel kinds, raw for symmetry
  int channel = -1;   // env cost channel (kernel kinds only)
};

// Runs Algorithm-style iterations: collect trajectories, estimate
// advantages, adapt the constraint thresholds, take the trust-region step,
// then refit the critics. Owns every random stream, so a run is a pure
// function of its config.
class Trainer {
 public:
  Trainer(TrainerConfig cfg, const envs::EnvFactory& factory)
      : cfg_(cfg), one_minus_gamma_(1.0 - cfg.gamma) {
    require(cfg_.gamma > 0.0 && cfg_.gamma < 1.0, "Trainer: gamma in (0,1)");
    cfg_.barrier.validate();

    for (int e = 0; e < cfg_.num_envs; ++e) pool_.envs.push_back(factory.make());
    pool_.seed(cfg_.seed);
    obs_dim_ = pool_.envs[0]->obs_dim();
    act_dim_ = pool_.envs[0]->act_dim();

    configure_constraints();

    Rng init_rng(cfg_.seed ^ 0x9E3779B97F4A7C15ULL);
    MlpSpec pspec = make_spec(obs_dim_, act_dim_);
    policy_ = GaussianPolicy(pspec, cfg_.init_log_std);
    policy_.init(init_rng);

    MlpSpec vspec = make_spec(obs_dim_, 1);
    value_net_ = Mlp(vspec);
    value_net_.init(init_rng, std::sqrt(2.0), 1.0);

    if (!channel_map_.empty())
      cost_critic_ = CostCritic::make(cfg_.hidden, obs_dim_,
                                      static_cast<int>(channel_map_.size()),
                                      cfg_.multi_head_critic, cfg_.activation,
                                      cfg_.leaky_slope, init_rng);
    critic_rng_ = Rng(cfg_.seed ^ 0xC2B2AE3D27D4EB4FULL);

    if (cfg_.mode == RunMode::Penalty)
      require(cfg_.penalty_lambda.size() == num_env_channels_,
              "Trainer: penalty lambda length must equal the cost channel count");
  }

  const TrainerConfig& config() const { return cfg_; }
  int iteration() const { return iter_; }
  const GaussianPolicy& policy() const { return policy_; }
  const Mlp& value_net() const { return value_net_; }
  const CostCritic* cost_critic() const {
    return channel_map_.empty() ? nullptr : &cost_critic_;
  }
  const std::vector<ReportedConstraint>& reported_constraints() const {
    return reported_;
  }

  // Dump the next collected batch to a columnar text file, then stop dumping.
  void set_batch_dump(std::string path) { dump_path_ = std::move(path); }

  IterationReport train_iteration() {
    using clock = std::chrono::steady_clock;
    IterationReport rep;
    rep.iter = iter_;

    auto t0 = clock::now();
    CostCritic* cost = channel_map_.empty() ? nullptr : &cost_critic_;
    TrajectoryBatch batch = collect(policy_, pool_, cfg_.total_steps(),
                                    value_net_, cost, channel_map_);
    rep.collect_ms = ms_since(t0);
    rep.mean_reward = batch.rewards.mean();
    if (!dump_path_.empty()) {
      dump_batch(batch, dump_path_);
      dump_path_.clear();
    }

    if (cfg_.mode == RunMode::Penalty)
      batch.rewards -= batch.costs * cfg_.penalty_lambda;

    AdvantageSet adv = build_advantages(batch, cfg_.gamma, cfg_.lambda);

    fill_constraint_report(batch, adv, rep);

    auto t1 = clock::now();
    LossBatch lb = make_loss_batch(batch, adv, rep);
    PolicyStepOutcome outcome =
        (cfg_.mode == RunMode::Constrained)
            ? policy_step(policy_, lb, cfg_.barrier)
            : reward_only_step(policy_, lb, cfg_.barrier);
    rep.policy_step_ms = ms_since(t1);

    rep.kl = outcome.kl;
    rep.objective_before = outcome.objective_before;
    rep.objective_after = outcome.objective_after;
    rep.accepted = outcome.accepted;
    rep.backtracks = outcome.backtracks;
    rep.barrier_margins = outcome.margins;
    rep.cg_ok = outcome.cg_ok;
    rep.note = outcome.note;

    auto t2 = clock::now();
    CriticTrainConfig ccfg;
    ccfg.epochs = cfg_.barrier.value_epochs;
    ccfg.lr = cfg_.barrier.value_lr;
    ccfg.grad_clip = cfg_.barrier.grad_clip;
    ccfg.minibatch = cfg_.critic_minibatch;
    auto closs = train_critics(batch.states, adv.ret_r, adv.ret_c, value_net_,
                               value_opt_, cost, ccfg, critic_rng_);
    rep.critic_ms = ms_since(t2);
    rep.value_loss = closs.value_loss_after;
    rep.cost_value_loss = closs.cost_loss_after;

    check_report(rep, cfg_.barrier.delta);
    ++iter_;
    return rep;
  }

  void save(std::ostream& os) const {
    io::write_pod<std::uint64_t>(os, 0x31544B4343524C42ULL);  // "BLRCCKT1" tag
    io::write_pod<std::int64_t>(os, iter_);
    write_policy(os, policy_);
    write_mlp(os, value_net_);
    write_adam(os, value_opt_);
    io::write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(channel_map_.size()));
    if (!channel_map_.empty()) {
      io::write_pod<std::uint8_t>(os, cost_critic_.multi_head ? 1 : 0);
      if (cost_critic_.multi_head) {
        write_mlp(os, cost_critic_.multi);
        write_adam(os, cost_critic_.multi_opt);
      } else {
        for (std::size_t k = 0; k < cost_critic_.singles.size(); ++k) {
          write_mlp(os, cost_critic_.singles[k]);
          write_adam(os, cost_critic_.single_opts[k]);
        }
      }
    }
    io::write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(pool_.rngs.size()));
    for (const auto& rng : pool_.rngs) write_rng(os, rng);
    write_rng(os, critic_rng_);
  }

  void load(std::istream& is) {
    if (io::read_pod<std::uint64_t>(is) != 0x31544B4343524C42ULL)
      throw std::runtime_error("checkpoint: bad trainer magic");
    iter_ = static_cast<int>(io::read_pod<std::int64_t>(is));
    policy_ = read_policy(is);
    value_net_ = read_mlp(is);
    value_opt_ = read_adam(is);
    const auto k = io::read_pod<std::uint32_t>(is);
    if (k != channel_map_.size())
      throw std::runtime_error("checkpoint: constraint count mismatch");
    if (k > 0) {
      const bool multi = io::read_pod<std::uint8_t>(is) != 0;
      if (multi != cost_critic_.multi_head)
        throw std::runtime_error("checkpoint: critic design mismatch");
      if (multi) {
        cost_critic_.multi = read_mlp(is);
        cost_critic_.multi_opt = read_adam(is);
      } else {
        for (std::size_t i = 0; i < cost_critic_.singles.size(); ++i) {
          cost_critic_.singles[i] = read_mlp(is);
          cost_critic_.single_opts[i] = read_adam(is);
        }
      }
    }
    const auto n = io::read_pod<std::uint32_t>(is);
    if (n != pool_.rngs.size())
      throw std::runtime_error("checkpoint: pool size mismatch");
    for (auto& rng : pool_.rngs) rng = read_rng(is);
    critic_rng_ = read_rng(is);
  }

 private:
  MlpSpec make_spec(int in, int out) const {
    MlpSpec s;
    s.layer_widths.push_back(in);
    for (int h : cfg_.hidden) s.layer_widths.push_back(h);
    s.layer_widths.push_back(out);
    s.activation = cfg_.activation;
    s.leaky_slope = cfg_.leaky_slope;
    return s;
  }

  void configure_constraints() {
    auto specs = pool_.envs[0]->constraint_specs();
    num_env_channels_ = 0;
    for (const auto& c : specs)
      if (c.kind != ConstraintKind::Symmetry) ++num_env_channels_;

    const bool enforce = cfg_.mode == RunMode::Constrained;
    int channel = 0;
    bool seen_symmetry = false;
    for (auto& c : specs) {
      const bool is_sym = c.kind == ConstraintKind::Symmetry;
      require(is_sym || !seen_symmetry,
              "Trainer: symmetry constraints must come after cost channels");
      seen_symmetry = seen_symmetry || is_sym;
      const int this_channel = is_sym ? -1 : channel++;
      bool enabled = c.enabled && enforce && !cfg_.disabled.count(c.name);
      double limit = c.limit;
      if (auto it = cfg_.limit_overrides.find(c.name);
          it != cfg_.limit_overrides.end())
        limit = it->second;

      // monitoring modes report every constraint; constrained mode reports
      // the enforced set
      if (!enforce || enabled) {
        ReportedConstraint rc;
        rc.name = c.name;
        rc.kind = c.kind;
        rc.limit_raw = limit;
        rc.limit = is_sym ? limit : discounted_limit(limit, cfg_.gamma);
        rc.channel = this_channel;
        reported_.push_back(rc);
        if (enforce && !is_sym) {
          channel_map_.push_back(this_channel);
          limits_d_.push_back(rc.limit);
        }
        if (enforce && is_sym) {
          require(!has_symmetry_, "Trainer: multiple symmetry constraints");
          has_symmetry_ = true;
          sym_limit_ = limit;
          auto m = pool_.envs[0]->mirror();
          require(m.has_value(),
                  "Trainer: symmetry constraint requires an env mirror");
          mirror_ = *m;
        }
      }
    }
  }

  void fill_constraint_report(const TrajectoryBatch& batch,
                              const AdvantageSet& adv, IterationReport& rep) {
    const int R = static_cast<int>(reported_.size());
    rep.j_c = Vec(R);
    rep.d_i = Vec(R);
    rep.d = Vec(R);
    int enforced = 0;
    for (int i = 0; i < R; ++i) {
      const auto& rc = reported_[i];
      rep.d[i] = rc.limit;
      if (rc.kind == ConstraintKind::Symmetry) {
        const double j =
            has_symmetry_ && cfg_.mode == RunMode::Constrained
                ? symmetry_value(policy_, batch.states, mirror_)
                : (pool_.envs[0]->mirror()
                       ? symmetry_value(policy_, batch.states,
                                        *pool_.envs[0]->mirror())
                       : 0.0);
        rep.j_c[i] = j;
        rep.d_i[i] = cfg_.mode == RunMode::Constrained
                         ? adaptive_threshold(j, rc.limit, cfg_.barrier.alpha,
                                              cfg_.barrier.epsilon_min)
                         : rc.limit;
        if (cfg_.mode == RunMode::Constrained) sym_d_i_ = rep.d_i[i];
      } else {
        rep.j_c[i] = estimate_Jc(batch, rc.channel, cfg_.gamma);
        if (cfg_.mode == RunMode::Constrained) {
          // adv.j_c is ordered by enforced channel
          rep.d_i[i] = adaptive_threshold(adv.j_c[enforced], rep.d[i],
                                          cfg_.barrier.alpha,
                                          cfg_.barrier.epsilon_min);
          ++enforced;
        } else {
          rep.d_i[i] = rep.d[i];
        }
      }
    }
  }

  LossBatch make_loss_batch(const TrajectoryBatch& batch, const AdvantageSet& adv,
                            const IterationReport& rep) {
    LossBatch lb;
    lb.states = batch.states;
    lb.actions = batch.actions;
    lb.log_probs_old = batch.log_probs_old;
    lb.adv_r = adv.adv_r;
    lb.entropy_coef = cfg_.barrier.entropy_coef;
    lb.one_minus_gamma = one_minus_gamma_;
    lb.barrier_t = cfg_.barrier.t;
    auto fwd = policy_forward(policy_, batch.states);
    lb.means_old = fwd.means;
    lb.std_old = fwd.std;
    if (cfg_.mode == RunMode::Constrained) {
      lb.adv_c = adv.adv_c;
      lb.j_c = adv.j_c;
      lb.thresholds = Vec(adv.j_c.size());
      int enforced = 0;
      for (std::size_t i = 0; i < reported_.size(); ++i)
        if (reported_[i].kind != ConstraintKind::Symmetry)
          lb.thresholds[enforced++] = rep.d_i[static_cast<int>(i)];
      if (has_symmetry_) {
        lb.mirror = &mirror_;
        lb.sym_threshold = sym_d_i_;
      }
    } else {
      lb.adv_c = Mat(batch.size(), 0);
      lb.j_c = Vec(0);
      lb.thresholds = Vec(0);
    }
    return lb;
  }

  static double ms_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(
               std::chrono::steady_clock::now() - t0)
        .count();
  }

  TrainerConfig cfg_;
  double one_minus_gamma_;
  EnvPool pool_;
  int obs_dim_ = 0, act_dim_ = 0;
  GaussianPolicy policy_;
  Mlp value_net_;
  Adam value_opt_;
  CostCritic cost_critic_;
  Rng critic_rng_;
  int iter_ = 0;

  std::string dump_path_;
  int num_env_channels_ = 0;
  std::vector<int> channel_map_;    // enforced kernel constraint -> env channel
  std::vector<double> limits_d_;    // discounted limits, enforced order
  std::vector<ReportedConstraint> reported_;
  bool has_symmetry_ = false;
  double sym_limit_ = 0.0;
  double sym_d_i_ = 0.0;
  MirrorSpec mirror_;
};

}  // namespace brl
