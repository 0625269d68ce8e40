#pragma once

#include <cstdio>
#include <memory>
#include <string>
#include <vector>

#include "brl/cmdp.hpp"
#include "brl/critic.hpp"
#include "brl/gae.hpp"
#include "brl/policy.hpp"

namespace brl {

// One worker per environment instance, each with its own random stream
// seeded as base_seed + env index.
struct EnvPool {
  std::vector<std::unique_ptr<Env>> envs;
  std::vector<Rng> rngs;

  void seed(std::uint64_t base_seed) {
    rngs.clear();
    for (std::size_t i = 0; i < envs.size(); ++i)
      rngs.emplace_back(base_seed + static_cast<std::uint64_t>(i));
  }

  int size() const { return static_cast<int>(envs.size()); }

  int num_cost_channels() const {
    int n = 0;
    for (const auto& c : envs[0]->constraint_specs())
      if (c.kind != ConstraintKind::Symmetry) ++n;
    return n;
  }
};

// Flat on-policy batch, stored env-major (all of env 0, then env 1, ...).
// `costs` holds every env cost channel; the critic covers only the channels
// in cost_channel_map (head k predicts channel cost_channel_map[k]).
// bootstrap_* hold the critic value of the state after a transition, filled
// only where GAE needs it: at time-limit terminals and trailing batch cuts.
struct TrajectoryBatch {
  Mat states;
  Mat actions;
  Vec rewards;
  Mat costs;  // N x K_env
  std::vector<std::uint8_t> dones;
  std::vector<std::uint8_t> time_limits;
  Vec log_probs_old;
  Vec values;
  Mat cost_values;  // N x H
  Vec bootstrap_values;
  Mat bootstrap_cost_values;  // N x H
  std::vector<int> cost_channel_map;  // head -> env channel
  int num_envs = 0;
  int steps_per_env = 0;

  int size() const { return static_cast<int>(rewards.size()); }
  int num_cost_channels() const { return static_cast<int>(costs.cols()); }
  int num_heads() const { return static_cast<int>(cost_values.cols()); }
  int segment_start(int e) const { return e * steps_per_env; }
};

// Roll the policy through every pool member for total_steps transitions.
// Every environment starts from a fresh reset, so batches are a pure
// function of (policy, critics, pool rng states). Actions are sampled from
// the worker stream; the sampling log-prob is stored and is recomputable
// from the stored state/action to machine precision.
inline TrajectoryBatch collect(const GaussianPolicy& policy, EnvPool& pool,
                               int total_steps, const Mlp& value_net,
                               const CostCritic* cost_critic,
                               std::vector<int> channel_map = {}) {
  require(pool.size() > 0, "collect: empty pool");
  require(total_steps % pool.size() == 0,
          "collect: total_steps must be divisible by the pool size");
  const int steps = total_steps / pool.size();
  const int obs_dim = pool.envs[0]->obs_dim();
  const int act_dim = pool.envs[0]->act_dim();
  const int K = pool.num_cost_channels();
  const int H = cost_critic ? cost_critic->num_heads() : 0;
  if (channel_map.empty())
    for (int k = 0; k < H; ++k) channel_map.push_back(k);
  require(static_cast<int>(channel_map.size()) == H,
          "collect: channel map must cover every critic head");

  TrajectoryBatch b;
  b.num_envs = pool.size();
  b.steps_per_env = steps;
  b.cost_channel_map = channel_map;
  b.states = Mat(total_steps, obs_dim);
  b.actions = Mat(total_steps, act_dim);
  b.rewards = Vec(total_steps);
  b.costs = Mat(total_steps, K);
  b.dones.assign(total_steps, 0);
  b.time_limits.assign(total_steps, 0);
  b.log_probs_old = Vec(total_steps);

  const Vec std = policy.std();
  std::vector<int> boot_rows;
  std::vector<Vec> boot_states;

  int row = 0;
  for (int e = 0; e < pool.size(); ++e) {
    Env& env = *pool.envs[e];
    Rng& rng = pool.rngs[e];
    Vec state = env.reset(rng);
    for (int t = 0; t < steps; ++t, ++row) {
      Vec mean = policy.mean_net.output(state.transpose()).row(0);
      Vec action(act_dim);
      for (int d = 0; d < act_dim; ++d)
        action[d] = mean[d] + std[d] * rng.normal();
      StepResult res = env.step(action);
      require(static_cast<int>(res.costs.size()) == K,
              "collect: env cost vector length mismatch at env " +
                  std::to_string(e));

      b.states.row(row) = state.transpose();
      b.actions.row(row) = action.transpose();
      b.rewards[row] = res.reward;
      if (K > 0) b.costs.row(row) = res.costs.transpose();
      b.dones[row] = res.done ? 1 : 0;
      b.time_limits[row] = res.time_limit ? 1 : 0;
      b.log_probs_old[row] = log_prob_single(mean, std, action);

      const bool last = (t == steps - 1);
      if ((res.done && res.time_limit) || (last && !res.done)) {
        boot_rows.push_back(row);
        boot_states.push_back(res.state);
      }
      state = res.done ? (last ? res.state : env.reset(rng)) : res.state;
    }
  }

  b.values = value_net.output(b.states).col(0);
  b.cost_values = (H > 0) ? cost_critic->predict(b.states) : Mat(total_steps, 0);
  b.bootstrap_values = Vec::Zero(total_steps);
  b.bootstrap_cost_values = Mat::Zero(total_steps, H);
  if (!boot_rows.empty()) {
    Mat bs(static_cast<int>(boot_rows.size()), obs_dim);
    for (std::size_t i = 0; i < boot_rows.size(); ++i)
      bs.row(static_cast<int>(i)) = boot_states[i].transpose();
    Vec bv = value_net.output(bs).col(0);
    Mat bc = (H > 0) ? cost_critic->predict(bs) : Mat(0, 0);
    for (std::size_t i = 0; i < boot_rows.size(); ++i) {
      b.bootstrap_values[boot_rows[i]] = bv[static_cast<int>(i)];
      if (H > 0)
        b.bootstrap_cost_values.row(boot_rows[i]) = bc.row(static_cast<int>(i));
    }
  }
  return b;
}

// Empirical discounted-scale constraint return for one env cost channel:
// mean per-step cost over the batch divided by (1 - gamma). Comparable
// against discounted_limit output.
inline double estimate_Jc(const TrajectoryBatch& batch, int channel, double gamma) {
  require(batch.size() > 0, "estimate_Jc: empty batch");
  require(channel >= 0 && channel < batch.num_cost_channels(),
          "estimate_Jc: bad channel");
  return batch.costs.col(channel).mean() / (1.0 - gamma);
}

struct AdvantageSet {
  Vec adv_r;  // standardized
  Vec ret_r;
  Mat adv_c;  // zero-mean columns, one per critic head
  Mat ret_c;
  Vec j_c;    // discounted-limit scale, one per critic head
};

// GAE per env segment for the reward and each critic head, then the two
// normalizations: standardization for the reward advantage, zero-mean only
// for cost advantages (scaling those would distort the barrier's units).
inline AdvantageSet build_advantages(const TrajectoryBatch& b, double gamma,
                                     double lambda) {
  const int n = b.size();
  const int H = b.num_heads();
  AdvantageSet out;
  out.adv_r = Vec(n);
  out.ret_r = Vec(n);
  out.adv_c = Mat(n, H);
  out.ret_c = Mat(n, H);
  out.j_c = Vec(H);

  for (int e = 0; e < b.num_envs; ++e) {
    const int s = b.segment_start(e);
    const int len = b.steps_per_env;
    std::vector<std::uint8_t> dones(b.dones.begin() + s, b.dones.begin() + s + len);
    std::vector<std::uint8_t> tls(b.time_limits.begin() + s,
                                  b.time_limits.begin() + s + len);
    auto r = gae(b.rewards.segment(s, len), b.values.segment(s, len),
                 Vec(b.bootstrap_values.segment(s, len)), gamma, lambda, dones, tls);
    out.adv_r.segment(s, len) = r.adv;
    out.ret_r.segment(s, len) = r.ret;
    for (int k = 0; k < H; ++k) {
      auto c = gae(b.costs.col(b.cost_channel_map[k]).segment(s, len),
                   b.cost_values.col(k).segment(s, len),
                   Vec(b.bootstrap_cost_values.col(k).segment(s, len)), gamma,
                   lambda, dones, tls);
      out.adv_c.col(k).segment(s, len) = c.adv;
      out.ret_c.col(k).segment(s, len) = c.ret;
    }
  }

  out.adv_r = standardize(out.adv_r);
  for (int k = 0; k < H; ++k) {
    out.adv_c.col(k) = zero_mean(out.adv_c.col(k));
    out.j_c[k] = estimate_Jc(b, b.cost_channel_map[k], gamma);
  }
  return out;
}

// Columnar text dump of a batch, one transition per row, for offline
// debugging. Column layout is documented in the README.
inline void dump_batch(const TrajectoryBatch& b, const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (f == nullptr) throw std::runtime_error("dump_batch: cannot open " + path);
  const int K = b.num_cost_channels();
  const int H = b.num_heads();
  std::fprintf(f, "env step");
  for (int i = 0; i < b.states.cols(); ++i) std::fprintf(f, " s%d", i);
  for (int i = 0; i < b.actions.cols(); ++i) std::fprintf(f, " a%d", i);
  std::fprintf(f, " reward");
  for (int k = 0; k < K; ++k) std::fprintf(f, " c%d", k);
  std::fprintf(f, " done time_limit log_prob value");
  for (int k = 0; k < H; ++k) std::fprintf(f, " cv%d", k);
  std::fprintf(f, "\n");
  for (int row = 0; row < b.size(); ++row) {
    std::fprintf(f, "%d %d", row / b.steps_per_env, row % b.steps_per_env);
    for (int i = 0; i < b.states.cols(); ++i)
      std::fprintf(f, " %.17g", b.states(row, i));
    for (int i = 0; i < b.actions.cols(); ++i)
      std::fprintf(f, " %.17g", b.actions(row, i));
    std::fprintf(f, " %.17g", b.rewards[row]);
    for (int k = 0; k < K; ++k) std::fprintf(f, " %.17g", b.costs(row, k));
    std::fprintf(f, " %d %d %.17g %.17g", b.dones[row], b.time_limits[row],
                 b.log_probs_old[row], b.values[row]);
    for (int k = 0; k < H; ++k) std::fprintf(f, " %.17g", b.cost_values(row, k));
    std::fprintf(f, "\n");
  }
  std::fclose(f);
}

}  // namespace brl
