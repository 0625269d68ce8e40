#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "brl/config.hpp"
#include "brl/metrics.hpp"
#include "brl/trainer.hpp"

namespace brl {

struct HarnessConfig {
  TrainerConfig trainer;
  envs::EnvFactory factory;
  std::string dump_batch;
  int checkpoint_every = 0;  // 0 disables periodic checkpoints
};

inline RunMode parse_mode(const std::string& s) {
  if (s == "constrained") return RunMode::Constrained;
  if (s == "reward_only") return RunMode::RewardOnly;
  if (s == "penalty") return RunMode::Penalty;
  throw ConfigError("run.mode must be constrained, reward_only, or penalty");
}

// Map the flat config onto the trainer and environment parameters. Every key
// has a default, so an empty config trains the standard run.
inline HarnessConfig build_harness_config(const KeyValueConfig& kv) {
  HarnessConfig hc;

  auto& f = hc.factory;
  f.name = kv.get_string("env.name", "point_mass");
  {
    auto& p = f.point_mass;
    p.dt = kv.get_double("env.dt", p.dt);
    p.episode_steps = static_cast<int>(kv.get_int("env.episode_steps", p.episode_steps));
    p.k_c = kv.get_double("env.k_c", p.k_c);
    p.k_effort = kv.get_double("env.k_effort", p.k_effort);
    p.box_bound = kv.get_double("env.box_bound", p.box_bound);
    p.act_bound = kv.get_double("env.act_bound", p.act_bound);
    p.speed_cap = kv.get_double("env.speed_cap", p.speed_cap);
    p.cmd_range = kv.get_double("env.cmd_range", p.cmd_range);
    p.reset_range = kv.get_double("env.reset_range", p.reset_range);
    p.num_channels = static_cast<int>(kv.get_int("env.num_channels", p.num_channels));
    p.with_symmetry = kv.get_bool("env.with_symmetry", p.with_symmetry);
    p.box_limit = kv.get_double("env.box_limit", p.box_limit);
    p.act_limit = kv.get_double("env.act_limit", p.act_limit);
    p.speed_limit = kv.get_double("env.speed_limit", p.speed_limit);
    p.effort_limit = kv.get_double("env.effort_limit", p.effort_limit);
    p.sym_limit = kv.get_double("env.sym_limit", p.sym_limit);
    p.fail_speed = kv.get_double("env.fail_speed", p.fail_speed);
  }
  {
    auto& p = f.pendulum;
    p.dt = kv.get_double("env.dt", p.dt);
    p.episode_steps = static_cast<int>(kv.get_int("env.episode_steps", p.episode_steps));
    p.k_c = kv.get_double("env.k_c", p.k_c);
    p.gravity = kv.get_double("env.gravity", p.gravity);
    p.torque_bound = kv.get_double("env.torque_bound", p.torque_bound);
    p.cmd_range = kv.get_double("env.cmd_range", p.cmd_range);
  }
  {
    auto& p = f.line_world;
    p.dt = kv.get_double("env.dt", p.dt);
    p.episode_steps = static_cast<int>(kv.get_int("env.episode_steps", p.episode_steps));
    p.start = kv.get_double("env.start", p.start);
    p.act_bound = kv.get_double("env.act_bound", p.act_bound);
  }

  auto& t = hc.trainer;
  t.seed = static_cast<std::uint64_t>(kv.get_int("run.seed", 0));
  t.iterations = static_cast<int>(kv.get_int("run.iterations", 500));
  t.mode = parse_mode(kv.get_string("run.mode", "constrained"));
  t.gamma = kv.get_double("cmdp.gamma", 0.99);
  t.num_envs = static_cast<int>(kv.get_int("rollout.envs", 32));
  t.steps_per_env = static_cast<int>(
      kv.get_int("rollout.steps_per_env", f.default_episode_steps()));
  t.lambda = kv.get_double("rollout.lambda", 0.97);

  t.barrier.t = kv.get_double("barrier.t", 100.0);
  t.barrier.alpha = kv.get_double("barrier.alpha", 0.02);
  t.barrier.delta = kv.get_double("barrier.delta", 0.01);
  t.barrier.cg_iters = static_cast<int>(kv.get_int("barrier.cg_iters", 10));
  t.barrier.damping = kv.get_double("barrier.damping", 0.01);
  t.barrier.backtrack_coeff = kv.get_double("barrier.backtrack_coeff", 0.8);
  t.barrier.max_backtracks =
      static_cast<int>(kv.get_int("barrier.max_backtracks", 10));
  t.barrier.entropy_coef = kv.get_double("barrier.entropy_coef", 0.05);
  t.barrier.epsilon_min = kv.get_double("barrier.epsilon_min", 1e-4);
  t.barrier.value_epochs = static_cast<int>(kv.get_int("critic.value_epochs", 20));
  t.barrier.value_lr = kv.get_double("critic.value_lr", 3e-4);
  t.barrier.grad_clip = kv.get_double("critic.grad_clip", 1.0);
  t.critic_minibatch = static_cast<int>(kv.get_int("critic.minibatch", 256));
  const std::string design = kv.get_string("critic.design", "multi_head");
  if (design == "multi_head")
    t.multi_head_critic = true;
  else if (design == "single_head")
    t.multi_head_critic = false;
  else
    throw ConfigError("critic.design must be multi_head or single_head");

  t.hidden = kv.get_int_list("network.hidden", {64, 64});
  const std::string act = kv.get_string("network.activation", "leaky_relu");
  if (act == "leaky_relu")
    t.activation = Activation::LeakyRelu;
  else if (act == "tanh")
    t.activation = Activation::Tanh;
  else
    throw ConfigError("network.activation must be leaky_relu or tanh");
  t.leaky_slope = kv.get_double("network.leaky_slope", 0.01);
  t.init_log_std = kv.get_double("network.init_log_std", 0.0);

  if (kv.has("penalty.lambda")) {
    auto l = kv.get_double_list("penalty.lambda", {});
    t.penalty_lambda = Vec(static_cast<int>(l.size()));
    for (std::size_t i = 0; i < l.size(); ++i)
      t.penalty_lambda[static_cast<int>(i)] = l[i];
  }

  for (const auto& [key, value] : kv.entries()) {
    if (key.rfind("constraint.", 0) != 0) continue;
    const auto rest = key.substr(11);
    const auto dot = rest.rfind('.');
    if (dot == std::string::npos)
      throw ConfigError("constraint keys look like constraint.<name>.limit");
    const std::string name = rest.substr(0, dot);
    const std::string field = rest.substr(dot + 1);
    if (field == "limit")
      t.limit_overrides[name] = kv.get_double(key, 0.0);
    else if (field == "enabled") {
      if (!kv.get_bool(key, true)) t.disabled.insert(name);
    } else {
      throw ConfigError("unknown constraint field: " + key);
    }
  }
  if (kv.get_bool("constraints.disable_all", false))
    for (const auto& c : f.make()->constraint_specs()) t.disabled.insert(c.name);

  hc.dump_batch = kv.get_string("rollout.dump_batch", "");
  hc.checkpoint_every = static_cast<int>(kv.get_int("checkpoint.every", 0));
  return hc;
}

inline constexpr std::uint64_t kRunMagic = 0x314E55524C5242ULL;  // "BRLRUN1"

inline void save_run_checkpoint(const std::string& path,
                                const std::string& config_text,
                                const Trainer& trainer) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write checkpoint: " + path);
  io::write_pod(os, kRunMagic);
  io::write_string(os, config_text);
  trainer.save(os);
}

// Reads the embedded config; the returned stream is positioned at the
// trainer state for Trainer::load.
inline std::string read_run_checkpoint_config(std::ifstream& is,
                                              const std::string& path) {
  if (!is) throw std::runtime_error("cannot open checkpoint: " + path);
  if (io::read_pod<std::uint64_t>(is) != kRunMagic)
    throw std::runtime_error("not a run checkpoint: " + path);
  return io::read_string(is);
}

struct TrainResult {
  int exit_code = 0;
  std::string metrics_path;
  std::string final_checkpoint;
  std::vector<IterationReport> reports;
};

// Full training run: metrics.csv + timing.csv + periodic checkpoints +
// final checkpoint + summary.txt under out_dir.
inline TrainResult run_train(const KeyValueConfig& kv, const std::string& out_dir,
                             const std::optional<std::string>& resume = {},
                             bool quiet = false) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  HarnessConfig hc = build_harness_config(kv);
  const std::string config_text = kv.serialize();
  {
    std::ofstream os(out_dir + "/config.txt");
    os << config_text;
  }

  Trainer trainer(hc.trainer, hc.factory);
  if (resume) {
    std::ifstream is(*resume, std::ios::binary);
    read_run_checkpoint_config(is, *resume);
    trainer.load(is);
  }
  if (!hc.dump_batch.empty()) trainer.set_batch_dump(hc.dump_batch);

  TrainResult result;
  result.metrics_path = out_dir + "/metrics.csv";
  MetricsWriter metrics(result.metrics_path, trainer.reported_constraints());
  TimingWriter timing(out_dir + "/timing.csv");

  const int start = trainer.iteration();
  for (int it = start; it < hc.trainer.iterations; ++it) {
    IterationReport rep;
    try {
      rep = trainer.train_iteration();
    } catch (const NumericFailure& e) {
      save_run_checkpoint(out_dir + "/emergency.bin", config_text, trainer);
      std::fprintf(stderr, "numeric failure at iteration %d: %s\n", it, e.what());
      result.exit_code = 3;
      return result;
    }
    metrics.write(rep);
    timing.write(rep);
    result.reports.push_back(rep);
    if (!quiet && (it % 50 == 0 || it == hc.trainer.iterations - 1)) {
      double worst = 0.0;
      for (int k = 0; k < rep.j_c.size(); ++k)
        worst = std::max(worst, rep.j_c[k] - rep.d[k]);
      std::printf("iter %4d  reward %9.4f  kl %8.5f  accepted %d  worst_excess %9.4f\n",
                  it, rep.mean_reward, rep.kl, rep.accepted ? 1 : 0, worst);
    }
    if (hc.checkpoint_every > 0 && (it + 1) % hc.checkpoint_every == 0)
      save_run_checkpoint(out_dir + "/checkpoint_" + std::to_string(it + 1) + ".bin",
                          config_text, trainer);
  }

  result.final_checkpoint = out_dir + "/final.bin";
  save_run_checkpoint(result.final_checkpoint, config_text, trainer);
  if (!result.reports.empty()) {
    std::ofstream os(out_dir + "/summary.txt");
    os << summary_text(trainer.reported_constraints(), result.reports.back(),
                       hc.trainer.gamma);
    if (!quiet) std::printf("%s", summary_text(trainer.reported_constraints(),
                                               result.reports.back(),
                                               hc.trainer.gamma).c_str());
  }
  return result;
}

// Deterministic mean-action evaluation of a checkpointed policy.
inline int run_eval(const std::string& checkpoint_path, int episodes,
                    std::uint64_t seed) {
  std::ifstream is(checkpoint_path, std::ios::binary);
  const std::string config_text = read_run_checkpoint_config(is, checkpoint_path);
  KeyValueConfig kv = KeyValueConfig::parse(config_text, checkpoint_path);
  HarnessConfig hc = build_harness_config(kv);
  Trainer trainer(hc.trainer, hc.factory);
  trainer.load(is);

  auto env = hc.factory.make();
  Rng rng(seed);
  const auto& policy = trainer.policy();
  const int K = [&] {
    int n = 0;
    for (const auto& c : env->constraint_specs())
      if (c.kind != ConstraintKind::Symmetry) ++n;
    return n;
  }();
  Vec cost_mean = Vec::Zero(K);
  double reward_mean = 0.0;
  long steps = 0;
  for (int ep = 0; ep < episodes; ++ep) {
    Vec s = env->reset(rng);
    while (true) {
      Vec mean = policy.mean_net.output(s.transpose()).row(0);
      auto r = env->step(mean);
      reward_mean += r.reward;
      cost_mean += r.costs;
      ++steps;
      s = r.state;
      if (r.done) break;
    }
  }
  reward_mean /= static_cast<double>(steps);
  cost_mean /= static_cast<double>(steps);

  std::printf("checkpoint: %s (iteration %d)\n", checkpoint_path.c_str(),
              trainer.iteration());
  std::printf("episodes: %d  mean reward/step: %.6f\n", episodes, reward_mean);
  std::printf("%-20s %10s %10s %10s  %s\n", "constraint", "mean_cost", "J_C", "d",
              "satisfied");
  int k = 0;
  for (const auto& c : env->constraint_specs()) {
    if (c.kind == ConstraintKind::Symmetry) continue;
    const double jc = cost_mean[k] / (1.0 - hc.trainer.gamma);
    const double d = discounted_limit(c.limit, hc.trainer.gamma);
    std::printf("%-20s %10.4f %10.4f %10.4f  %s\n", c.name.c_str(), cost_mean[k],
                jc, d, jc <= d ? "yes" : "NO");
    ++k;
  }
  return 0;
}

struct SweepCell {
  double t = 0.0, alpha = 0.0;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  double final_reward = 0.0;
  double accept_rate = 0.0;
  std::vector<double> final_jc;
  std::vector<double> final_d;
};

inline double tail_mean_reward(const std::vector<IterationReport>& reports,
                               int window = 10) {
  const int n = static_cast<int>(reports.size());
  const int w = std::min(window, n);
  double acc = 0.0;
  for (int i = n - w; i < n; ++i) acc += reports[i].mean_reward;
  return acc / w;
}

// Grid sweep over the barrier steepness t and the threshold enlargement
// alpha, several seeds per cell, each sub-run fully isolated in its own
// directory. Cell failures are recorded and the sweep continues.
inline std::vector<SweepCell> run_sweep(const KeyValueConfig& base,
                                        const std::vector<double>& ts,
                                        const std::vector<double>& alphas,
                                        int seeds, const std::string& out_dir,
                                        bool quiet = true) {
  require(!ts.empty() && !alphas.empty() && seeds >= 1, "run_sweep: empty grid");
  for (double t : ts) require(t > 0.0, "run_sweep: t must be positive");
  for (double a : alphas) require(a > 0.0, "run_sweep: alpha must be positive");
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  const std::uint64_t base_seed =
      static_cast<std::uint64_t>(base.get_int("run.seed", 0));

  std::vector<SweepCell> cells;
  for (double t : ts) {
    for (double alpha : alphas) {
      for (int s = 0; s < seeds; ++s) {
        SweepCell cell;
        cell.t = t;
        cell.alpha = alpha;
        cell.seed = base_seed + static_cast<std::uint64_t>(s);
        KeyValueConfig kv = base;
        kv.set_double("barrier.t", t);
        kv.set_double("barrier.alpha", alpha);
        kv.set("run.seed", std::to_string(cell.seed));
        std::ostringstream dir;
        dir << out_dir << "/t" << t << "_a" << alpha << "_s" << cell.seed;
        try {
          auto res = run_train(kv, dir.str(), {}, quiet);
          if (res.exit_code != 0) throw std::runtime_error("nonzero exit");
          cell.ok = true;
          cell.final_reward = tail_mean_reward(res.reports);
          int accepted = 0;
          for (const auto& r : res.reports) accepted += r.accepted ? 1 : 0;
          cell.accept_rate =
              static_cast<double>(accepted) / std::max<std::size_t>(1, res.reports.size());
          const auto& last = res.reports.back();
          for (int k = 0; k < last.j_c.size(); ++k) {
            cell.final_jc.push_back(last.j_c[k]);
            cell.final_d.push_back(last.d[k]);
          }
        } catch (const std::exception& e) {
          cell.ok = false;
          cell.error = e.what();
        }
        cells.push_back(std::move(cell));
      }
    }
  }

  std::ofstream os(out_dir + "/sweep.csv");
  os << "t,alpha,seed,ok,final_reward,accept_rate";
  std::size_t width = 0;
  for (const auto& c : cells) width = std::max(width, c.final_jc.size());
  for (std::size_t k = 0; k < width; ++k) os << ",jc_" << k << ",d_" << k;
  os << "\n";
  for (const auto& c : cells) {
    os << c.t << "," << c.alpha << "," << c.seed << "," << (c.ok ? 1 : 0) << ",";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g,%.17g", c.final_reward, c.accept_rate);
    os << buf;
    for (std::size_t k = 0; k < width; ++k) {
      if (k < c.final_jc.size()) {
        std::snprintf(buf, sizeof buf, ",%.17g,%.17g", c.final_jc[k], c.final_d[k]);
        os << buf;
      } else {
        os << ",,";
      }
    }
    os << "\n";
  }
  return cells;
}

struct CompareResult {
  std::vector<SweepCell> modes;           // one entry per mode run
  std::vector<std::pair<int, double>> timing;  // (K, median policy_step_ms)
};

inline double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Side-by-side constrained vs penalty run on identical seeds, plus a
// policy-step timing table across constraint counts.
inline CompareResult run_compare(const KeyValueConfig& base,
                                 const std::vector<int>& ks,
                                 const std::string& out_dir, bool quiet = true) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  CompareResult result;

  for (const std::string mode : {"constrained", "penalty"}) {
    KeyValueConfig kv = base;
    kv.set("run.mode", mode);
    SweepCell cell;
    cell.seed = static_cast<std::uint64_t>(kv.get_int("run.seed", 0));
    try {
      auto res = run_train(kv, out_dir + "/" + mode, {}, quiet);
      if (res.exit_code != 0) throw std::runtime_error("nonzero exit");
      cell.ok = true;
      cell.final_reward = tail_mean_reward(res.reports);
      const auto& last = res.reports.back();
      for (int k = 0; k < last.j_c.size(); ++k) {
        cell.final_jc.push_back(last.j_c[k]);
        cell.final_d.push_back(last.d[k]);
      }
    } catch (const std::exception& e) {
      cell.ok = false;
      cell.error = e.what();
    }
    result.modes.push_back(std::move(cell));
  }

  // timing: identical batch and network, only the constraint count varies
  const int timing_iters =
      static_cast<int>(base.get_int("compare.timing_iterations", 15));
  for (int K : ks) {
    KeyValueConfig kv = base;
    kv.set("run.mode", "constrained");
    kv.set("env.name", "point_mass");
    kv.set("env.num_channels", std::to_string(K));
    kv.set("env.with_symmetry", "false");
    kv.set("run.iterations", std::to_string(timing_iters));
    HarnessConfig hc = build_harness_config(kv);
    Trainer trainer(hc.trainer, hc.factory);
    std::vector<double> times;
    for (int it = 0; it < timing_iters; ++it)
      times.push_back(trainer.train_iteration().policy_step_ms);
    result.timing.emplace_back(K, median(times));
  }

  std::ofstream os(out_dir + "/compare.csv");
  os << "mode,ok,final_reward";
  std::size_t width = 0;
  for (const auto& c : result.modes) width = std::max(width, c.final_jc.size());
  for (std::size_t k = 0; k < width; ++k) os << ",jc_" << k << ",d_" << k;
  os << "\n";
  int mi = 0;
  for (const auto& c : result.modes) {
    os << (mi++ == 0 ? "constrained" : "penalty") << "," << (c.ok ? 1 : 0) << ","
       << c.final_reward;
    for (std::size_t k = 0; k < c.final_jc.size(); ++k)
      os << "," << c.final_jc[k] << "," << c.final_d[k];
    os << "\n";
  }
  std::ofstream ts(out_dir + "/timing_by_k.csv");
  ts << "K,median_policy_step_ms\n";
  for (auto [K, ms] : result.timing) ts << K << "," << ms << "\n";
  return result;
}

}  // namespace brl
