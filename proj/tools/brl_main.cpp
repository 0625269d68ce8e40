// Command-line entry point: train / eval / sweep / compare.

#include <CLI11.hpp>
#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include "brl/run.hpp"

namespace {

brl::KeyValueConfig load_config(const std::string& path, long seed_override,
                                bool has_seed) {
  auto kv = brl::KeyValueConfig::parse_file(path);
  kv.apply_env_overrides();
  if (has_seed) kv.set("run.seed", std::to_string(seed_override));
  return kv;
}

std::vector<double> parse_doubles(const std::string& csv) {
  return brl::KeyValueConfig::parse("x = " + csv).get_double_list("x", {});
}

std::vector<int> parse_ints(const std::string& csv) {
  return brl::KeyValueConfig::parse("x = " + csv).get_int_list("x", {});
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"constrained policy optimization with log-barrier trust-region steps"};
  app.require_subcommand(1);

  std::string config_path, out_dir = "out", checkpoint_path, resume_path;
  long seed = 0;
  int episodes = 20;
  std::string t_list = "10,100,1000", alpha_list = "0.02,0.2", k_list = "1,5,10";
  int sweep_seeds = 3;

  auto* train = app.add_subcommand("train", "train a policy from a config file");
  train->add_option("--config", config_path, "config file")->required();
  auto* seed_opt = train->add_option("--seed", seed, "override run.seed");
  train->add_option("--out", out_dir, "output directory");
  train->add_option("--resume", resume_path, "checkpoint to resume from");

  auto* eval = app.add_subcommand("eval", "evaluate a checkpointed policy");
  eval->add_option("--checkpoint", checkpoint_path, "run checkpoint")->required();
  eval->add_option("--episodes", episodes, "episode count");
  eval->add_option("--seed", seed, "evaluation seed");

  auto* sweep = app.add_subcommand("sweep", "grid sweep over t and alpha");
  sweep->add_option("--config", config_path, "config file")->required();
  sweep->add_option("--t", t_list, "comma-separated t values");
  sweep->add_option("--alpha", alpha_list, "comma-separated alpha values");
  sweep->add_option("--seeds", sweep_seeds, "seeds per cell");
  sweep->add_option("--out", out_dir, "output directory");

  auto* compare = app.add_subcommand("compare",
                                     "constrained vs penalty, plus step timing by K");
  compare->add_option("--config", config_path, "config file")->required();
  compare->add_option("--ks", k_list, "comma-separated constraint counts");
  compare->add_option("--out", out_dir, "output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) {
      auto kv = load_config(config_path, seed, seed_opt->count() > 0);
      std::optional<std::string> resume;
      if (!resume_path.empty()) resume = resume_path;
      return brl::run_train(kv, out_dir, resume).exit_code;
    }
    if (eval->parsed()) {
      return brl::run_eval(checkpoint_path, episodes,
                           static_cast<std::uint64_t>(seed));
    }
    if (sweep->parsed()) {
      auto kv = load_config(config_path, 0, false);
      auto cells = brl::run_sweep(kv, parse_doubles(t_list),
                                  parse_doubles(alpha_list), sweep_seeds, out_dir,
                                  /*quiet=*/false);
      int failures = 0;
      for (const auto& c : cells) {
        if (!c.ok) {
          ++failures;
          std::fprintf(stderr, "cell t=%g alpha=%g seed=%llu failed: %s\n", c.t,
                       c.alpha, static_cast<unsigned long long>(c.seed),
                       c.error.c_str());
        }
      }
      std::printf("sweep finished: %zu cells, %d failed; results in %s/sweep.csv\n",
                  cells.size(), failures, out_dir.c_str());
      return 0;
    }
    if (compare->parsed()) {
      auto kv = load_config(config_path, 0, false);
      auto res = brl::run_compare(kv, parse_ints(k_list), out_dir,
                                  /*quiet=*/false);
      std::printf("%-12s %-4s %-14s constraints\n", "mode", "ok", "final_reward");
      int mi = 0;
      for (const auto& m : res.modes) {
        std::printf("%-12s %-4d %-14.5f ", mi++ == 0 ? "constrained" : "penalty",
                    m.ok ? 1 : 0, m.final_reward);
        for (std::size_t k = 0; k < m.final_jc.size(); ++k)
          std::printf("jc=%.3f/d=%.3f ", m.final_jc[k], m.final_d[k]);
        std::printf("%s\n", m.error.c_str());
      }
      std::printf("policy step timing:\n");
      for (auto [K, ms] : res.timing)
        std::printf("  K=%-3d median %.3f ms\n", K, ms);
      return 0;
    }
  } catch (const brl::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
