#include <catch2/catch_amalgamated.hpp>
#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "brl/run.hpp"

using namespace brl;
namespace fs = std::filesystem;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  REQUIRE(is);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

KeyValueConfig tiny_run_config(int iterations, const std::string& extra = "") {
  return KeyValueConfig::parse(
      "env.name = point_mass\n"
      "run.iterations = " + std::to_string(iterations) + "\n"
      "run.seed = 0\n"
      "rollout.envs = 4\n"
      "rollout.steps_per_env = 20\n"
      "critic.value_epochs = 3\n" +
      extra);
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name)
      : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string str() const { return path.string(); }
};

}  // namespace

TEST_CASE("config parse, types, and diagnostics") {
  auto kv = KeyValueConfig::parse(
      "# comment\n"
      "barrier.t = 100\n"
      "run.mode = constrained\n"
      "network.hidden = 64, 64\n"
      "flag = true\n");
  CHECK(kv.get_double("barrier.t", 0) == 100.0);
  CHECK(kv.get_string("run.mode", "") == "constrained");
  CHECK(kv.get_int_list("network.hidden", {}) == std::vector<int>{64, 64});
  CHECK(kv.get_bool("flag", false));
  CHECK(kv.get_double("missing", 7.5) == 7.5);

  CHECK_THROWS_AS(KeyValueConfig::parse("no equals sign here"), ConfigError);
  try {
    KeyValueConfig::parse("a = 1\nbroken line\n", "test.cfg");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("test.cfg:2") != std::string::npos);
  }
  CHECK_THROWS_AS(kv.get_double("run.mode", 0.0), ConfigError);
  CHECK_THROWS_AS(kv.get_int("run.mode", 0), ConfigError);
}

TEST_CASE("config serialize round-trip is a fixed point") {
  auto kv = KeyValueConfig::parse(
      "zeta.last = 1\n"
      "alpha.first = hello world\n"
      "mid.val = 3.25\n");
  const std::string once = kv.serialize();
  const std::string twice = KeyValueConfig::parse(once).serialize();
  CHECK(once == twice);
  // sorted by key
  CHECK(once.find("alpha.first") < once.find("mid.val"));
  CHECK(once.find("mid.val") < once.find("zeta.last"));
}

TEST_CASE("environment variable overrides") {
  auto kv = KeyValueConfig::parse("barrier.t = 100\n");
  ::setenv("BRL_barrier__t", "55", 1);
  ::setenv("BRL_run__seed", "9", 1);
  kv.apply_env_overrides();
  ::unsetenv("BRL_barrier__t");
  ::unsetenv("BRL_run__seed");
  CHECK(kv.get_double("barrier.t", 0) == 55.0);
  CHECK(kv.get_int("run.seed", 0) == 9);  // added, not just overridden
}

TEST_CASE("harness config defaults and overrides") {
  auto kv = KeyValueConfig::parse(
      "env.name = point_mass\n"
      "constraint.effort.limit = 0.8\n"
      "constraint.speed_overshoot.enabled = false\n"
      "critic.design = single_head\n");
  auto hc = build_harness_config(kv);
  CHECK(hc.trainer.limit_overrides.at("effort") == 0.8);
  CHECK(hc.trainer.disabled.count("speed_overshoot") == 1);
  CHECK_FALSE(hc.trainer.multi_head_critic);
  CHECK(hc.trainer.barrier.t == 100.0);
  CHECK(hc.trainer.steps_per_env == 80);  // env episode length

  CHECK_THROWS_AS(
      build_harness_config(KeyValueConfig::parse("run.mode = bogus\n")),
      ConfigError);
  CHECK_THROWS_AS(
      build_harness_config(KeyValueConfig::parse("critic.design = bogus\n")),
      ConfigError);
}

TEST_CASE("train with zero iterations writes a header-only metrics file") {
  TempDir dir("brl_zero_iters");
  auto kv = tiny_run_config(0);
  auto res = run_train(kv, dir.str(), {}, /*quiet=*/true);
  CHECK(res.exit_code == 0);
  std::ifstream is(res.metrics_path);
  REQUIRE(is);
  std::string header, extra;
  CHECK(std::getline(is, header));
  CHECK(header.rfind("iter,mean_reward,jc_position_box", 0) == 0);
  CHECK_FALSE(std::getline(is, extra));
}

TEST_CASE("same config and seed give byte-identical metrics") {
  TempDir dir("brl_determinism");
  auto kv = tiny_run_config(3);
  auto r1 = run_train(kv, dir.str() + "/a", {}, true);
  auto r2 = run_train(kv, dir.str() + "/b", {}, true);
  REQUIRE(r1.exit_code == 0);
  REQUIRE(r2.exit_code == 0);
  CHECK(read_file(r1.metrics_path) == read_file(r2.metrics_path));

  auto kv2 = tiny_run_config(3);
  kv2.set("run.seed", "1");
  auto r3 = run_train(kv2, dir.str() + "/c", {}, true);
  CHECK(read_file(r1.metrics_path) != read_file(r3.metrics_path));
}

TEST_CASE("metrics re-parse reproduces every field to full precision") {
  TempDir dir("brl_metrics_roundtrip");
  auto kv = tiny_run_config(3);
  auto res = run_train(kv, dir.str(), {}, true);
  auto table = parse_metrics(res.metrics_path);
  REQUIRE(table.rows.size() == res.reports.size());
  REQUIRE(table.constraint_names.size() == 5);
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& row = table.rows[i];
    const auto& rep = res.reports[i];
    CHECK(row.iter == rep.iter);
    CHECK(row.mean_reward == rep.mean_reward);
    CHECK(row.kl == rep.kl);
    CHECK(row.objective_before == rep.objective_before);
    CHECK(row.objective_after == rep.objective_after);
    CHECK(row.accepted == rep.accepted);
    CHECK(row.backtracks == rep.backtracks);
    for (int k = 0; k < rep.j_c.size(); ++k) {
      CHECK(row.j_c[k] == rep.j_c[k]);
      CHECK(row.d_i[k] == rep.d_i[k]);
    }
    for (int k = 0; k < rep.barrier_margins.size(); ++k)
      CHECK(row.margins[k] == rep.barrier_margins[k]);
  }
}

TEST_CASE("checkpoint resume reproduces the unbroken run exactly") {
  TempDir dir("brl_resume");
  auto kv = tiny_run_config(6, "checkpoint.every = 3\n");
  auto full = run_train(kv, dir.str() + "/full", {}, true);
  REQUIRE(full.exit_code == 0);

  auto resumed = run_train(kv, dir.str() + "/resumed",
                           dir.str() + "/full/checkpoint_3.bin", true);
  REQUIRE(resumed.exit_code == 0);
  REQUIRE(resumed.reports.size() == 3);

  auto full_table = parse_metrics(full.metrics_path);
  auto res_table = parse_metrics(resumed.metrics_path);
  REQUIRE(full_table.rows.size() == 6);
  for (int i = 0; i < 3; ++i) {
    const auto& a = full_table.rows[3 + i];
    const auto& b = res_table.rows[i];
    CHECK(a.iter == b.iter);
    CHECK(a.mean_reward == b.mean_reward);
    CHECK(a.kl == b.kl);
    CHECK(a.objective_after == b.objective_after);
    for (std::size_t k = 0; k < a.j_c.size(); ++k) CHECK(a.j_c[k] == b.j_c[k]);
  }
  // final parameters agree bitwise
  CHECK(read_file(full.final_checkpoint) == read_file(resumed.final_checkpoint));
}

TEST_CASE("eval runs from a self-contained checkpoint") {
  TempDir dir("brl_eval");
  auto kv = tiny_run_config(2);
  auto res = run_train(kv, dir.str(), {}, true);
  REQUIRE(res.exit_code == 0);
  CHECK(run_eval(res.final_checkpoint, 2, 0) == 0);
}

TEST_CASE("trainer checkpoint round-trips through save and load") {
  auto kv = tiny_run_config(2);
  auto hc = build_harness_config(kv);
  Trainer a(hc.trainer, hc.factory);
  a.train_iteration();
  std::stringstream buf;
  a.save(buf);

  Trainer b(hc.trainer, hc.factory);
  b.load(buf);
  CHECK(b.iteration() == 1);
  CHECK((a.policy().flatten() - b.policy().flatten()).lpNorm<Eigen::Infinity>() ==
        0.0);
  auto ra = a.train_iteration();
  auto rb = b.train_iteration();
  CHECK(ra.mean_reward == rb.mean_reward);
  CHECK(ra.kl == rb.kl);
}

TEST_CASE("batch dump is written when configured") {
  TempDir dir("brl_dump");
  auto kv = tiny_run_config(1, "rollout.dump_batch = " + dir.str() + "/batch.txt\n");
  auto res = run_train(kv, dir.str(), {}, true);
  REQUIRE(res.exit_code == 0);
  CHECK(fs::exists(dir.path / "batch.txt"));
  std::ifstream is(dir.path / "batch.txt");
  std::string header;
  std::getline(is, header);
  CHECK(header.rfind("env step s0", 0) == 0);
}

TEST_CASE("reward-only mode still reports constraint estimates") {
  TempDir dir("brl_reward_only");
  auto kv = tiny_run_config(2, "run.mode = reward_only\n");
  auto res = run_train(kv, dir.str(), {}, true);
  REQUIRE(res.exit_code == 0);
  const auto& rep = res.reports.back();
  CHECK(rep.j_c.size() == 5);  // monitored, not enforced
  CHECK(rep.barrier_margins.size() == 0);
}

TEST_CASE("penalty mode subtracts weighted costs from the reward signal") {
  TempDir dir("brl_penalty");
  auto kv = tiny_run_config(2,
                            "run.mode = penalty\n"
                            "penalty.lambda = 1, 1, 1, 0.1\n");
  auto res = run_train(kv, dir.str(), {}, true);
  REQUIRE(res.exit_code == 0);
  CHECK(res.reports.back().j_c.size() == 5);

  auto bad = tiny_run_config(2,
                             "run.mode = penalty\n"
                             "penalty.lambda = 1, 1\n");
  CHECK_THROWS_AS(run_train(bad, dir.str() + "/bad", {}, true),
                  ContractViolation);
}

TEST_CASE("accepted steps on the point mass satisfy the report invariants") {
  auto kv = tiny_run_config(0);
  auto hc = build_harness_config(kv);
  hc.trainer.iterations = 8;
  Trainer trainer(hc.trainer, hc.factory);
  int accepted = 0;
  for (int it = 0; it < 8; ++it) {
    auto rep = trainer.train_iteration();  // train_iteration asserts too
    if (rep.accepted) {
      ++accepted;
      CHECK(rep.kl <= hc.trainer.barrier.delta * (1.0 + 1e-6));
      CHECK(rep.kl > 0.0);
      for (int k = 0; k < rep.barrier_margins.size(); ++k)
        CHECK(rep.barrier_margins[k] > 0.0);
      CHECK(rep.objective_after > rep.objective_before);
    }
    REQUIRE(rep.j_c.size() == 5);
    REQUIRE(rep.d_i.size() == 5);
  }
  CHECK(accepted > 0);
}

TEST_CASE("sweep produces one isolated sub-run per grid cell and seed") {
  TempDir dir("brl_sweep");
  auto kv = tiny_run_config(2);
  auto cells = run_sweep(kv, {10.0, 100.0, 1000.0}, {0.02}, 1, dir.str());
  REQUIRE(cells.size() == 3);
  for (const auto& c : cells) {
    CHECK(c.ok);
    CHECK(c.final_jc.size() == 5);
  }
  CHECK(fs::exists(dir.path / "sweep.csv"));
  CHECK(fs::exists(dir.path / "t10_a0.02_s0" / "metrics.csv"));
  CHECK(fs::exists(dir.path / "t1000_a0.02_s0" / "metrics.csv"));
  CHECK_THROWS_AS(run_sweep(kv, {-1.0}, {0.02}, 1, dir.str()),
                  ContractViolation);
  CHECK_THROWS_AS(run_sweep(kv, {10.0}, {}, 1, dir.str()), ContractViolation);
}

TEST_CASE("summary file lists one row per constraint") {
  TempDir dir("brl_summary");
  auto kv = tiny_run_config(2);
  auto res = run_train(kv, dir.str(), {}, true);
  REQUIRE(res.exit_code == 0);
  const std::string summary = read_file(dir.str() + "/summary.txt");
  for (const char* name :
       {"position_box", "actuation", "speed_overshoot", "effort", "symmetry"})
    CHECK(summary.find(name) != std::string::npos);
}
