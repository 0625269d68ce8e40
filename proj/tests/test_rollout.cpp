#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "brl/rollout.hpp"

using namespace brl;

namespace {

// Deterministic stub: state is (env_tag, step_counter). Reward encodes the
// position in the stream so ordering bugs are visible. Cost channel 0 is a
// configurable constant, channel 1 is a coin flipped at reset.
class StubEnv : public Env {
 public:
  StubEnv(double tag, int episode_steps, double cost0)
      : tag_(tag), episode_steps_(episode_steps), cost0_(cost0) {}

  int obs_dim() const override { return 2; }
  int act_dim() const override { return 1; }
  int episode_steps() const override { return episode_steps_; }
  double dt() const override { return 0.05; }

  Vec reset(Rng& rng) override {
    t_ = 0;
    coin_ = rng.uniform() < 0.5 ? 1.0 : 0.0;
    Vec s(2);
    s << tag_, 0.0;
    return s;
  }

  StepResult step(const Vec& action) override {
    require(action.allFinite(), "StubEnv: non-finite action");
    ++t_;
    StepResult r;
    r.state = Vec(2);
    r.state << tag_, static_cast<double>(t_);
    r.reward = tag_ * 1000.0 + t_;
    r.costs = Vec(2);
    r.costs << cost0_, coin_;
    r.done = t_ >= episode_steps_;
    r.time_limit = r.done;
    return r;
  }

  std::vector<ConstraintSpec> constraint_specs() const override {
    return {{0, "c0", ConstraintKind::Average, 1.0, 1, true},
            {1, "coin", ConstraintKind::Probabilistic, 0.5, 1, true}};
  }

 private:
  double tag_;
  int episode_steps_;
  double cost0_;
  int t_ = 0;
  double coin_ = 0.0;
};

struct Setup {
  GaussianPolicy policy;
  Mlp value_net;
  CostCritic cost_critic;
  EnvPool pool;

  Setup(int n_envs, int episode_steps, double cost0, std::uint64_t seed) {
    Rng rng(123);
    MlpSpec pspec;
    pspec.layer_widths = {2, 8, 1};
    // single hidden layer is below the Mlp minimum; use two
    pspec.layer_widths = {2, 8, 8, 1};
    policy = GaussianPolicy(pspec, -0.3);
    policy.init(rng);

    MlpSpec vspec;
    vspec.layer_widths = {2, 8, 8, 1};
    value_net = Mlp(vspec);
    value_net.init(rng, std::sqrt(2.0), 1.0);

    cost_critic = CostCritic::make({8, 8}, 2, 2, true, Activation::LeakyRelu,
                                   0.01, rng);

    for (int e = 0; e < n_envs; ++e)
      pool.envs.push_back(std::make_unique<StubEnv>(e + 1, episode_steps, cost0));
    pool.seed(seed);
  }
};

}  // namespace

TEST_CASE("collect produces total_steps transitions in env-major order") {
  Setup s(2, 5, 0.0, 10);
  auto batch = collect(s.policy, s.pool, 10, s.value_net, &s.cost_critic);
  REQUIRE(batch.size() == 10);
  CHECK(batch.num_envs == 2);
  CHECK(batch.steps_per_env == 5);
  for (int row = 0; row < 10; ++row) {
    const int env_tag = row / 5 + 1;
    const int t = row % 5 + 1;
    CHECK(batch.rewards[row] == Catch::Approx(env_tag * 1000.0 + t));
  }
  CHECK_THROWS_AS(collect(s.policy, s.pool, 11, s.value_net, &s.cost_critic),
                  ContractViolation);
}

TEST_CASE("collect is deterministic under the same seed") {
  Setup a(3, 4, 0.25, 99);
  auto b1 = collect(a.policy, a.pool, 24, a.value_net, &a.cost_critic);
  Setup b(3, 4, 0.25, 99);
  auto b2 = collect(b.policy, b.pool, 24, b.value_net, &b.cost_critic);
  CHECK((b1.actions - b2.actions).lpNorm<Eigen::Infinity>() == 0.0);
  CHECK((b1.states - b2.states).lpNorm<Eigen::Infinity>() == 0.0);
  CHECK((b1.log_probs_old - b2.log_probs_old).lpNorm<Eigen::Infinity>() == 0.0);
  CHECK((b1.costs - b2.costs).lpNorm<Eigen::Infinity>() == 0.0);

  Setup c(3, 4, 0.25, 100);  // different seed, different actions
  auto b3 = collect(c.policy, c.pool, 24, c.value_net, &c.cost_critic);
  CHECK((b1.actions - b3.actions).lpNorm<Eigen::Infinity>() > 0.0);
}

TEST_CASE("stored log probs are recomputable from state and action") {
  Setup s(2, 6, 0.1, 7);
  auto batch = collect(s.policy, s.pool, 12, s.value_net, &s.cost_critic);
  auto fwd = policy_forward(s.policy, batch.states);
  Vec lp = log_prob(fwd.means, fwd.std, batch.actions);
  CHECK((lp - batch.log_probs_old).lpNorm<Eigen::Infinity>() < 1e-12);
}

TEST_CASE("batch values match the critics") {
  Setup s(2, 5, 0.0, 3);
  auto batch = collect(s.policy, s.pool, 10, s.value_net, &s.cost_critic);
  CHECK((batch.values - s.value_net.output(batch.states).col(0))
            .lpNorm<Eigen::Infinity>() == 0.0);
  CHECK((batch.cost_values - s.cost_critic.predict(batch.states))
            .lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("time limits bootstrap with the critic value of the cut state") {
  Setup s(1, 4, 0.0, 5);
  auto batch = collect(s.policy, s.pool, 8, s.value_net, &s.cost_critic);
  // episodes of length 4 end at rows 3 and 7 with time_limit
  for (int row : {3, 7}) {
    CHECK(batch.dones[row] == 1);
    CHECK(batch.time_limits[row] == 1);
    Vec cut_state(2);
    cut_state << 1.0, 4.0;
    const double expect = s.value_net.output(cut_state.transpose())(0, 0);
    CHECK(batch.bootstrap_values[row] == Catch::Approx(expect).margin(1e-14));
  }
  CHECK(batch.bootstrap_values[0] == 0.0);
}

TEST_CASE("a segment shorter than the episode records a cut bootstrap") {
  Setup s(1, 10, 0.0, 6);
  auto batch = collect(s.policy, s.pool, 6, s.value_net, &s.cost_critic);
  CHECK(batch.dones[5] == 0);
  CHECK(batch.bootstrap_values[5] != 0.0);
}

TEST_CASE("estimate_Jc on constant and zero costs") {
  Setup s(2, 5, 0.025, 8);
  auto batch = collect(s.policy, s.pool, 10, s.value_net, &s.cost_critic);
  CHECK(estimate_Jc(batch, 0, 0.99) == Catch::Approx(2.5).epsilon(1e-12));

  Setup z(2, 5, 0.0, 8);
  auto zb = collect(z.policy, z.pool, 10, z.value_net, &z.cost_critic);
  CHECK(estimate_Jc(zb, 0, 0.99) == 0.0);
}

TEST_CASE("estimate_Jc matches the violation fraction of indicator costs") {
  Setup s(16, 25, 0.0, 21);
  auto batch = collect(s.policy, s.pool, 400, s.value_net, &s.cost_critic);
  // channel 1 is a fair coin per episode; empirical fraction p
  const double p = batch.costs.col(1).mean();
  CHECK(estimate_Jc(batch, 1, 0.99) == Catch::Approx(p / 0.01).epsilon(1e-12));
  CHECK(estimate_Jc(batch, 1, 0.99) * (1.0 - 0.99) ==
        Catch::Approx(batch.costs.col(1).mean()).margin(1e-15));
  CHECK(estimate_Jc(batch, 1, 0.99) >= 0.0);
  CHECK(estimate_Jc(batch, 1, 0.99) <= 1.0 / (1.0 - 0.99));
  CHECK(p == Catch::Approx(0.5).margin(0.3));
}

TEST_CASE("build_advantages normalizations") {
  Setup s(4, 8, 0.3, 17);
  auto batch = collect(s.policy, s.pool, 32, s.value_net, &s.cost_critic);
  auto adv = build_advantages(batch, 0.99, 0.97);
  CHECK(std::abs(adv.adv_r.mean()) < 1e-10);
  CHECK(std::abs(adv.adv_r.squaredNorm() / adv.adv_r.size() - 1.0) < 1e-10);
  for (int k = 0; k < 2; ++k)
    CHECK(std::abs(adv.adv_c.col(k).mean()) < 1e-10);
  CHECK(adv.j_c[0] == Catch::Approx(estimate_Jc(batch, 0, 0.99)));
  // regression targets are the un-normalized adv + values
  auto raw = gae(batch.rewards.segment(0, 8), batch.values.segment(0, 8),
                 Vec(batch.bootstrap_values.segment(0, 8)), 0.99, 0.97,
                 {batch.dones.begin(), batch.dones.begin() + 8},
                 {batch.time_limits.begin(), batch.time_limits.begin() + 8});
  CHECK((adv.ret_r.segment(0, 8) - raw.ret).lpNorm<Eigen::Infinity>() < 1e-12);
}

TEST_CASE("batch dump writes one row per transition") {
  Setup s(2, 3, 0.5, 2);
  auto batch = collect(s.policy, s.pool, 6, s.value_net, &s.cost_critic);
  const std::string path = "/tmp/brl_test_dump.txt";
  dump_batch(batch, path);
  std::FILE* f = std::fopen(path.c_str(), "r");
  REQUIRE(f != nullptr);
  int lines = 0;
  char buf[4096];
  while (std::fgets(buf, sizeof buf, f) != nullptr) ++lines;
  std::fclose(f);
  CHECK(lines == 7);  // header + 6 transitions
  std::remove(path.c_str());
}
