#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "brl/gae.hpp"
#include "brl/trpo.hpp"

using namespace brl;

namespace {

struct StepFixture {
  GaussianPolicy policy;
  LossBatch batch;

  StepFixture(int n, unsigned seed, int K) {
    Rng rng(seed);
    MlpSpec spec;
    spec.layer_widths = {3, 16, 16, 2};
    policy = GaussianPolicy(spec, 0.0);
    policy.init(rng);

    batch.states = Mat(n, 3);
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < 3; ++c) batch.states(r, c) = rng.normal();
    auto fwd = policy_forward(policy, batch.states);
    batch.actions = Mat(n, 2);
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < 2; ++c)
        batch.actions(r, c) = fwd.means(r, c) + fwd.std[c] * rng.normal();
    batch.log_probs_old = log_prob(fwd.means, fwd.std, batch.actions);
    batch.means_old = fwd.means;
    batch.std_old = fwd.std;

    Vec raw(n);
    for (int i = 0; i < n; ++i) raw[i] = rng.normal() + 0.5 * batch.actions(i, 0);
    batch.adv_r = standardize(raw);

    batch.adv_c = Mat(n, K);
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < K; ++c)
        batch.adv_c(r, c) = rng.normal() - 0.3 * batch.actions(r, c % 2);
    for (int c = 0; c < K; ++c)
      batch.adv_c.col(c) = zero_mean(batch.adv_c.col(c));

    batch.j_c = Vec(K);
    batch.thresholds = Vec(K);
    for (int k = 0; k < K; ++k) {
      batch.j_c[k] = 2.0 + 0.5 * k;
      batch.thresholds[k] =
          adaptive_threshold(batch.j_c[k], 1.5, 0.02, 1e-4);
    }
    batch.barrier_t = 100.0;
    batch.entropy_coef = 0.05;
    batch.one_minus_gamma = 0.01;
  }
};

}  // namespace

#include "brl/barrier.hpp"

TEST_CASE("stationary point: zero advantages and no constraints reject the step") {
  StepFixture f(32, 80, 0);
  f.batch.adv_r.setZero();
  f.batch.entropy_coef = 0.0;
  Vec theta0 = f.policy.flatten();
  auto out = policy_step(f.policy, f.batch, BarrierConfig{});
  CHECK_FALSE(out.accepted);
  CHECK((f.policy.flatten() - theta0).lpNorm<Eigen::Infinity>() == 0.0);
  CHECK(out.kl == 0.0);
  CHECK(out.objective_after == out.objective_before);
  CHECK_FALSE(out.note.empty());
}

TEST_CASE("zero-constraint barrier step equals the reward-only step bitwise") {
  StepFixture a(64, 81, 0);
  StepFixture b(64, 81, 0);
  BarrierConfig cfg;
  auto out_barrier = policy_step(a.policy, a.batch, cfg);
  auto out_reference = reward_only_step(b.policy, b.batch, cfg);
  CHECK(out_barrier.accepted == out_reference.accepted);
  CHECK(out_barrier.backtracks == out_reference.backtracks);
  CHECK(out_barrier.kl == out_reference.kl);
  CHECK(out_barrier.objective_before == out_reference.objective_before);
  CHECK(out_barrier.objective_after == out_reference.objective_after);
  CHECK((a.policy.flatten() - b.policy.flatten()).lpNorm<Eigen::Infinity>() ==
        0.0);
}

TEST_CASE("accepted steps respect the trust region and the barrier domain") {
  for (unsigned seed : {82u, 83u, 84u}) {
    StepFixture f(96, seed, 2);
    BarrierConfig cfg;
    Vec theta0 = f.policy.flatten();
    auto out = policy_step(f.policy, f.batch, cfg);
    if (!out.accepted) {
      CHECK((f.policy.flatten() - theta0).lpNorm<Eigen::Infinity>() == 0.0);
      continue;
    }
    CHECK(out.kl <= cfg.delta * (1.0 + 1e-6));
    CHECK(out.kl > 0.0);
    for (int k = 0; k < out.margins.size(); ++k) CHECK(out.margins[k] > 0.0);
    CHECK(out.objective_after > out.objective_before);
    CHECK((f.policy.flatten() - theta0).lpNorm<Eigen::Infinity>() > 0.0);
    // the achieved KL should come close to the radius on a full step
    if (out.backtracks == 0) CHECK(out.kl > cfg.delta * 0.2);
  }
}

TEST_CASE("rejected line searches restore the policy") {
  // a huge trust region with a single candidate overshoots the surrogate's
  // region of validity, so the only tried step lowers the objective
  StepFixture f(48, 85, 0);
  BarrierConfig cfg;
  cfg.max_backtracks = 0;
  cfg.delta = 1e4;
  f.batch.entropy_coef = 0.0;
  Vec theta0 = f.policy.flatten();
  auto out = policy_step(f.policy, f.batch, cfg);
  CHECK_FALSE(out.accepted);
  CHECK(out.backtracks == cfg.max_backtracks + 1);
  CHECK((f.policy.flatten() - theta0).lpNorm<Eigen::Infinity>() == 0.0);
  CHECK(out.note == "line search exhausted");
}

TEST_CASE("policy_step demands feasible thresholds") {
  StepFixture f(32, 86, 1);
  f.batch.thresholds[0] = f.batch.j_c[0] - 0.5;  // infeasible at origin
  CHECK_THROWS_AS(policy_step(f.policy, f.batch, BarrierConfig{}),
                  std::logic_error);
}

TEST_CASE("tight feasibility margins force backtracking") {
  StepFixture f(64, 87, 1);
  // strong pressure against the constraint: advantages aligned with costs
  f.batch.adv_c.col(0) = zero_mean(-3.0 * f.batch.adv_r);
  f.batch.thresholds[0] = f.batch.j_c[0] + 1e-3;
  BarrierConfig cfg;
  auto out = policy_step(f.policy, f.batch, cfg);
  if (out.accepted) {
    CHECK(out.margins[0] > 0.0);
  } else {
    CHECK(out.backtracks == cfg.max_backtracks + 1);
  }
}

TEST_CASE("evaluate_barrier_objective reports margins and feasibility") {
  StepFixture f(32, 88, 2);
  auto ev = evaluate_barrier_objective(f.policy, f.batch);
  CHECK(ev.feasible);
  REQUIRE(ev.margins.size() == 2);
  for (int k = 0; k < 2; ++k)
    CHECK(ev.margins[k] ==
          Catch::Approx(f.batch.thresholds[k] - f.batch.j_c[k]).margin(1e-9));
  CHECK(ev.means.rows() == 32);

  f.batch.thresholds[1] = f.batch.j_c[1] - 1.0;
  auto bad = evaluate_barrier_objective(f.policy, f.batch);
  CHECK_FALSE(bad.feasible);
}
