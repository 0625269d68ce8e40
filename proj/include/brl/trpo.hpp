#pragma once

#include <cmath>
#include <string>

#include "brl/barrier.hpp"
#include "brl/fisher.hpp"
#include "brl/losses.hpp"

namespace brl {

struct BarrierEval {
  double objective = 0.0;
  Vec margins;       // cost channels then symmetry
  bool feasible = true;
  Mat means;         // policy means over the batch, reused for KL
};

// One forward pass worth of everything the line search needs: objective,
// barrier margins, and the candidate's mean actions.
inline BarrierEval evaluate_barrier_objective(const GaussianPolicy& policy,
                                              const LossBatch& b) {
  BarrierEval ev;
  auto fwd = policy.mean_net.forward(b.states);
  ev.means = fwd.output();
  const int K = b.num_constraints();
  const bool has_sym = b.mirror != nullptr;
  ev.margins = Vec(K + (has_sym ? 1 : 0));

  Vec ratio = importance_ratios(policy, fwd, b);
  ev.objective = ratio.dot(b.adv_r) / static_cast<double>(ratio.size()) +
                 b.entropy_coef * entropy_mean(policy.std());
  for (int k = 0; k < K; ++k) {
    const double margin = b.thresholds[k] - cost_surrogate_value(ratio, b, k);
    ev.margins[k] = margin;
    if (margin > 0.0)
      ev.objective += std::log(margin) / b.barrier_t;
    else
      ev.feasible = false;
  }
  if (has_sym) {
    const double margin =
        b.sym_threshold - symmetry_value(policy, b.states, *b.mirror);
    ev.margins[K] = margin;
    if (margin > 0.0)
      ev.objective += std::log(margin) / b.barrier_t;
    else
      ev.feasible = false;
  }
  return ev;
}

struct PolicyStepOutcome {
  bool accepted = false;
  int backtracks = 0;     // candidates tried before acceptance or giving up
  double kl = 0.0;
  double objective_before = 0.0;
  double objective_after = 0.0;
  Vec margins;            // at the outcome policy
  bool cg_ok = true;
  std::string note;
};

namespace detail {

// Shared trust-region machinery: natural gradient direction by conjugate
// gradient, full step sized to the KL radius, then backtracking until the
// evaluator accepts a candidate. The evaluator returns (objective, margins,
// feasible, means) for an arbitrary candidate policy.
template <typename Eval>
PolicyStepOutcome trust_region_step(GaussianPolicy& policy, const LossBatch& lb,
                                    const BarrierConfig& cfg, const Vec& g,
                                    const BarrierEval& at_origin, Eval&& eval) {
  PolicyStepOutcome out;
  out.objective_before = at_origin.objective;
  out.objective_after = at_origin.objective;
  out.margins = at_origin.margins;

  const auto fisher_cache = policy.mean_net.forward(lb.states);
  auto apply = [&](const Vec& v) {
    return fisher_vector_product(policy, fisher_cache, v, cfg.damping);
  };
  auto cg = conjugate_gradient(apply, g, cfg.cg_iters);
  out.cg_ok = cg.ok;
  if (!cg.ok) {
    out.note = "cg breakdown";
    return out;
  }
  const Vec x = cg.x;
  const double xax = x.dot(apply(x));
  if (!(xax > 1e-30) || !std::isfinite(xax)) {
    out.note = "vanishing step curvature";
    return out;
  }
  const double beta = std::sqrt(2.0 * cfg.delta / xax);

  const Vec theta0 = policy.flatten();
  double scale = beta;
  for (int j = 0; j <= cfg.max_backtracks; ++j, scale *= cfg.backtrack_coeff) {
    out.backtracks = j;
    policy.unflatten(theta0 + scale * x);
    BarrierEval ev = eval(policy);
    if (!ev.feasible || !std::isfinite(ev.objective)) continue;
    const double kl = kl_mean(lb.means_old, lb.std_old, ev.means, policy.std());
    if (!std::isfinite(kl)) continue;
    if (ev.objective > at_origin.objective && kl <= cfg.delta) {
      out.accepted = true;
      out.kl = kl;
      out.objective_after = ev.objective;
      out.margins = ev.margins;
      return out;
    }
  }
  policy.unflatten(theta0);
  out.backtracks = cfg.max_backtracks + 1;
  out.note = "line search exhausted";
  return out;
}

}  // namespace detail

// Barrier trust-region update. The batch must carry adapted thresholds and
// the old-policy distribution snapshot; the policy is updated in place when
// a candidate is accepted and restored otherwise.
inline PolicyStepOutcome policy_step(GaussianPolicy& policy, const LossBatch& lb,
                                     const BarrierConfig& cfg) {
  auto at_origin = evaluate_barrier_objective(policy, lb);
  if (!at_origin.feasible)
    throw std::logic_error(
        "policy_step: infeasible at the current policy; thresholds not adapted");
  auto fwd = policy.mean_net.forward(lb.states);
  Vec g = barrier_objective_grad(policy, fwd, lb);
  return detail::trust_region_step(
      policy, lb, cfg, g, at_origin,
      [&lb](const GaussianPolicy& p) { return evaluate_barrier_objective(p, lb); });
}

// Plain reward-only trust-region update (TRPO with an entropy bonus). This
// is the reference path that the barrier step must reduce to when no
// constraints are given.
inline PolicyStepOutcome reward_only_step(GaussianPolicy& policy,
                                          const LossBatch& lb,
                                          const BarrierConfig& cfg) {
  require(lb.num_constraints() == 0 && lb.mirror == nullptr,
          "reward_only_step: constraints present");
  auto eval = [&lb](const GaussianPolicy& p) {
    BarrierEval ev;
    auto fwd = p.mean_net.forward(lb.states);
    ev.means = fwd.output();
    ev.margins = Vec(0);
    Vec ratio = importance_ratios(p, fwd, lb);
    ev.objective = ratio.dot(lb.adv_r) / static_cast<double>(ratio.size()) +
                   lb.entropy_coef * entropy_mean(p.std());
    return ev;
  };
  BarrierEval at_origin = eval(policy);
  auto fwd = policy.mean_net.forward(lb.states);
  Vec g = reward_surrogate_grad(policy, fwd, lb);
  return detail::trust_region_step(policy, lb, cfg, g, at_origin, eval);
}

}  // namespace brl
