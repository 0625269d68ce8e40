#pragma once

#include <cmath>
#include <string>

#include "brl/cmdp.hpp"
#include "brl/policy.hpp"

namespace brl {

// Candidate policy left the barrier domain: some log argument would be
// nonpositive. The line search catches this and shrinks the step.
struct InfeasiblePoint : std::runtime_error {
  explicit InfeasiblePoint(const std::string& msg) : std::runtime_error(msg) {}
};

enum class LossId {
  RewardSurrogate,
  BarrierObjective,
  Kl,
  ValueMse,
  CostValueMse,
  SymmetryLoss,
};

// Everything the losses can consume. Policy losses use the trajectory slice
// (states/actions/old log-probs/advantages) plus the barrier configuration;
// critic losses use the regression targets.
struct LossBatch {
  Mat states;          // N x obs
  Mat actions;         // N x act
  Vec log_probs_old;   // N
  Vec adv_r;           // N, standardized
  Mat adv_c;           // N x K, zero-mean columns
  Vec j_c;             // K, discounted-limit scale
  Vec thresholds;      // K, adapted limits d_i
  double barrier_t = 100.0;
  double entropy_coef = 0.0;
  double one_minus_gamma = 0.01;

  Mat means_old;       // N x act, distribution snapshot for KL
  Vec std_old;

  const MirrorSpec* mirror = nullptr;  // enables the symmetry constraint
  double sym_threshold = 0.0;          // adapted d_sym

  Vec value_targets;        // N
  Mat cost_value_targets;   // N x K

  int num_constraints() const { return static_cast<int>(j_c.size()); }
};

// log(d - surrogate) / t, the contribution of one constraint to the barrier
// objective. Outside the domain this is an infeasible point, not a NaN.
inline double barrier_term(double threshold, double surrogate, double t) {
  require(t > 0.0, "barrier_term: t must be positive");
  const double margin = threshold - surrogate;
  if (!(margin > 0.0))
    throw InfeasiblePoint("barrier_term: nonpositive margin " +
                          std::to_string(margin));
  return std::log(margin) / t;
}

inline Vec importance_ratios(const GaussianPolicy& policy,
                             const Mlp::ForwardCache& fwd,
                             const LossBatch& b) {
  Vec lp = log_prob(fwd.output(), policy.std(), b.actions);
  return (lp - b.log_probs_old).array().exp();
}

// E[ratio * adv_r] + entropy bonus.
inline double reward_surrogate_value(const GaussianPolicy& policy,
                                     const Mlp::ForwardCache& fwd,
                                     const LossBatch& b) {
  Vec ratio = importance_ratios(policy, fwd, b);
  return ratio.dot(b.adv_r) / static_cast<double>(ratio.size()) +
         b.entropy_coef * entropy_mean(policy.std());
}

// J_C_k(pi_old) + E[ratio * adv_c_k] / (1 - gamma). Equals j_c[k] exactly at
// the data-collecting policy because the cost advantages are zero-mean.
inline double cost_surrogate_value(const Vec& ratio, const LossBatch& b, int k) {
  return b.j_c[k] + ratio.dot(b.adv_c.col(k)) /
                        (static_cast<double>(ratio.size()) * b.one_minus_gamma);
}

// Mean L1 mismatch between the policy mean and its mirrored evaluation.
inline double symmetry_value(const GaussianPolicy& policy, const Mat& states,
                             const MirrorSpec& mirror) {
  Mat mu = policy.mean_net.output(states);
  Mat mu_mirror = policy.mean_net.output(mirror.mirror_states(states));
  Mat diff = mu - mirror.mirror_actions(mu_mirror);
  return diff.array().abs().sum() / static_cast<double>(states.rows());
}

// Full barrier objective at the given policy. Throws InfeasiblePoint when
// any margin is nonpositive.
inline double barrier_objective_value(const GaussianPolicy& policy,
                                      const Mlp::ForwardCache& fwd,
                                      const LossBatch& b) {
  Vec ratio = importance_ratios(policy, fwd, b);
  double obj = ratio.dot(b.adv_r) / static_cast<double>(ratio.size()) +
               b.entropy_coef * entropy_mean(policy.std());
  for (int k = 0; k < b.num_constraints(); ++k)
    obj += barrier_term(b.thresholds[k], cost_surrogate_value(ratio, b, k),
                        b.barrier_t);
  if (b.mirror != nullptr)
    obj += barrier_term(b.sym_threshold,
                        symmetry_value(policy, b.states, *b.mirror),
                        b.barrier_t);
  return obj;
}

namespace detail {

// Gradient of mean_i(ratio_i * w_i) with respect to the policy parameters.
// Shared by the reward, cost, and barrier surrogate gradients so that the
// zero-constraint barrier gradient is bit-identical to the reward gradient.
inline Vec weighted_surrogate_grad(const GaussianPolicy& policy,
                                   const Mlp::ForwardCache& fwd,
                                   const LossBatch& b, const Vec& w) {
  const int n = static_cast<int>(b.states.rows());
  const Vec std = policy.std();
  Vec lp = log_prob(fwd.output(), std, b.actions);
  Vec coeff = (lp - b.log_probs_old).array().exp() * w.array() /
              static_cast<double>(n);

  Mat z = (b.actions - fwd.output()).array().rowwise() / std.transpose().array();
  // d logpi / d mu = z / std
  Mat grad_means = (z.array().rowwise() / std.transpose().array()).colwise() *
                   coeff.array();
  // d logpi / d logstd = z^2 - 1
  Vec grad_logstd = (z.array().square() - 1.0).matrix().transpose() * coeff;

  Vec flat(policy.param_count());
  flat.head(policy.mean_net.param_count()) =
      policy.mean_net.backward(fwd, grad_means);
  flat.tail(policy.act_dim()) = grad_logstd;
  return flat;
}

// Gradient of the mean L1 mirror mismatch. Backpropagates the sign pattern
// through the direct evaluation and, with flipped sign through the action
// mirror, through the mirrored evaluation.
inline Vec symmetry_grad(const GaussianPolicy& policy, const Mat& states,
                         const MirrorSpec& mirror) {
  const double n = static_cast<double>(states.rows());
  auto fwd = policy.mean_net.forward(states);
  Mat mirrored_states = mirror.mirror_states(states);
  auto fwd_m = policy.mean_net.forward(mirrored_states);
  Mat diff = fwd.output() - mirror.mirror_actions(fwd_m.output());
  Mat sign = diff.unaryExpr(
      [](double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); });
  Vec g_direct = policy.mean_net.backward(fwd, sign / n);
  Vec g_mirror = policy.mean_net.backward(fwd_m, mirror.mirror_actions(sign) / n);
  Vec flat = Vec::Zero(policy.param_count());
  flat.head(policy.mean_net.param_count()) = g_direct - g_mirror;
  return flat;
}

inline Vec kl_grad(const GaussianPolicy& policy, const Mlp::ForwardCache& fwd,
                   const LossBatch& b) {
  const int n = static_cast<int>(b.states.rows());
  const Vec std_new = policy.std();
  const Eigen::ArrayXd var_new = std_new.array().square();
  Mat dmu = fwd.output() - b.means_old;
  Mat grad_means =
      (dmu.array().rowwise() / var_new.transpose()) / static_cast<double>(n);
  // d/d logstd_new of mean KL(old || new):
  //   1 - (std_old^2 + dmu^2) / std_new^2, averaged over the batch
  Vec grad_logstd =
      (1.0 -
       ((dmu.array().square().colwise().mean().transpose() +
         b.std_old.array().square()) /
        var_new))
          .matrix();
  Vec flat(policy.param_count());
  flat.head(policy.mean_net.param_count()) =
      policy.mean_net.backward(fwd, grad_means);
  flat.tail(policy.act_dim()) = grad_logstd;
  return flat;
}

}  // namespace detail

inline Vec reward_surrogate_grad(const GaussianPolicy& policy,
                                 const Mlp::ForwardCache& fwd,
                                 const LossBatch& b) {
  Vec g = detail::weighted_surrogate_grad(policy, fwd, b, b.adv_r);
  if (b.entropy_coef != 0.0)
    g.tail(policy.act_dim()).array() += b.entropy_coef;
  return g;
}

inline Vec barrier_objective_grad(const GaussianPolicy& policy,
                                  const Mlp::ForwardCache& fwd,
                                  const LossBatch& b) {
  Vec w = b.adv_r;
  if (b.num_constraints() > 0) {
    Vec ratio = importance_ratios(policy, fwd, b);
    for (int k = 0; k < b.num_constraints(); ++k) {
      const double margin =
          b.thresholds[k] - cost_surrogate_value(ratio, b, k);
      if (!(margin > 0.0))
        throw InfeasiblePoint("barrier gradient: nonpositive margin at k=" +
                              std::to_string(k));
      w -= b.adv_c.col(k) / (b.barrier_t * margin * b.one_minus_gamma);
    }
  }
  Vec g = detail::weighted_surrogate_grad(policy, fwd, b, w);
  if (b.entropy_coef != 0.0)
    g.tail(policy.act_dim()).array() += b.entropy_coef;
  if (b.mirror != nullptr) {
    const double sym = symmetry_value(policy, b.states, *b.mirror);
    const double margin = b.sym_threshold - sym;
    if (!(margin > 0.0))
      throw InfeasiblePoint("barrier gradient: nonpositive symmetry margin");
    g -= detail::symmetry_grad(policy, b.states, *b.mirror) /
         (b.barrier_t * margin);
  }
  return g;
}

// Mean squared error losses for the critics. The multi-head loss averages
// per-head MSE over heads, so each head's gradient is independent of the
// other heads' residuals.
inline double value_mse_value(const Mlp& net, const Mat& states, const Vec& targets) {
  Vec pred = net.output(states);
  return (pred - targets).squaredNorm() / static_cast<double>(targets.size());
}

inline Vec value_mse_grad(const Mlp& net, const Mat& states, const Vec& targets) {
  auto fwd = net.forward(states);
  Mat resid = fwd.output().col(0) - targets;
  return net.backward(fwd, 2.0 * resid / static_cast<double>(targets.size()));
}

inline double cost_value_mse_value(const Mlp& net, const Mat& states,
                                   const Mat& targets) {
  Mat pred = net.output(states);
  return (pred - targets).squaredNorm() /
         static_cast<double>(targets.rows() * targets.cols());
}

inline Vec cost_value_mse_grad(const Mlp& net, const Mat& states,
                               const Mat& targets) {
  auto fwd = net.forward(states);
  Mat resid = fwd.output() - targets;
  return net.backward(fwd, 2.0 * resid /
                               static_cast<double>(targets.rows() * targets.cols()));
}

// Dispatchers over the named losses; policy losses take the policy overload,
// critic losses take the network overload.

inline double loss_value(LossId id, const GaussianPolicy& policy,
                         const LossBatch& b) {
  switch (id) {
    case LossId::RewardSurrogate:
      return reward_surrogate_value(policy, policy.mean_net.forward(b.states), b);
    case LossId::BarrierObjective:
      return barrier_objective_value(policy, policy.mean_net.forward(b.states), b);
    case LossId::Kl: {
      auto fwd = policy.mean_net.forward(b.states);
      return kl_mean(b.means_old, b.std_old, fwd.output(), policy.std());
    }
    case LossId::SymmetryLoss:
      require(b.mirror != nullptr, "symmetry_loss: no mirror in batch");
      return symmetry_value(policy, b.states, *b.mirror);
    default:
      throw ContractViolation("loss_value: not a policy loss");
  }
}

inline Vec grad(LossId id, const GaussianPolicy& policy, const LossBatch& b) {
  switch (id) {
    case LossId::RewardSurrogate:
      return reward_surrogate_grad(policy, policy.mean_net.forward(b.states), b);
    case LossId::BarrierObjective:
      return barrier_objective_grad(policy, policy.mean_net.forward(b.states), b);
    case LossId::Kl:
      return detail::kl_grad(policy, policy.mean_net.forward(b.states), b);
    case LossId::SymmetryLoss:
      require(b.mirror != nullptr, "symmetry_loss: no mirror in batch");
      return detail::symmetry_grad(policy, b.states, *b.mirror);
    default:
      throw ContractViolation("grad: not a policy loss");
  }
}

inline double loss_value(LossId id, const Mlp& net, const LossBatch& b) {
  switch (id) {
    case LossId::ValueMse:
      return value_mse_value(net, b.states, b.value_targets);
    case LossId::CostValueMse:
      return cost_value_mse_value(net, b.states, b.cost_value_targets);
    default:
      throw ContractViolation("loss_value: not a critic loss");
  }
}

inline Vec grad(LossId id, const Mlp& net, const LossBatch& b) {
  switch (id) {
    case LossId::ValueMse:
      return value_mse_grad(net, b.states, b.value_targets);
    case LossId::CostValueMse:
      return cost_value_mse_grad(net, b.states, b.cost_value_targets);
    default:
      throw ContractViolation("grad: not a critic loss");
  }
}

}  // namespace brl
