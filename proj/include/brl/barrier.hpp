#pragma once

#include <string>
#include <vector>

#include "brl/losses.hpp"

namespace brl {

struct BarrierConfig {
  double t = 100.0;             // barrier steepness
  double alpha = 0.02;          // threshold enlargement factor
  double delta = 0.01;          // max KL step
  int cg_iters = 10;
  double damping = 0.01;
  double backtrack_coeff = 0.8;
  int max_backtracks = 10;
  double entropy_coef = 0.05;
  int value_epochs = 20;
  double value_lr = 3e-4;
  double grad_clip = 1.0;
  double epsilon_min = 1e-4;    // minimum barrier margin at the old policy

  void validate() const {
    require(t > 0.0, "BarrierConfig: t must be positive");
    require(alpha > 0.0, "BarrierConfig: alpha must be positive");
    require(delta > 0.0, "BarrierConfig: delta must be positive");
    require(backtrack_coeff > 0.0 && backtrack_coeff < 1.0,
            "BarrierConfig: backtrack_coeff must be in (0,1)");
    require(epsilon_min > 0.0, "BarrierConfig: epsilon_min must be positive");
    require(cg_iters >= 1, "BarrierConfig: cg_iters must be >= 1");
    require(damping >= 0.0, "BarrierConfig: damping must be nonnegative");
  }
};

// Per-iteration limit adaptation, d_i = max(d, j_c + alpha * d), floored at
// j_c + epsilon_min so the barrier margin at the current policy is strictly
// positive even when d = 0.
inline Vec adaptive_thresholds(const Vec& j_c, const Vec& d, double alpha,
                               double epsilon_min) {
  require(j_c.size() == d.size(), "adaptive_thresholds: length mismatch");
  Vec out(d.size());
  for (int k = 0; k < d.size(); ++k) {
    out[k] = std::max(d[k], j_c[k] + alpha * d[k]);
    out[k] = std::max(out[k], j_c[k] + epsilon_min);
  }
  return out;
}

inline double adaptive_threshold(double j_c, double d, double alpha,
                                 double epsilon_min) {
  Vec j(1), dd(1);
  j << j_c;
  dd << d;
  return adaptive_thresholds(j, dd, alpha, epsilon_min)[0];
}

// Everything recorded about one training iteration. Timing fields are kept
// out of the deterministic metrics file.
struct IterationReport {
  int iter = 0;
  double mean_reward = 0.0;
  Vec j_c;              // per reported constraint, symmetry last
  Vec d_i;              // adapted thresholds actually used
  Vec d;                // true discounted limits
  double kl = 0.0;
  double objective_before = 0.0;
  double objective_after = 0.0;
  bool accepted = false;
  int backtracks = 0;
  Vec barrier_margins;  // at the outcome policy, same order as j_c
  bool cg_ok = true;
  std::string note;
  double collect_ms = 0.0;
  double policy_step_ms = 0.0;
  double critic_ms = 0.0;
  double value_loss = 0.0;
  double cost_value_loss = 0.0;
};

// Report invariants that must hold for every emitted iteration.
inline void check_report(const IterationReport& r, double delta) {
  if (r.accepted) {
    if (!(r.kl <= delta * (1.0 + 1e-6)))
      throw std::logic_error("IterationReport: accepted step with kl > delta");
    for (int k = 0; k < r.barrier_margins.size(); ++k)
      if (!(r.barrier_margins[k] > 0.0))
        throw std::logic_error("IterationReport: accepted step with nonpositive margin");
    if (!(r.objective_after > r.objective_before))
      throw std::logic_error("IterationReport: accepted step without improvement");
  }
}

}  // namespace brl
