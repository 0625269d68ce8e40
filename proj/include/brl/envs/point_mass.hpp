#pragma once

#include <cmath>

#include "brl/cmdp.hpp"

namespace brl::envs {

// Velocity-command tracking for a 2D double integrator. Observation is
// (position, velocity, command); the action is an acceleration. The command
// is resampled per episode. Episodes end only by time limit; constraint
// breaches cost but never terminate, keeping the J_C estimates unbiased.
//
// Cost channels, in order:
//   0 position box   (probabilistic) |p_i| <= box_bound, per-axis indicator
//   1 actuation      (probabilistic) |a_i| <= act_bound, per-axis indicator
//   2 speed overshoot (average)      max(0, ||v|| - speed_cap)
//   3 effort          (average)      ||a||_1 / 2
// plus a symmetry constraint mirroring the y axis.
struct PointMassParams {
  double dt = 0.05;
  int episode_steps = 80;
  double k_c = 10.0;        // command tracking reward weight
  double k_effort = 0.0;    // optional quadratic effort penalty in the reward
  double box_bound = 4.5;
  double act_bound = 1.5;
  double speed_cap = 1.5;
  double cmd_range = 1.5;
  double reset_range = 0.5;
  double box_limit = 0.025;
  double act_limit = 0.025;
  double speed_limit = 0.35;
  double effort_limit = 0.5;
  double sym_limit = 0.1;
  double fail_speed = 50.0;  // divergence failsafe, far beyond any policy
  int num_channels = 4;      // >4 appends speed variants, <4 truncates
  bool with_symmetry = true;
};

class PointMass2D : public Env {
 public:
  explicit PointMass2D(PointMassParams params = {}) : p_(params) {}

  int obs_dim() const override { return 6; }
  int act_dim() const override { return 2; }
  int episode_steps() const override { return p_.episode_steps; }
  double dt() const override { return p_.dt; }

  Vec reset(Rng& rng) override {
    t_ = 0;
    pos_ = Vec(2);
    pos_ << rng.uniform(-p_.reset_range, p_.reset_range),
        rng.uniform(-p_.reset_range, p_.reset_range);
    vel_ = Vec::Zero(2);
    cmd_ = Vec(2);
    cmd_ << rng.uniform(-p_.cmd_range, p_.cmd_range),
        rng.uniform(-p_.cmd_range, p_.cmd_range);
    return observe();
  }

  StepResult step(const Vec& action) override {
    require(action.size() == 2, "PointMass2D: action dim");
    require(action.allFinite(), "PointMass2D: non-finite action");
    vel_ += action * p_.dt;
    pos_ += vel_ * p_.dt;
    ++t_;

    StepResult r;
    r.state = observe();
    r.reward = -p_.k_c * (cmd_ - vel_).squaredNorm() -
               p_.k_effort * action.squaredNorm();
    r.costs = costs(action);
    // a runaway rollout (velocity far beyond anything a useful policy
    // produces) ends as a failure so one diverging episode cannot swamp
    // the batch statistics
    const bool diverged = vel_.norm() > p_.fail_speed;
    r.done = diverged || t_ >= p_.episode_steps;
    r.time_limit = !diverged && r.done;
    return r;
  }

  std::vector<ConstraintSpec> constraint_specs() const override {
    std::vector<ConstraintSpec> all = {
        {0, "position_box", ConstraintKind::Probabilistic, p_.box_limit, 2, true},
        {1, "actuation", ConstraintKind::Probabilistic, p_.act_limit, 2, true},
        {2, "speed_overshoot", ConstraintKind::Average, p_.speed_limit, 1, true},
        {3, "effort", ConstraintKind::Average, p_.effort_limit, 1, true},
    };
    std::vector<ConstraintSpec> out;
    for (int k = 0; k < std::min(p_.num_channels, 4); ++k) out.push_back(all[k]);
    for (int k = 4; k < p_.num_channels; ++k)
      out.push_back({k, "speed_overshoot_" + std::to_string(k),
                     ConstraintKind::Average, p_.speed_limit, 1, true});
    for (std::size_t i = 0; i < out.size(); ++i) out[i].id = static_cast<int>(i);
    if (p_.with_symmetry)
      out.push_back({static_cast<int>(out.size()), "symmetry",
                     ConstraintKind::Symmetry, p_.sym_limit, 1, true});
    return out;
  }

  std::optional<MirrorSpec> mirror() const override {
    return MirrorSpec::negate_axes(6, {1, 3, 5}, 2, {1});
  }

  const PointMassParams& params() const { return p_; }

 private:
  Vec observe() const {
    Vec s(6);
    s << pos_[0], pos_[1], vel_[0], vel_[1], cmd_[0], cmd_[1];
    return s;
  }

  Vec costs(const Vec& action) const {
    const int K = p_.num_channels;
    Vec c = Vec::Zero(K);
    int k = 0;
    if (k < K) {
      int violated = (std::abs(pos_[0]) > p_.box_bound ? 1 : 0) +
                     (std::abs(pos_[1]) > p_.box_bound ? 1 : 0);
      c[k++] = indicator_cost(violated, 2);
    }
    if (k < K) {
      int violated = (std::abs(action[0]) > p_.act_bound ? 1 : 0) +
                     (std::abs(action[1]) > p_.act_bound ? 1 : 0);
      c[k++] = indicator_cost(violated, 2);
    }
    if (k < K) c[k++] = std::max(0.0, vel_.norm() - p_.speed_cap);
    if (k < K) c[k++] = action.lpNorm<1>() / 2.0;
    for (; k < K; ++k)
      c[k] = std::max(0.0, vel_.norm() - (p_.speed_cap + 0.1 * (k - 3)));
    return c;
  }

  PointMassParams p_;
  Vec pos_{Vec::Zero(2)}, vel_{Vec::Zero(2)}, cmd_{Vec::Zero(2)};
  int t_ = 0;
};

}  // namespace brl::envs
