#pragma once

#include <cmath>

#include "brl/cmdp.hpp"

namespace brl::envs {

// Inverted pendulum tracking an angular-velocity command with a torque
// action. theta = 0 is upright; gravity pushes away from it. Semi-implicit
// Euler at dt, unit inertia. Cost channels:
//   0 torque limit    (probabilistic) |tau| <= torque_bound
//   1 angle deviation (average)       |theta|
struct PendulumParams {
  double dt = 0.05;
  int episode_steps = 80;
  double k_c = 10.0;
  double gravity = 2.0;       // g/l with unit inertia
  double torque_bound = 2.0;
  double torque_limit = 0.025;
  double angle_limit = 0.5;
  double cmd_range = 1.0;
  double reset_angle = 0.1;
};

class Pendulum1 : public Env {
 public:
  explicit Pendulum1(PendulumParams params = {}) : p_(params) {}

  int obs_dim() const override { return 3; }
  int act_dim() const override { return 1; }
  int episode_steps() const override { return p_.episode_steps; }
  double dt() const override { return p_.dt; }

  Vec reset(Rng& rng) override {
    t_ = 0;
    theta_ = rng.uniform(-p_.reset_angle, p_.reset_angle);
    omega_ = 0.0;
    cmd_ = rng.uniform(-p_.cmd_range, p_.cmd_range);
    return observe();
  }

  StepResult step(const Vec& action) override {
    require(action.size() == 1, "Pendulum1: action dim");
    require(action.allFinite(), "Pendulum1: non-finite action");
    const double tau = action[0];
    omega_ += (p_.gravity * std::sin(theta_) + tau) * p_.dt;
    theta_ += omega_ * p_.dt;
    ++t_;

    StepResult r;
    r.state = observe();
    const double err = cmd_ - omega_;
    r.reward = -p_.k_c * err * err;
    r.costs = Vec(2);
    r.costs << indicator_cost(std::abs(tau) > p_.torque_bound ? 1 : 0, 1),
        std::abs(theta_);
    r.done = t_ >= p_.episode_steps;
    r.time_limit = r.done;
    return r;
  }

  std::vector<ConstraintSpec> constraint_specs() const override {
    return {
        {0, "torque", ConstraintKind::Probabilistic, p_.torque_limit, 1, true},
        {1, "angle_deviation", ConstraintKind::Average, p_.angle_limit, 1, true},
    };
  }

  // Negating every coordinate is an involution and the dynamics are odd.
  std::optional<MirrorSpec> mirror() const override {
    return MirrorSpec::negate_axes(3, {0, 1, 2}, 1, {0});
  }

  const PendulumParams& params() const { return p_; }

 private:
  Vec observe() const {
    Vec s(3);
    s << theta_, omega_, cmd_;
    return s;
  }

  PendulumParams p_;
  double theta_ = 0.0, omega_ = 0.0, cmd_ = 0.0;
  int t_ = 0;
};

}  // namespace brl::envs
