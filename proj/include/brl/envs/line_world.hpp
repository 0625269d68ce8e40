#pragma once

#include <cmath>

#include "brl/cmdp.hpp"

namespace brl::envs {

// 1D double integrator driven toward the origin, fully deterministic given
// the action sequence (reset ignores the random stream). Small enough for
// brute-force expectation checks. Cost channels:
//   0 actuation (probabilistic) |a| <= act_bound
//   1 speed     (average)       |v|
struct LineWorldParams {
  double dt = 0.1;
  int episode_steps = 10;
  double start = -1.0;
  double act_bound = 1.0;
  double act_limit = 0.1;
  double speed_limit = 0.5;
};

class LineWorld : public Env {
 public:
  explicit LineWorld(LineWorldParams params = {}) : p_(params) {}

  int obs_dim() const override { return 2; }
  int act_dim() const override { return 1; }
  int episode_steps() const override { return p_.episode_steps; }
  double dt() const override { return p_.dt; }

  Vec reset(Rng&) override {
    t_ = 0;
    pos_ = p_.start;
    vel_ = 0.0;
    return observe();
  }

  StepResult step(const Vec& action) override {
    require(action.size() == 1, "LineWorld: action dim");
    require(action.allFinite(), "LineWorld: non-finite action");
    const double a = action[0];
    vel_ += a * p_.dt;
    pos_ += vel_ * p_.dt;
    ++t_;

    StepResult r;
    r.state = observe();
    r.reward = -pos_ * pos_;
    r.costs = Vec(2);
    r.costs << indicator_cost(std::abs(a) > p_.act_bound ? 1 : 0, 1),
        std::abs(vel_);
    r.done = t_ >= p_.episode_steps;
    r.time_limit = r.done;
    return r;
  }

  std::vector<ConstraintSpec> constraint_specs() const override {
    return {
        {0, "actuation", ConstraintKind::Probabilistic, p_.act_limit, 1, true},
        {1, "speed", ConstraintKind::Average, p_.speed_limit, 1, true},
    };
  }

  const LineWorldParams& params() const { return p_; }

 private:
  Vec observe() const {
    Vec s(2);
    s << pos_, vel_;
    return s;
  }

  LineWorldParams p_;
  double pos_ = 0.0, vel_ = 0.0;
  int t_ = 0;
};

}  // namespace brl::envs
