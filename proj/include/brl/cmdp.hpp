#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "brl/common.hpp"
#include "brl/rng.hpp"

namespace brl {

// A constraint is either a bound on the probability of an undesirable event
// (cost is an indicator averaged over a group of checks), a bound on the
// expected value of a physical variable, or a bound on the L1 mismatch
// between the policy mean and its mirrored evaluation. Symmetry constraints
// have no per-transition cost channel and no critic head; they are evaluated
// directly on the policy.
enum class ConstraintKind { Probabilistic, Average, Symmetry };

inline const char* to_string(ConstraintKind k) {
  switch (k) {
    case ConstraintKind::Probabilistic: return "probabilistic";
    case ConstraintKind::Average: return "average";
    case ConstraintKind::Symmetry: return "symmetry";
  }
  return "?";
}

struct ConstraintSpec {
  int id = 0;                // contiguous 0..K-1 among enabled constraints;
                             // cost-kernel constraints first, symmetry last
  std::string name;
  ConstraintKind kind = ConstraintKind::Average;
  double limit = 0.0;        // D_k: probability for Probabilistic, physical
                             // units for Average, unitless for Symmetry
  int group_size = 1;        // denominator n for indicator costs
  bool enabled = true;
};

struct CmdpSpec {
  double gamma = 0.99;
  std::vector<ConstraintSpec> constraints;
  std::string env_name;
  int episode_steps = 80;
  double dt = 0.05;

  int num_enabled() const {
    int n = 0;
    for (const auto& c : constraints)
      if (c.enabled) ++n;
    return n;
  }

  // Number of enabled constraints carried as per-transition cost channels.
  int num_cost_channels() const {
    int n = 0;
    for (const auto& c : constraints)
      if (c.enabled && c.kind != ConstraintKind::Symmetry) ++n;
    return n;
  }
};

// Constraint threshold on the discounted-return scale, d = D / (1 - gamma).
inline double discounted_limit(double limit, double gamma) {
  if (!(gamma > 0.0 && gamma < 1.0))
    throw ContractViolation("discounted_limit: gamma must be in (0,1)");
  if (!std::isfinite(limit))
    throw ContractViolation("discounted_limit: limit must be finite");
  return limit / (1.0 - gamma);
}

// Indicator cost for a group of checks: violated / group_size.
inline double indicator_cost(int violated, int group_size) {
  require(group_size >= 1, "indicator_cost: group_size must be >= 1");
  require(violated >= 0 && violated <= group_size,
          "indicator_cost: violated must be in [0, group_size]");
  return static_cast<double>(violated) / static_cast<double>(group_size);
}

// Report-only validation of the CMDP invariants.
inline std::vector<std::string> validate_spec(const CmdpSpec& spec) {
  std::vector<std::string> issues;
  if (!(spec.gamma > 0.0 && spec.gamma < 1.0))
    issues.push_back("gamma must lie strictly in (0,1), got " +
                     std::to_string(spec.gamma));
  if (spec.episode_steps < 1) issues.push_back("episode_steps must be >= 1");
  if (!(spec.dt > 0.0)) issues.push_back("dt must be positive");

  int expected_id = 0;
  for (const auto& c : spec.constraints) {
    if (c.kind == ConstraintKind::Probabilistic &&
        !(c.limit >= 0.0 && c.limit <= 1.0))
      issues.push_back("constraint '" + c.name +
                       "': probabilistic limit must lie in [0,1]");
    if (c.group_size < 1)
      issues.push_back("constraint '" + c.name + "': group_size must be >= 1");
    if (c.enabled) {
      if (c.id != expected_id)
        issues.push_back("constraint '" + c.name +
                         "': enabled ids must be contiguous from 0, expected " +
                         std::to_string(expected_id) + " got " +
                         std::to_string(c.id));
      ++expected_id;
    }
  }
  return issues;
}

// Signed-permutation involution pair mirroring states and actions. Both maps
// must be involutions; apply() is its own transpose, so backpropagating
// through a mirror is the same as applying it.
struct MirrorSpec {
  std::vector<int> state_perm;   // image index per coordinate
  Vec state_sign;
  std::vector<int> action_perm;
  Vec action_sign;

  static Vec apply(const std::vector<int>& perm, const Vec& sign, const Vec& x) {
    Vec y(x.size());
    for (int i = 0; i < x.size(); ++i) y[perm[i]] = sign[perm[i]] * x[i];
    return y;
  }

  Vec mirror_state(const Vec& s) const { return apply(state_perm, state_sign, s); }
  Vec mirror_action(const Vec& a) const { return apply(action_perm, action_sign, a); }

  // Column-wise application to a batch stored one sample per row.
  Mat mirror_states(const Mat& s) const {
    Mat y(s.rows(), s.cols());
    for (int i = 0; i < s.cols(); ++i)
      y.col(state_perm[i]) = state_sign[state_perm[i]] * s.col(i);
    return y;
  }
  Mat mirror_actions(const Mat& a) const {
    Mat y(a.rows(), a.cols());
    for (int i = 0; i < a.cols(); ++i)
      y.col(action_perm[i]) = action_sign[action_perm[i]] * a.col(i);
    return y;
  }

  static MirrorSpec negate_axes(int state_dim, const std::vector<int>& state_neg,
                                int act_dim, const std::vector<int>& act_neg) {
    MirrorSpec m;
    m.state_perm.resize(state_dim);
    m.state_sign = Vec::Ones(state_dim);
    for (int i = 0; i < state_dim; ++i) m.state_perm[i] = i;
    for (int i : state_neg) m.state_sign[i] = -1.0;
    m.action_perm.resize(act_dim);
    m.action_sign = Vec::Ones(act_dim);
    for (int i = 0; i < act_dim; ++i) m.action_perm[i] = i;
    for (int i : act_neg) m.action_sign[i] = -1.0;
    return m;
  }
};

struct StepResult {
  Vec state;        // s'
  double reward = 0.0;
  Vec costs;        // one entry per cost channel, dense
  bool done = false;
  bool time_limit = false;
};

// Environment interface. Instances are single-owner: one rollout worker per
// instance. step() is deterministic given the current state and action;
// stochasticity enters only through the Rng passed to reset().
class Env {
 public:
  virtual ~Env() = default;

  virtual int obs_dim() const = 0;
  virtual int act_dim() const = 0;

  virtual Vec reset(Rng& rng) = 0;
  virtual StepResult step(const Vec& action) = 0;

  // Cost-kernel constraints this environment emits, in channel order,
  // followed by any symmetry constraints. ids are assigned contiguously.
  virtual std::vector<ConstraintSpec> constraint_specs() const = 0;

  virtual std::optional<MirrorSpec> mirror() const { return std::nullopt; }

  virtual int episode_steps() const = 0;
  virtual double dt() const = 0;
};

}  // namespace brl
