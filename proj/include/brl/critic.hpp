#pragma once

#include <algorithm>
#include <numeric>
#include <vector>

#include "brl/losses.hpp"
#include "brl/mlp.hpp"
#include "brl/rng.hpp"

namespace brl {

inline Vec clip_by_norm(Vec g, double max_norm) {
  const double n = g.norm();
  if (n > max_norm && n > 0.0) g *= max_norm / n;
  return g;
}

struct Adam {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  Vec m, v;
  long steps = 0;

  void reset(int n) {
    m = Vec::Zero(n);
    v = Vec::Zero(n);
    steps = 0;
  }

  // Descent update applied to params in place.
  void step(Vec& params, const Vec& gradient) {
    if (m.size() != gradient.size()) reset(static_cast<int>(gradient.size()));
    ++steps;
    m = beta1 * m + (1.0 - beta1) * gradient;
    v = beta2 * v + (1.0 - beta2) * gradient.cwiseProduct(gradient);
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(steps));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(steps));
    Vec denom = (v / c2).cwiseSqrt() + Vec::Constant(m.size(), eps);
    params -= (lr / c1) * m.cwiseQuotient(denom);
  }
};

// Cost critic in one of two designs: a single trunk with K output heads, or
// K independent single-output networks of the same trunk spec. The
// multi-head design is the default; the single-head set exists for the
// parameter-count and equivalence comparison.
struct CostCritic {
  bool multi_head = true;
  Mlp multi;
  Adam multi_opt;
  std::vector<Mlp> singles;
  std::vector<Adam> single_opts;

  static CostCritic make(const std::vector<int>& hidden, int obs_dim, int heads,
                         bool multi_head, Activation act, double slope, Rng& rng) {
    CostCritic c;
    c.multi_head = multi_head;
    if (multi_head) {
      MlpSpec spec;
      spec.layer_widths.push_back(obs_dim);
      for (int h : hidden) spec.layer_widths.push_back(h);
      spec.layer_widths.push_back(heads);
      spec.activation = act;
      spec.leaky_slope = slope;
      c.multi = Mlp(spec);
      c.multi.init(rng, std::sqrt(2.0), 1.0);
    } else {
      for (int k = 0; k < heads; ++k) {
        MlpSpec spec;
        spec.layer_widths.push_back(obs_dim);
        for (int h : hidden) spec.layer_widths.push_back(h);
        spec.layer_widths.push_back(1);
        spec.activation = act;
        spec.leaky_slope = slope;
        c.singles.emplace_back(spec);
        c.singles.back().init(rng, std::sqrt(2.0), 1.0);
        c.single_opts.emplace_back();
      }
    }
    return c;
  }

  int num_heads() const {
    return multi_head ? multi.output_dim() : static_cast<int>(singles.size());
  }

  int param_count() const {
    if (multi_head) return multi.param_count();
    int n = 0;
    for (const auto& net : singles) n += net.param_count();
    return n;
  }

  Mat predict(const Mat& states) const {
    if (multi_head) return multi.output(states);
    Mat out(states.rows(), num_heads());
    for (int k = 0; k < num_heads(); ++k)
      out.col(k) = singles[k].output(states).col(0);
    return out;
  }
};

struct CriticTrainConfig {
  int epochs = 20;
  double lr = 3e-4;
  double grad_clip = 1.0;
  int minibatch = 512;
};

struct CriticTrainResult {
  double value_loss_before = 0.0;
  double value_loss_after = 0.0;
  double cost_loss_before = 0.0;
  double cost_loss_after = 0.0;
};

namespace detail {

inline void adam_minibatch_step(Mlp& net, Adam& opt, const Mat& states,
                                const Mat& targets, bool multi_head_loss,
                                double grad_clip) {
  LossBatch lb;
  lb.states = states;
  Vec g;
  if (multi_head_loss) {
    lb.cost_value_targets = targets;
    g = grad(LossId::CostValueMse, net, lb);
  } else {
    lb.value_targets = targets.col(0);
    g = grad(LossId::ValueMse, net, lb);
  }
  g = clip_by_norm(std::move(g), grad_clip);
  Vec params = net.flatten();
  opt.step(params, g);
  net.unflatten(params);
}

}  // namespace detail

// Minibatch regression of the value net on ret_r and the cost critic on
// ret_c. Gradients are norm-clipped before the Adam update. The shuffle
// stream is owned by the caller so runs stay reproducible.
inline CriticTrainResult train_critics(const Mat& states, const Vec& ret_r,
                                       const Mat& ret_c, Mlp& value_net,
                                       Adam& value_opt, CostCritic* cost,
                                       const CriticTrainConfig& cfg, Rng& rng) {
  const int n = static_cast<int>(states.rows());
  CriticTrainResult result;
  value_opt.lr = cfg.lr;

  {
    LossBatch lb;
    lb.states = states;
    lb.value_targets = ret_r;
    result.value_loss_before = loss_value(LossId::ValueMse, value_net, lb);
  }
  if (cost != nullptr) {
    result.cost_loss_before =
        (cost->predict(states) - ret_c).squaredNorm() /
        static_cast<double>(ret_c.rows() * ret_c.cols());
  }

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  const int mb = std::min(cfg.minibatch, n);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (int i = n - 1; i > 0; --i)
      std::swap(order[i], order[rng.below(static_cast<std::uint64_t>(i + 1))]);
    for (int start = 0; start < n; start += mb) {
      const int count = std::min(mb, n - start);
      std::vector<int> idx(order.begin() + start, order.begin() + start + count);
      Mat s = states(idx, Eigen::all);
      Mat tr(count, 1);
      for (int i = 0; i < count; ++i) tr(i, 0) = ret_r[idx[i]];
      detail::adam_minibatch_step(value_net, value_opt, s, tr, false, cfg.grad_clip);
      if (cost != nullptr) {
        Mat tc = ret_c(idx, Eigen::all);
        if (cost->multi_head) {
          cost->multi_opt.lr = cfg.lr;
          detail::adam_minibatch_step(cost->multi, cost->multi_opt, s, tc, true,
                                      cfg.grad_clip);
        } else {
          for (int k = 0; k < cost->num_heads(); ++k) {
            cost->single_opts[k].lr = cfg.lr;
            Mat tk = tc.col(k);
            detail::adam_minibatch_step(cost->singles[k], cost->single_opts[k], s,
                                        tk, false, cfg.grad_clip);
          }
        }
      }
    }
  }

  {
    LossBatch lb;
    lb.states = states;
    lb.value_targets = ret_r;
    result.value_loss_after = loss_value(LossId::ValueMse, value_net, lb);
  }
  if (cost != nullptr) {
    result.cost_loss_after =
        (cost->predict(states) - ret_c).squaredNorm() /
        static_cast<double>(ret_c.rows() * ret_c.cols());
  }
  return result;
}

}  // namespace brl
