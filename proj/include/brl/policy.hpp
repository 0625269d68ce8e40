#pragma once

#include <cmath>

#include "brl/mlp.hpp"

namespace brl {

inline constexpr double kLogTwoPi = 1.8378770664093454836;

// Diagonal Gaussian policy: an MLP for the mean plus a state-independent
// log-std vector. The flat parameter vector is the mean network's canonical
// flattening followed by log_std.
struct GaussianPolicy {
  Mlp mean_net;
  Vec log_std;

  GaussianPolicy() = default;
  GaussianPolicy(MlpSpec spec, double init_log_std)
      : mean_net(std::move(spec)),
        log_std(Vec::Constant(mean_net.output_dim(), init_log_std)) {}

  int act_dim() const { return mean_net.output_dim(); }
  int obs_dim() const { return mean_net.input_dim(); }
  int param_count() const { return mean_net.param_count() + act_dim(); }

  Vec std() const { return log_std.array().exp(); }

  void init(Rng& rng, double hidden_gain = std::sqrt(2.0),
            double final_gain = 0.01) {
    mean_net.init(rng, hidden_gain, final_gain);
  }

  Vec flatten() const {
    Vec flat(param_count());
    flat.head(mean_net.param_count()) = mean_net.flatten();
    flat.tail(act_dim()) = log_std;
    return flat;
  }

  void unflatten(const Vec& flat) {
    require(flat.size() == param_count(), "GaussianPolicy::unflatten: size mismatch");
    mean_net.unflatten(flat.head(mean_net.param_count()));
    log_std = flat.tail(act_dim());
  }
};

struct PolicyForward {
  Mat means;  // N x act_dim
  Vec std;    // act_dim, broadcast per sample
};

inline PolicyForward policy_forward(const GaussianPolicy& policy, const Mat& states) {
  return {policy.mean_net.forward(states, /*check_finite=*/true).pre.back(),
          policy.std()};
}

// Per-sample diagonal-Gaussian log density.
inline Vec log_prob(const Mat& means, const Vec& std, const Mat& actions) {
  require(means.rows() == actions.rows() && means.cols() == actions.cols() &&
              std.size() == means.cols(),
          "log_prob: shape mismatch");
  const int d = static_cast<int>(means.cols());
  Mat z = (actions - means).array().rowwise() / std.transpose().array();
  const double log_norm =
      std.array().log().sum() + 0.5 * d * kLogTwoPi;
  return -0.5 * z.array().square().rowwise().sum() - log_norm;
}

inline double log_prob_single(const Vec& mean, const Vec& std, const Vec& action) {
  Mat m = mean.transpose();
  Mat a = action.transpose();
  return log_prob(m, std, a)[0];
}

// Mean over the batch of KL(old || new) for diagonal Gaussians.
inline double kl_mean(const Mat& means_old, const Vec& std_old,
                      const Mat& means_new, const Vec& std_new) {
  require(means_old.rows() == means_new.rows(), "kl_mean: batch size mismatch");
  const Eigen::ArrayXd var_new = std_new.array().square();
  Mat dmu = means_new - means_old;
  double acc = (std_new.array().log() - std_old.array().log() +
                std_old.array().square() / (2.0 * var_new) - 0.5)
                   .sum() *
               static_cast<double>(means_old.rows());
  acc += (dmu.array().square().rowwise() / (2.0 * var_new.transpose())).sum();
  return acc / static_cast<double>(means_old.rows());
}

// Diagonal-Gaussian entropy, 0.5 * sum_i log(2*pi*e*sigma_i^2).
inline double entropy_mean(const Vec& std) {
  const int d = static_cast<int>(std.size());
  return std.array().log().sum() + 0.5 * d * (kLogTwoPi + 1.0);
}

}  // namespace brl
