#pragma once

#include <functional>

#include "brl/policy.hpp"

namespace brl {

// Hessian-vector product of the mean KL at the current policy, plus damping.
// At equality the KL Hessian is the Fisher information, which for a diagonal
// Gaussian splits into a Gauss-Newton block through the mean network,
// J_mu^T diag(1/sigma^2) J_mu, and an exact 2*I block for the log-std
// parameters. The mean block is computed as a forward-mode directional
// derivative followed by a backward pass.
inline Vec fisher_vector_product(const GaussianPolicy& policy,
                                 const Mlp::ForwardCache& fwd, const Vec& v,
                                 double damping) {
  require(v.size() == policy.param_count(), "fvp: vector size mismatch");
  require(damping >= 0.0, "fvp: damping must be nonnegative");
  const int n_mean = policy.mean_net.param_count();
  const double n = static_cast<double>(fwd.input.rows());

  Mat jv = policy.mean_net.jvp(fwd, v.head(n_mean));
  const Eigen::ArrayXd inv_var = policy.std().array().square().inverse();
  Mat u = (jv.array().rowwise() * inv_var.transpose()) / n;

  Vec out(policy.param_count());
  out.head(n_mean) = policy.mean_net.backward(fwd, u);
  out.tail(policy.act_dim()) = 2.0 * v.tail(policy.act_dim());
  if (damping != 0.0) out += damping * v;
  return out;
}

inline Vec fisher_vector_product(const GaussianPolicy& policy, const Mat& states,
                                 const Vec& v, double damping) {
  return fisher_vector_product(policy, policy.mean_net.forward(states), v,
                               damping);
}

struct CgResult {
  Vec x;
  bool ok = true;        // false on curvature breakdown before any progress
  int iterations = 0;
  double residual_norm = 0.0;
};

// Plain conjugate gradient from x0 = 0 for a symmetric positive definite
// operator. Nonpositive curvature stops the iteration; the solution so far
// is returned with ok = false if no iteration completed.
inline CgResult conjugate_gradient(const std::function<Vec(const Vec&)>& apply,
                                   const Vec& b, int max_iters,
                                   double residual_tol = 1e-10) {
  CgResult res;
  res.x = Vec::Zero(b.size());
  Vec r = b;
  Vec p = b;
  double rs = r.squaredNorm();
  if (std::sqrt(rs) < residual_tol) {
    res.residual_norm = std::sqrt(rs);
    return res;
  }
  for (int i = 0; i < max_iters; ++i) {
    Vec ap = apply(p);
    const double curvature = p.dot(ap);
    if (!(curvature > 1e-16 * p.squaredNorm())) {
      res.ok = res.iterations > 0;
      break;
    }
    const double alpha = rs / curvature;
    res.x += alpha * p;
    r -= alpha * ap;
    const double rs_new = r.squaredNorm();
    ++res.iterations;
    if (std::sqrt(rs_new) < residual_tol) {
      rs = rs_new;
      break;
    }
    p = r + (rs_new / rs) * p;
    rs = rs_new;
  }
  res.residual_norm = std::sqrt(rs);
  return res;
}

}  // namespace brl
