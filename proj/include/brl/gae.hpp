#pragma once

#include <cstdint>
#include <vector>

#include "brl/common.hpp"

namespace brl {

struct GaeResult {
  Vec adv;
  Vec ret;  // adv + values, regression targets
};

// Generalized advantage estimation over one contiguous stretch of
// transitions that may contain several episodes. Episode ends are marked in
// `dones`; a time-limit end bootstraps with the critic value of the cut
// state (bootstrap_next at that index), a failure end bootstraps with zero.
// A final transition without done is a batch cut and also bootstraps.
// Advantage accumulation never crosses an episode boundary.
inline GaeResult gae(const Vec& signal, const Vec& values, const Vec& bootstrap_next,
                     double gamma, double lambda,
                     const std::vector<std::uint8_t>& dones,
                     const std::vector<std::uint8_t>& time_limits) {
  const int n = static_cast<int>(signal.size());
  require(values.size() == n && bootstrap_next.size() == n &&
              static_cast<int>(dones.size()) == n &&
              static_cast<int>(time_limits.size()) == n,
          "gae: length mismatch");
  require(lambda >= 0.0 && lambda <= 1.0, "gae: lambda must be in [0,1]");

  GaeResult out;
  out.adv = Vec(n);
  double carry = 0.0;
  for (int t = n - 1; t >= 0; --t) {
    double next_value;
    if (dones[t])
      next_value = time_limits[t] ? bootstrap_next[t] : 0.0;
    else if (t == n - 1)
      next_value = bootstrap_next[t];
    else
      next_value = values[t + 1];
    const double delta = signal[t] + gamma * next_value - values[t];
    if (dones[t]) carry = 0.0;
    carry = delta + gamma * lambda * carry;
    out.adv[t] = carry;
  }
  out.ret = out.adv + values;
  return out;
}

// Convenience overload for a single trailing bootstrap value: it is used at
// every time-limit terminal and at a trailing batch cut.
inline GaeResult gae(const Vec& signal, const Vec& values, double bootstrap,
                     double gamma, double lambda,
                     const std::vector<std::uint8_t>& dones,
                     const std::vector<std::uint8_t>& time_limits) {
  Vec b = Vec::Zero(signal.size());
  for (int t = 0; t < signal.size(); ++t)
    if (time_limits[t] || (t == signal.size() - 1 && !dones[t])) b[t] = bootstrap;
  return gae(signal, values, b, gamma, lambda, dones, time_limits);
}

inline Vec zero_mean(const Vec& adv) {
  require(adv.size() > 0, "zero_mean: empty vector");
  return adv.array() - adv.mean();
}

// Subtract the mean and divide by the population standard deviation. A
// near-constant vector degenerates to zero_mean.
inline Vec standardize(const Vec& adv) {
  require(adv.size() > 0, "standardize: empty vector");
  Vec centered = adv.array() - adv.mean();
  const double std = std::sqrt(centered.squaredNorm() /
                               static_cast<double>(centered.size()));
  if (std < 1e-8) return centered;
  return centered / std;
}

}  // namespace brl
