#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "brl/gae.hpp"
#include "brl/rng.hpp"

using namespace brl;

namespace {

// Direct evaluation of the defining double sum: adv_t = sum_l (gamma*lambda)^l
// * delta_{t+l}, truncated at the episode end. Kept independent of the
// production recursion.
Vec gae_double_sum(const Vec& signal, const Vec& values, const Vec& bootstrap_next,
                   double gamma, double lambda,
                   const std::vector<std::uint8_t>& dones,
                   const std::vector<std::uint8_t>& tls) {
  const int n = static_cast<int>(signal.size());
  Vec adv(n);
  for (int t = 0; t < n; ++t) {
    double acc = 0.0;
    double w = 1.0;
    for (int u = t; u < n; ++u) {
      double next_value;
      if (dones[u])
        next_value = tls[u] ? bootstrap_next[u] : 0.0;
      else if (u == n - 1)
        next_value = bootstrap_next[u];
      else
        next_value = values[u + 1];
      acc += w * (signal[u] + gamma * next_value - values[u]);
      if (dones[u]) break;
      w *= gamma * lambda;
    }
    adv[t] = acc;
  }
  return adv;
}

struct RandomEpisode {
  Vec signal, values, bootstrap;
  std::vector<std::uint8_t> dones, tls;
};

RandomEpisode random_episode(Rng& rng, int max_len = 24) {
  const int n = 2 + static_cast<int>(rng.below(max_len - 1));
  RandomEpisode ep;
  ep.signal = Vec(n);
  ep.values = Vec(n);
  ep.bootstrap = Vec::Zero(n);
  ep.dones.assign(n, 0);
  ep.tls.assign(n, 0);
  for (int i = 0; i < n; ++i) {
    ep.signal[i] = rng.normal();
    ep.values[i] = rng.normal();
  }
  // sprinkle episode ends of mixed type; last transition may be a cut
  for (int i = 0; i < n - 1; ++i) {
    if (rng.uniform() < 0.15) {
      ep.dones[i] = 1;
      if (rng.uniform() < 0.5) {
        ep.tls[i] = 1;
        ep.bootstrap[i] = rng.normal();
      }
    }
  }
  const double tail = rng.uniform();
  if (tail < 0.4) {
    ep.dones[n - 1] = 1;
    if (tail < 0.2) {
      ep.tls[n - 1] = 1;
      ep.bootstrap[n - 1] = rng.normal();
    }
  } else {
    ep.bootstrap[n - 1] = rng.normal();  // batch cut
  }
  return ep;
}

}  // namespace

TEST_CASE("gae matches the frozen two-step example") {
  Vec signal(2), values(2);
  signal << 1.0, 1.0;
  values << 0.0, 0.0;
  std::vector<std::uint8_t> dones = {0, 1}, tls = {0, 0};
  auto res = gae(signal, values, 0.0, 0.99, 0.97, dones, tls);
  CHECK(res.adv[0] == Catch::Approx(1.9603).epsilon(1e-12));
  CHECK(res.adv[1] == Catch::Approx(1.0).epsilon(1e-12));
  CHECK(res.ret[0] == Catch::Approx(1.9603).epsilon(1e-12));
}

TEST_CASE("gae with lambda 0 returns the TD residual exactly") {
  Rng rng(31);
  for (int trial = 0; trial < 50; ++trial) {
    auto ep = random_episode(rng);
    auto res = gae(ep.signal, ep.values, ep.bootstrap, 0.95, 0.0, ep.dones, ep.tls);
    const int n = static_cast<int>(ep.signal.size());
    for (int t = 0; t < n; ++t) {
      double next_value;
      if (ep.dones[t])
        next_value = ep.tls[t] ? ep.bootstrap[t] : 0.0;
      else if (t == n - 1)
        next_value = ep.bootstrap[t];
      else
        next_value = ep.values[t + 1];
      const double delta = ep.signal[t] + 0.95 * next_value - ep.values[t];
      CHECK(res.adv[t] == delta);  // exact, no tolerance
    }
  }
}

TEST_CASE("gae with lambda 1 and zero values is the discounted return-to-go") {
  Rng rng(32);
  const int n = 12;
  Vec signal(n);
  for (int i = 0; i < n; ++i) signal[i] = rng.normal();
  Vec values = Vec::Zero(n);
  Vec bootstrap = Vec::Zero(n);
  std::vector<std::uint8_t> dones(n, 0), tls(n, 0);
  dones[n - 1] = 1;
  const double gamma = 0.9;
  auto res = gae(signal, values, bootstrap, gamma, 1.0, dones, tls);
  for (int t = 0; t < n; ++t) {
    double ret = 0.0;
    for (int u = n - 1; u >= t; --u) ret = signal[u] + gamma * ret;
    CHECK(res.adv[t] == Catch::Approx(ret).margin(1e-10));
  }
}

TEST_CASE("gae agrees with the double-sum oracle on random episodes") {
  Rng rng(33);
  for (double lambda : {0.0, 0.97, 1.0}) {
    for (int trial = 0; trial < 400; ++trial) {
      auto ep = random_episode(rng);
      const double gamma = rng.uniform(0.8, 0.999);
      auto res = gae(ep.signal, ep.values, ep.bootstrap, gamma, lambda, ep.dones,
                     ep.tls);
      Vec oracle = gae_double_sum(ep.signal, ep.values, ep.bootstrap, gamma,
                                  lambda, ep.dones, ep.tls);
      CHECK((res.adv - oracle).lpNorm<Eigen::Infinity>() < 1e-10);
      CHECK((res.ret - (oracle + ep.values)).lpNorm<Eigen::Infinity>() < 1e-10);
    }
  }
}

TEST_CASE("gae never mixes information across a failure terminal") {
  Rng rng(34);
  const int n = 10;
  Vec signal(n), values(n);
  for (int i = 0; i < n; ++i) {
    signal[i] = rng.normal();
    values[i] = rng.normal();
  }
  std::vector<std::uint8_t> dones(n, 0), tls(n, 0);
  dones[4] = 1;  // failure terminal, no time limit
  dones[n - 1] = 1;
  Vec bootstrap = Vec::Zero(n);

  auto base = gae(signal, values, bootstrap, 0.99, 0.97, dones, tls);
  Vec perturbed = signal;
  for (int i = 5; i < n; ++i) perturbed[i] += rng.normal();
  auto moved = gae(perturbed, values, bootstrap, 0.99, 0.97, dones, tls);
  for (int t = 0; t <= 4; ++t) CHECK(base.adv[t] == moved.adv[t]);
  CHECK(base.adv[5] != moved.adv[5]);
}

TEST_CASE("zero_mean and standardize examples") {
  Vec v(3);
  v << 1.0, 2.0, 3.0;
  Vec zm = zero_mean(v);
  CHECK(zm[0] == Catch::Approx(-1.0));
  CHECK(zm[1] == Catch::Approx(0.0).margin(1e-15));
  CHECK(zm[2] == Catch::Approx(1.0));

  Vec st = standardize(v);
  CHECK(st[0] == Catch::Approx(-1.224744871391589).epsilon(1e-12));
  CHECK(st[1] == Catch::Approx(0.0).margin(1e-14));
  CHECK(st[2] == Catch::Approx(1.224744871391589).epsilon(1e-12));

  Vec flat = Vec::Constant(5, 3.7);
  CHECK(standardize(flat).lpNorm<Eigen::Infinity>() == 0.0);
  CHECK_THROWS_AS(standardize(Vec(0)), ContractViolation);
}

TEST_CASE("standardize yields zero mean and unit population std") {
  Rng rng(35);
  for (int trial = 0; trial < 30; ++trial) {
    const int n = 3 + static_cast<int>(rng.below(40));
    Vec v(n);
    for (int i = 0; i < n; ++i) v[i] = 5.0 * rng.normal() + 2.0;
    Vec st = standardize(v);
    CHECK(std::abs(st.mean()) < 1e-10);
    CHECK(std::abs(st.squaredNorm() / n - 1.0) < 1e-10);
  }
}
