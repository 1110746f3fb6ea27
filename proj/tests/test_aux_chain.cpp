// Copyright 2026 The irec Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "irec/aux_chain.hpp"
#include "irec/errors.hpp"

namespace {

using irec::DiagGaussian;
using irec::Seed64;
using irec::Vector;

TEST(SamplesPerStep, Examples) {
  EXPECT_EQ(irec::samples_per_step(3.0, 0.0), 21u);
  EXPECT_EQ(irec::samples_per_step(3.0, 0.2), 37u);
  EXPECT_EQ(irec::samples_per_step(5.0, 0.0), 149u);
  EXPECT_THROW(irec::samples_per_step(0.0, 0.0), irec::UsageError);
  EXPECT_THROW(irec::samples_per_step(3.0, -0.1), irec::UsageError);
  EXPECT_THROW(irec::samples_per_step(NAN, 0.0), irec::UsageError);
  EXPECT_THROW(irec::samples_per_step(30.0, 0.0), irec::ConfigError);
  EXPECT_THROW(irec::samples_per_step(1e-18, 0.0), irec::ConfigError);
}

TEST(StepsForKl, Examples) {
  EXPECT_EQ(irec::steps_for_kl(0.0, 3.0), 1u);
  EXPECT_EQ(irec::steps_for_kl(3.0, 3.0), 1u);
  EXPECT_EQ(irec::steps_for_kl(3.0001, 3.0), 2u);
  EXPECT_EQ(irec::steps_for_kl(10.0, 3.0), 4u);
  EXPECT_EQ(irec::steps_for_kl(30.0, 3.0), 10u);
  EXPECT_EQ(irec::steps_for_kl(100.0, 3.0), 34u);
  EXPECT_THROW(irec::steps_for_kl(-1.0, 3.0), irec::UsageError);
  EXPECT_THROW(irec::steps_for_kl(INFINITY, 3.0), irec::UsageError);
}

TEST(Schedule, FourStepExample) {
  const auto s = irec::build_schedule(10.0, 3.0, 0.0);
  ASSERT_EQ(s.K, 4u);
  const double expected[] = {0.334482, 0.279405, 0.223306, 0.162807};
  for (int k = 0; k < 4; ++k) EXPECT_NEAR(s.sigma_sq[k], expected[k], 1e-6) << k;
  EXPECT_EQ(s.remaining.front(), 1.0);
  EXPECT_EQ(s.remaining.back(), 0.0);
  EXPECT_EQ(s.M, 21u);
}

TEST(Schedule, SingleStepTakesEverything) {
  const auto s = irec::build_schedule(0.5, 3.0, 0.0);
  ASSERT_EQ(s.K, 1u);
  EXPECT_EQ(s.sigma_sq[0], 1.0);
}

TEST(Schedule, InvariantsAcrossK) {
  for (std::uint32_t K = 1; K <= 200; ++K) {
    const auto s = irec::build_schedule_for_steps(K, 3.0, 0.2);
    ASSERT_EQ(s.sigma_sq.size(), K);
    const double total = std::accumulate(s.sigma_sq.begin(), s.sigma_sq.end(), 0.0);
    EXPECT_NEAR(total, 1.0, 1e-12) << K;
    for (std::uint32_t k = 0; k < K; ++k) {
      EXPECT_GT(s.sigma_sq[k], 0.0);
      EXPECT_NEAR(s.remaining[k] - s.remaining[k + 1], s.sigma_sq[k], 1e-15);
      if (k + 1 < K) {
        // Variance ratio follows the power law.
        EXPECT_NEAR(s.sigma_sq[k] / s.remaining[k], std::pow(K - k, -0.79), 1e-13);
        // Shares shrink with k.
        EXPECT_GT(s.sigma_sq[k], s.sigma_sq[k + 1]);
      }
    }
  }
}

TEST(Schedule, ExponentIsConfigurable) {
  const auto s = irec::build_schedule_for_steps(5, 3.0, 0.0, 0.5);
  EXPECT_NEAR(s.sigma_sq[0], std::pow(5.0, -0.5), 1e-14);
  EXPECT_THROW(irec::build_schedule_for_steps(0, 3.0, 0.0), irec::UsageError);
}

// Marginal of a_1 under q(z) p(a_1 | z), derived directly: a_1 = g z + noise.
TEST(AuxTarget, FirstStepMatchesClosedForm) {
  const auto s = irec::build_schedule_for_steps(4, 3.0, 0.0);
  const DiagGaussian q({1.5, -0.4}, {0.3, 2.0});
  const auto target = irec::aux_target(irec::initial_state(q), s);
  const double g = s.sigma_sq[0];
  for (int i = 0; i < 2; ++i) {
    EXPECT_NEAR(target.mean(i), g * q.mean(i), 1e-15);
    EXPECT_NEAR(target.variance(i), g * s.remaining[1] + g * g * q.variance(i), 1e-15);
  }
}

// Monte Carlo: draw z ~ q and a_1 | z under the prior's chain, compare the
// empirical moments of a_1 with aux_target.
TEST(AuxTarget, FirstStepMatchesMonteCarlo) {
  const auto s = irec::build_schedule_for_steps(3, 3.0, 0.0);
  const DiagGaussian q({2.0}, {0.5});
  std::mt19937_64 rng(99);
  std::normal_distribution<double> n;
  const int N = 400000;
  // Under p, a_1 ~ N(0, v1) and rest ~ N(0, 1 - v1), independent; z = a_1 + rest.
  // Sampling (z, a_1) from q(z) p(a_1 | z): p(a_1 | z) = N(v1 z, v1 (1 - v1)).
  const double v1 = s.sigma_sq[0];
  double sum = 0.0, sum2 = 0.0;
  for (int i = 0; i < N; ++i) {
    const double z = q.mean(0) + q.std(0) * n(rng);
    const double a = v1 * z + std::sqrt(v1 * (1 - v1)) * n(rng);
    sum += a;
    sum2 += a * a;
  }
  const double mean = sum / N, var = sum2 / N - mean * mean;
  const auto t = irec::aux_target(irec::initial_state(q), s);
  EXPECT_NEAR(mean, t.mean(0), 4.0 * std::sqrt(var / N));
  EXPECT_NEAR(var, t.variance(0), 4.0 * var * std::sqrt(2.0 / N));
}

TEST(ConditionalPrior, FirstStepExample) {
  const auto s = irec::build_schedule_for_steps(2, 3.0, 0.0);
  const auto st = irec::initial_state(DiagGaussian::standard(1));
  const auto c = irec::conditional_prior(st, s, Vector{2.0});
  const double v1 = s.sigma_sq[0];
  EXPECT_NEAR(c.mean(0), 2.0 * v1, 1e-15);
  EXPECT_NEAR(c.variance(0), v1 * (1.0 - v1), 1e-15);
}

// Posterior of z after observing a_{k+1}, against product-of-Gaussians
// conditioning done from scratch.
TEST(PosteriorUpdate, MatchesGaussianConditioning) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n;
  std::uniform_real_distribution<double> u(0.05, 2.0);
  for (int trial = 0; trial < 200; ++trial) {
    const std::uint32_t K = 2 + trial % 7;
    const auto s = irec::build_schedule_for_steps(K, 3.0, 0.0);
    const DiagGaussian q({2.0 * n(rng)}, {u(rng)});
    auto st = irec::initial_state(q);
    double mu = q.mean(0), var = q.variance(0), b = 0.0;
    for (std::uint32_t k = 0; k + 1 < K; ++k) {
      const double a = n(rng);
      const double g = s.sigma_sq[k] / s.remaining[k];
      // p(a | z, b) = N(a; g (z - b), g s_next) is, in z, N(b + a/g, s_next / g).
      const double lik_mean = b + a / g;
      const double lik_var = s.remaining[k + 1] / g;
      const double post_var = 1.0 / (1.0 / var + 1.0 / lik_var);
      const double post_mean = post_var * (mu / var + lik_mean / lik_var);
      st = irec::posterior_update(st, s, Vector{a});
      EXPECT_NEAR(st.nu[0], post_mean, 1e-10 * std::max(1.0, std::abs(post_mean)));
      EXPECT_NEAR(st.rho_sq[0], post_var, 1e-12);
      mu = post_mean;
      var = post_var;
      b += a;
      EXPECT_NEAR(st.partial_sum[0], b, 1e-14);
    }
  }
}

TEST(PosteriorUpdate, SingleStepCollapsesOntoSample) {
  const auto s = irec::build_schedule_for_steps(1, 3.0, 0.0);
  const auto st = irec::posterior_update(irec::initial_state(DiagGaussian({0.3}, {0.7})), s,
                                         Vector{1.25});
  EXPECT_NEAR(st.nu[0], 1.25, 1e-15);
  EXPECT_EQ(st.rho_sq[0], 0.0);
  EXPECT_EQ(st.k, 1u);
  EXPECT_THROW(irec::aux_target(st, s), irec::UsageError);
  EXPECT_THROW(irec::posterior_update(st, s, Vector{0.0}), irec::UsageError);
}

TEST(PosteriorUpdate, DimensionMismatch) {
  const auto s = irec::build_schedule_for_steps(2, 3.0, 0.0);
  EXPECT_THROW(irec::posterior_update(irec::initial_state(DiagGaussian::standard(2)), s,
                                      Vector{0.0}),
               irec::UsageError);
}

// With q = p every per-step target equals the step prior.
TEST(AuxChain, TargetEqualsPriorWhenQIsP) {
  const auto s = irec::build_schedule_for_steps(6, 3.0, 0.0);
  auto st = irec::initial_state(DiagGaussian::standard(3));
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n;
  for (std::uint32_t k = 0; k < s.K; ++k) {
    const auto t = irec::aux_target(st, s);
    for (int i = 0; i < 3; ++i) {
      EXPECT_NEAR(t.mean(i), 0.0, 1e-12);
      EXPECT_NEAR(t.std(i), s.sigma(k), 1e-12);
    }
    if (k + 1 == s.K) break;
    Vector a(3);
    for (auto& x : a) x = s.sigma(k) * n(rng);
    st = irec::posterior_update(st, s, a);
  }
  const auto profile = irec::chain_kl_profile(DiagGaussian::standard(3), s, 100, Seed64{1});
  for (double kl : profile) EXPECT_NEAR(kl, 0.0, 1e-12);
}

// Drawing each a_k from q(a_k | a_<k) and summing reproduces q(z).
TEST(AuxChain, AncestralSamplingMarginalisesToQ) {
  const auto s = irec::build_schedule_for_steps(5, 3.0, 0.0);
  const DiagGaussian q({1.2}, {0.4});
  std::mt19937_64 rng(17);
  std::normal_distribution<double> n;
  const int N = 100000;
  double sum = 0.0, sum2 = 0.0;
  for (int i = 0; i < N; ++i) {
    auto st = irec::initial_state(q);
    for (std::uint32_t k = 0; k < s.K; ++k) {
      const auto t = irec::aux_target(st, s);
      st = irec::posterior_update(st, s, Vector{t.mean(0) + t.std(0) * n(rng)});
    }
    sum += st.partial_sum[0];
    sum2 += st.partial_sum[0] * st.partial_sum[0];
  }
  const double mean = sum / N, var = sum2 / N - mean * mean;
  EXPECT_NEAR(mean, 1.2, 4.0 * std::sqrt(var / N));
  EXPECT_NEAR(var, 0.16, 4.0 * 0.16 * std::sqrt(2.0 / N));
}

TEST(ChainKlProfile, SumsToTotalKl) {
  const DiagGaussian q({3.0}, {std::sqrt(0.1)});
  const double kl = irec::kl_divergence(q, DiagGaussian::standard(1));
  EXPECT_NEAR(kl, 5.2013, 1e-4);
  const auto s = irec::build_schedule(kl, 3.0, 0.0);
  const auto profile = irec::chain_kl_profile(q, s, 20000, Seed64{4});
  ASSERT_EQ(profile.size(), s.K);
  const double total = std::accumulate(profile.begin(), profile.end(), 0.0);
  EXPECT_NEAR(total, kl, 0.02 * kl);
  EXPECT_THROW(irec::chain_kl_profile(q, s, 99), irec::UsageError);
}

TEST(ChainKlProfile, Reproducible) {
  const DiagGaussian q({0.5, -1.0}, {0.3, 0.6});
  const auto s = irec::build_schedule(irec::kl_divergence(q, DiagGaussian::standard(2)), 1.0, 0.0);
  EXPECT_EQ(irec::chain_kl_profile(q, s, 200, Seed64{3}), irec::chain_kl_profile(q, s, 200, Seed64{3}));
}

}  // namespace
