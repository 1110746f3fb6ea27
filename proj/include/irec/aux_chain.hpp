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

// Auxiliary-variable decomposition z = a_1 + ... + a_K.
//
// In whitened coordinates the coding distribution is N(0, I) and each
// auxiliary variable has coding distribution p(a_k) = N(0, sigma_k^2 I) with
// sum_k sigma_k^2 = 1. Conditioned on the prefix a_1..a_{k-1}, the target
// for a_k and the running posterior over z are Gaussian with closed forms
// evaluated per dimension below. Notation in the code:
//
//   nu, rho_sq       running posterior q(z | a_1..a_k) = N(nu, rho_sq)
//   partial_sum      b_k = a_1 + ... + a_k
//   remaining        s_k^2 = sigma_{k+1}^2 + ... + sigma_K^2

#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "irec/detmath.hpp"
#include "irec/errors.hpp"
#include "irec/gauss.hpp"
#include "irec/sample_stream.hpp"

namespace irec {

// Exponent of the variance-ratio power law sigma_k^2 / remaining = (K+1-k)^-0.79.
inline constexpr double kPowerLawExponent = 0.79;

// Indices are serialised as digits of a mixed-radix integer, one per step,
// so M has to fit the index width.
inline constexpr std::uint64_t kMaxSamplesPerStep = std::uint64_t{1} << 32;

// M = ceil(exp(omega * (1 + epsilon))). Evaluated with the reproducible exp
// because the decoder recomputes it from the container header.
inline std::uint64_t samples_per_step(double omega, double epsilon) {
  if (!(omega > 0.0) || !std::isfinite(omega)) {
    throw UsageError("omega must be a positive finite number of nats");
  }
  if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) {
    throw UsageError("epsilon must be a non-negative finite number");
  }
  const double m = std::ceil(detmath::exp(omega * (1.0 + epsilon)));
  if (!(m <= static_cast<double>(kMaxSamplesPerStep))) {
    throw ConfigError("M = ceil(exp(omega*(1+epsilon))) exceeds 2^32");
  }
  if (m < 2.0) {
    throw ConfigError("M = ceil(exp(omega*(1+epsilon))) must be at least 2");
  }
  return static_cast<std::uint64_t>(m);
}

struct AuxSchedule {
  std::uint32_t K = 1;
  std::vector<double> sigma_sq;   // per-step coding variances, sums to 1
  std::vector<double> remaining;  // remaining[k] = s_k^2, size K+1, remaining[K] == 0
  double omega = 3.0;
  double epsilon = 0.0;
  std::uint64_t M = 0;

  double sigma(std::uint32_t k) const { return std::sqrt(sigma_sq[k]); }
};

// Schedule for a known number of steps; this is all the decoder needs.
inline AuxSchedule build_schedule_for_steps(std::uint32_t steps, double omega, double epsilon,
                                            double exponent = kPowerLawExponent) {
  if (steps == 0) throw UsageError("schedule needs at least one step");
  AuxSchedule s;
  s.M = samples_per_step(omega, epsilon);
  s.K = steps;
  s.omega = omega;
  s.epsilon = epsilon;
  s.sigma_sq.resize(steps);
  s.remaining.resize(steps + 1);
  double r = 1.0;
  s.remaining[0] = r;
  for (std::uint32_t k = 1; k <= steps; ++k) {
    // (K+1-k)^-exponent; the last step has ratio 1 and takes all of r.
    const double ratio =
        k == steps ? 1.0 : detmath::pow(static_cast<double>(steps + 1 - k), -exponent);
    const double v = r * ratio;
    s.sigma_sq[k - 1] = v;
    r = k == steps ? 0.0 : r - v;
    s.remaining[k] = r;
  }
  return s;
}

// K = max(1, ceil(total_kl / omega)).
inline std::uint32_t steps_for_kl(double total_kl, double omega) {
  if (!(total_kl >= 0.0) || !std::isfinite(total_kl)) {
    throw UsageError("total KL must be a non-negative finite number");
  }
  if (!(omega > 0.0)) throw UsageError("omega must be positive");
  const double k = std::ceil(total_kl / omega);
  if (k > static_cast<double>(std::numeric_limits<std::uint32_t>::max())) {
    throw ConfigError("K = ceil(KL/omega) does not fit in 32 bits");
  }
  return k < 1.0 ? 1u : static_cast<std::uint32_t>(k);
}

inline AuxSchedule build_schedule(double total_kl, double omega, double epsilon,
                                  double exponent = kPowerLawExponent) {
  if (!(omega > 0.0)) throw UsageError("omega must be positive");
  return build_schedule_for_steps(steps_for_kl(total_kl, omega), omega, epsilon, exponent);
}

struct ChainState {
  Vector nu;
  Vector rho_sq;
  Vector partial_sum;
  std::uint32_t k = 0;
  double remaining = 1.0;

  std::size_t dims() const { return nu.size(); }
};

inline ChainState initial_state(const DiagGaussian& q) {
  ChainState st;
  st.nu = q.mean();
  st.rho_sq.resize(q.dims());
  for (std::size_t i = 0; i < q.dims(); ++i) st.rho_sq[i] = q.variance(i);
  st.partial_sum.assign(q.dims(), 0.0);
  st.k = 0;
  st.remaining = 1.0;
  return st;
}

namespace detail {
inline void require_active(const ChainState& st, const AuxSchedule& s, const char* what) {
  if (st.k >= s.K) {
    throw UsageError(std::string(what) + ": chain exhausted (k == K == " + std::to_string(s.K) +
                     ")");
  }
}
}  // namespace detail

// Coding distribution of step k+1 as a DiagGaussian.
inline DiagGaussian aux_prior(const AuxSchedule& s, std::uint32_t k, std::size_t dims) {
  return DiagGaussian::isotropic(dims, 0.0, s.sigma(k));
}

// q(a_{k+1} | a_1..a_k):
//   mean = (nu - b) sigma^2 / s_prev
//   var  = s_next sigma^2 / s_prev + rho^2 sigma^4 / s_prev^2
inline DiagGaussian aux_target(const ChainState& st, const AuxSchedule& s) {
  detail::require_active(st, s, "aux_target");
  const double var_k = s.sigma_sq[st.k];
  const double s_prev = st.remaining;
  const double s_next = s.remaining[st.k + 1];
  const double gain = var_k / s_prev;
  Vector mean(st.dims()), stddev(st.dims());
  for (std::size_t i = 0; i < st.dims(); ++i) {
    mean[i] = (st.nu[i] - st.partial_sum[i]) * gain;
    stddev[i] = std::sqrt(s_next * gain + st.rho_sq[i] * gain * gain);
  }
  return DiagGaussian(std::move(mean), std::move(stddev));
}

// p(a_{k+1} | a_1..a_k, z): the conditional of one summand given the total.
inline DiagGaussian conditional_prior(const ChainState& st, const AuxSchedule& s,
                                      std::span<const double> z) {
  detail::require_active(st, s, "conditional_prior");
  irec::detail::require_same_dims(st.dims(), z.size(), "conditional_prior");
  const double var_k = s.sigma_sq[st.k];
  const double s_prev = st.remaining;
  const double s_next = s.remaining[st.k + 1];
  const double gain = var_k / s_prev;
  const double stddev = std::sqrt(s_next * gain);
  Vector mean(st.dims());
  for (std::size_t i = 0; i < st.dims(); ++i) mean[i] = (z[i] - st.partial_sum[i]) * gain;
  return DiagGaussian(std::move(mean), Vector(st.dims(), stddev));
}

// q(z | a_1..a_{k+1}) from q(z | a_1..a_k) and the chosen a_{k+1}.
inline ChainState posterior_update(const ChainState& st, const AuxSchedule& s,
                                   std::span<const double> a) {
  detail::require_active(st, s, "posterior_update");
  irec::detail::require_same_dims(st.dims(), a.size(), "posterior_update");
  const double var_k = s.sigma_sq[st.k];
  const double s_prev = st.remaining;
  const double s_next = s.remaining[st.k + 1];
  ChainState out;
  out.nu.resize(st.dims());
  out.rho_sq.resize(st.dims());
  out.partial_sum.resize(st.dims());
  for (std::size_t i = 0; i < st.dims(); ++i) {
    const double rho = st.rho_sq[i];
    const double den = var_k * rho + s_prev * s_next;
    out.nu[i] = (a[i] * rho * s_prev + st.partial_sum[i] * var_k * rho + st.nu[i] * s_next * s_prev) /
                den;
    out.rho_sq[i] = rho * s_prev * s_next / den;
    out.partial_sum[i] = st.partial_sum[i] + a[i];
  }
  out.k = st.k + 1;
  out.remaining = s_next;
  return out;
}

// Monte-Carlo estimate of E[KL(q(a_k | a_<k) || p(a_k))] for every step,
// by ancestral sampling of the chain. The per-step KL is analytic; only the
// prefix is sampled. Randomness comes from the shared stream (trial index
// in the block slot), so results are reproducible from the seed.
inline std::vector<double> chain_kl_profile(const DiagGaussian& q, const AuxSchedule& s,
                                            std::uint32_t trials, Seed64 seed = {0}) {
  if (trials < 100) throw UsageError("chain_kl_profile: need at least 100 trials");
  const std::size_t dims = q.dims();
  std::vector<double> sums(s.K, 0.0);
  std::vector<double> u(dims), a(dims);
  for (std::uint32_t t = 0; t < trials; ++t) {
    ChainState st = initial_state(q);
    for (std::uint32_t k = 0; k < s.K; ++k) {
      const DiagGaussian target = aux_target(st, s);
      const double sigma_k = s.sigma(k);
      double kl = 0.0;
      for (std::size_t i = 0; i < dims; ++i) {
        kl += kl_divergence_1d(target.mean(i), target.std(i), 0.0, sigma_k);
      }
      sums[k] += kl;
      if (k + 1 == s.K) break;
      draw_vector_into(seed, t, k, 0, u);
      for (std::size_t i = 0; i < dims; ++i) a[i] = target.mean(i) + target.std(i) * u[i];
      st = posterior_update(st, s, a);
    }
  }
  for (auto& v : sums) v /= trials;
  return sums;
}

}  // namespace irec
