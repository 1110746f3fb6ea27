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

// Index coding of a Gaussian sample.
//
// The encoder sees a target q over whitened latents (prior N(0, I)) and
// returns one index per auxiliary step; the decoder turns the indices back
// into z using only the shared stream. Step k offers the M candidates
//
//   a_{k,m} = sigma_k * draw_vector(seed, block, k, m, D),   m in [0, M)
//
// and z is their running sum in step order. The encoder runs a beam search
// over index prefixes scored by the cumulative log importance weight
// sum_j log q(a_j | a_<j) / p(a_j), keeping the best B prefixes per step.
// Ties are broken towards the lexicographically smallest index tuple, which
// is a total order, so the surviving set does not depend on evaluation
// order.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "irec/aux_chain.hpp"
#include "irec/errors.hpp"
#include "irec/gauss.hpp"
#include "irec/sample_stream.hpp"

namespace irec {

// Beam expansion touches B * M * D scalars per step; refuse anything larger.
inline constexpr std::uint64_t kMaxCandidateScalars = std::uint64_t{1} << 26;

struct RecConfig {
  double omega = 3.0;
  double epsilon = 0.2;
  std::uint32_t beams = 20;
  bool stochastic_final = false;

  std::uint64_t samples_per_step() const { return irec::samples_per_step(omega, epsilon); }

  void validate(std::size_t dims = 1) const {
    const std::uint64_t m = samples_per_step();
    if (beams == 0) throw UsageError("beams must be >= 1");
    if (stochastic_final && beams != 1) {
      throw UsageError("stochastic selection is only defined for a single beam");
    }
    const long double work = static_cast<long double>(beams) * m * dims;
    if (work > static_cast<long double>(kMaxCandidateScalars)) {
      throw ConfigError("beams * M * dims = " + std::to_string(static_cast<double>(work)) +
                        " exceeds the candidate budget of 2^26 scalars");
    }
  }
};

// Lossless-compression defaults: omega 3, epsilon 0.2, 20 beams.
inline RecConfig lossless_defaults() { return RecConfig{3.0, 0.2, 20, false}; }
// Lossy-compression defaults: omega 3, epsilon 0, 10 beams.
inline RecConfig lossy_defaults() { return RecConfig{3.0, 0.0, 10, false}; }

struct IndexTuple {
  std::vector<std::uint32_t> indices;
  friend bool operator==(const IndexTuple&, const IndexTuple&) = default;
  friend auto operator<=>(const IndexTuple&, const IndexTuple&) = default;
};

struct Beam {
  std::vector<std::uint32_t> prefix;
  ChainState state;
  double log_weight = 0.0;
};

struct EncodeResult {
  IndexTuple indices;
  Vector z;          // whitened sample the decoder will reproduce
  double log_ratio;  // log q(z) / p(z) with p = N(0, I)
};

enum class SelectMode { kGreedy, kStochastic };

// Index among `weights` (non-negative): the smallest argmax in greedy mode,
// or the first index whose cumulative weight exceeds uniform * total in
// stochastic mode.
inline std::uint32_t importance_select(std::span<const double> weights, SelectMode mode,
                                       double uniform = 0.5) {
  if (weights.empty()) throw UsageError("importance_select: empty weight vector");
  double total = 0.0;
  for (double w : weights) {
    if (!std::isfinite(w) || w < 0.0) throw NumericError("importance_select: invalid weight");
    total += w;
  }
  if (!(total > 0.0)) throw NumericError("importance_select: all weights are zero");
  if (mode == SelectMode::kGreedy) {
    return static_cast<std::uint32_t>(std::max_element(weights.begin(), weights.end()) -
                                      weights.begin());
  }
  if (!(uniform > 0.0 && uniform < 1.0)) throw UsageError("importance_select: uniform not in (0,1)");
  const double target = uniform * total;
  double cumulative = 0.0;
  std::uint32_t last_positive = 0;
  for (std::uint32_t i = 0; i < weights.size(); ++i) {
    if (weights[i] <= 0.0) continue;
    last_positive = i;
    cumulative += weights[i];
    if (cumulative > target) return i;
  }
  return last_positive;  // rounding left target just above the final sum
}

// Same selection from log weights; weights are shifted by their maximum
// before exponentiating.
inline std::uint32_t importance_select_log(std::span<const double> log_weights, SelectMode mode,
                                           double uniform = 0.5) {
  if (log_weights.empty()) throw UsageError("importance_select_log: empty weight vector");
  double top = -std::numeric_limits<double>::infinity();
  for (double lw : log_weights) {
    if (std::isnan(lw)) throw NumericError("importance_select_log: NaN log weight");
    top = std::max(top, lw);
  }
  if (!std::isfinite(top)) throw NumericError("importance_select_log: no finite log weight");
  std::vector<double> w(log_weights.size());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = std::exp(log_weights[i] - top);
  return importance_select(w, mode, uniform);
}

namespace detail {

enum class TieBreak { kSmallestTuple, kLargestTuple };

struct Candidate {
  std::uint32_t beam;
  std::uint32_t sample;
  double log_weight;
};

// sum += sigma * u(step, sample). Encoder and decoder both build z through
// this, so they perform the same operations in the same order.
inline void add_aux_sample(Seed64 seed, std::uint32_t block, std::uint32_t step,
                           std::uint32_t sample, double sigma, std::span<double> scratch,
                           std::span<double> sum) {
  draw_vector_into(seed, block, step, sample, scratch);
  for (std::size_t i = 0; i < sum.size(); ++i) sum[i] = sum[i] + sigma * scratch[i];
}

inline void check_schedule(const AuxSchedule& s, const RecConfig& cfg) {
  if (s.M != cfg.samples_per_step() || s.omega != cfg.omega || s.epsilon != cfg.epsilon) {
    throw UsageError("schedule was built for different omega/epsilon than the codec config");
  }
  if (s.sigma_sq.size() != s.K || s.remaining.size() != s.K + std::size_t{1}) {
    throw UsageError("malformed schedule");
  }
}

// Lexicographic order on (prefix of beam, sample).
inline bool tuple_less(const std::vector<Beam>& beams, const Candidate& a, const Candidate& b) {
  if (a.beam != b.beam) return beams[a.beam].prefix < beams[b.beam].prefix;
  return a.sample < b.sample;
}

inline EncodeResult encode_impl(const DiagGaussian& q, const AuxSchedule& s, const RecConfig& cfg,
                                Seed64 seed, std::uint32_t block, TieBreak tie) {
  const std::size_t dims = q.dims();
  cfg.validate(dims);
  check_schedule(s, cfg);
  const std::uint64_t M = s.M;

  std::vector<Beam> beams;
  beams.push_back(Beam{{}, initial_state(q), 0.0});

  std::vector<double> samples(static_cast<std::size_t>(M) * dims);
  std::vector<double> scratch(dims);
  std::vector<Candidate> candidates;

  for (std::uint32_t k = 0; k < s.K; ++k) {
    const double sigma = s.sigma(k);
    for (std::uint64_t m = 0; m < M; ++m) {
      std::span<double> a(samples.data() + m * dims, dims);
      std::fill(a.begin(), a.end(), 0.0);
      add_aux_sample(seed, block, k, static_cast<std::uint32_t>(m), sigma, scratch, a);
    }
    const DiagGaussian prior = aux_prior(s, k, dims);

    if (cfg.stochastic_final) {
      // Single beam; sample the index with probability proportional to the
      // per-step importance weight.
      const DiagGaussian target = aux_target(beams[0].state, s);
      std::vector<double> log_w(static_cast<std::size_t>(M));
      for (std::uint64_t m = 0; m < M; ++m) {
        log_w[m] = log_density_ratio(target, prior, {samples.data() + m * dims, dims});
      }
      const double u = draw_uniform(seed, block, k, static_cast<std::uint32_t>(M));
      const std::uint32_t pick = importance_select_log(log_w, SelectMode::kStochastic, u);
      Beam next{beams[0].prefix, {}, beams[0].log_weight + log_w[pick]};
      next.prefix.push_back(pick);
      next.state = posterior_update(beams[0].state, s, {samples.data() + pick * dims, dims});
      beams[0] = std::move(next);
      continue;
    }

    candidates.clear();
    candidates.reserve(beams.size() * M);
    for (std::uint32_t b = 0; b < beams.size(); ++b) {
      const DiagGaussian target = aux_target(beams[b].state, s);
      for (std::uint64_t m = 0; m < M; ++m) {
        const double lw = log_density_ratio(target, prior, {samples.data() + m * dims, dims});
        if (std::isnan(lw)) throw NumericError("encode: NaN importance weight");
        candidates.push_back({b, static_cast<std::uint32_t>(m), beams[b].log_weight + lw});
      }
    }
    const std::size_t keep = std::min<std::size_t>(cfg.beams, candidates.size());
    auto better = [&](const Candidate& x, const Candidate& y) {
      if (x.log_weight != y.log_weight) return x.log_weight > y.log_weight;
      return tie == TieBreak::kSmallestTuple ? tuple_less(beams, x, y) : tuple_less(beams, y, x);
    };
    std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(keep),
                      candidates.end(), better);

    std::vector<Beam> next;
    next.reserve(keep);
    for (std::size_t i = 0; i < keep; ++i) {
      const Candidate& c = candidates[i];
      Beam nb;
      nb.prefix = beams[c.beam].prefix;
      nb.prefix.push_back(c.sample);
      nb.state = posterior_update(beams[c.beam].state, s, {samples.data() + c.sample * dims, dims});
      nb.log_weight = c.log_weight;
      next.push_back(std::move(nb));
    }
    beams = std::move(next);
  }

  // Final choice: highest log q(z)/p(z), recomputed from the decoder's z.
  const DiagGaussian prior = DiagGaussian::standard(dims);
  std::size_t best = 0;
  double best_ratio = -std::numeric_limits<double>::infinity();
  Vector best_z;
  for (std::size_t b = 0; b < beams.size(); ++b) {
    Vector z(dims, 0.0);
    for (std::uint32_t k = 0; k < s.K; ++k) {
      add_aux_sample(seed, block, k, beams[b].prefix[k], s.sigma(k), scratch, z);
    }
    const double ratio = log_density_ratio(q, prior, z);
    bool take = ratio > best_ratio;
    if (!take && ratio == best_ratio) {
      take = tie == TieBreak::kSmallestTuple ? beams[b].prefix < beams[best].prefix
                                             : beams[best].prefix < beams[b].prefix;
    }
    if (take || best_z.empty()) {
      best = b;
      best_ratio = ratio;
      best_z = std::move(z);
    }
  }
  return EncodeResult{IndexTuple{beams[best].prefix}, std::move(best_z), best_ratio};
}

}  // namespace detail

// Encodes a whitened target. `s` must come from build_schedule for
// kl_divergence(q, N(0, I)) with the config's omega and epsilon.
inline EncodeResult encode(const DiagGaussian& q, const AuxSchedule& s, const RecConfig& cfg,
                           Seed64 seed, std::uint32_t block) {
  return detail::encode_impl(q, s, cfg, seed, block, detail::TieBreak::kSmallestTuple);
}

// Regenerates z from the indices. Needs no knowledge of the target, the beam
// count or the selection mode.
inline Vector decode(const IndexTuple& t, const AuxSchedule& s, Seed64 seed, std::uint32_t block,
                     std::uint32_t dims) {
  if (dims == 0) throw UsageError("decode: dims must be >= 1");
  if (t.indices.size() != s.K) {
    throw CorruptStreamError("decode: index tuple has " + std::to_string(t.indices.size()) +
                             " entries, schedule expects " + std::to_string(s.K));
  }
  Vector z(dims, 0.0), scratch(dims);
  for (std::uint32_t k = 0; k < s.K; ++k) {
    if (t.indices[k] >= s.M) {
      throw CorruptStreamError("decode: index " + std::to_string(t.indices[k]) + " >= M = " +
                               std::to_string(s.M));
    }
    detail::add_aux_sample(seed, block, k, t.indices[k], s.sigma(k), scratch, z);
  }
  return z;
}

inline Vector decode(const IndexTuple& t, const AuxSchedule& s, const RecConfig& cfg, Seed64 seed,
                     std::uint32_t block, std::uint32_t dims) {
  if (s.M != cfg.samples_per_step()) {
    throw UsageError("decode: schedule was built for a different M");
  }
  return decode(t, s, seed, block, dims);
}

}  // namespace irec
