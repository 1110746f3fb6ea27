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

// The randomness shared by encoder and decoder.
//
// Every scalar is addressed by (seed, block, step, sample, dim) and computed
// on demand, so beams can be expanded in any order and blocks decoded in
// parallel. The construction is normative (see docs/FORMAT.md):
//
//   key      = seed (low word, high word)
//   counter  = (block, step, sample, dim / 2)
//   words    = Philox4x32-10(counter, key) = x0 x1 x2 x3
//   lane 0   = x0 << 32 | x1,  lane 1 = x2 << 32 | x3
//   uniform  = ((lane >> 11) + 0.5) * 2^-53            in (0, 1)
//   radius   = sqrt(-2 ln u0),  turn = u1
//   dim 2j   = radius * cos(2 pi turn)
//   dim 2j+1 = radius * sin(2 pi turn)   (omitted when dims is odd and last)
//
// ln, cos and sin come from irec::detmath so the stream is bit-identical on
// every IEEE-754 platform.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "irec/detmath.hpp"
#include "irec/errors.hpp"

namespace irec {

struct Seed64 {
  std::uint64_t value = 0;
  friend bool operator==(Seed64, Seed64) = default;
};

struct SampleAddress {
  std::uint32_t block = 0;
  std::uint32_t step = 0;
  std::uint32_t sample = 0;
  std::uint32_t dim = 0;
  friend bool operator==(const SampleAddress&, const SampleAddress&) = default;
};

namespace philox {

using Counter = std::array<std::uint32_t, 4>;
using Key = std::array<std::uint32_t, 2>;

inline constexpr std::uint32_t kMul0 = 0xD2511F53u;
inline constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
inline constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
inline constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

constexpr Counter philox4x32_10(Counter ctr, Key key) {
  for (int round = 0; round < 10; ++round) {
    const std::uint64_t p0 = std::uint64_t{kMul0} * ctr[0];
    const std::uint64_t p1 = std::uint64_t{kMul1} * ctr[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32), lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32), lo1 = static_cast<std::uint32_t>(p1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += kWeyl0;
    key[1] += kWeyl1;
  }
  return ctr;
}

}  // namespace philox

// The two 64-bit lanes for counter (block, step, sample, pair).
inline std::array<std::uint64_t, 2> stream_words(Seed64 seed, std::uint32_t block,
                                                 std::uint32_t step, std::uint32_t sample,
                                                 std::uint32_t pair) {
  const philox::Key key{static_cast<std::uint32_t>(seed.value),
                        static_cast<std::uint32_t>(seed.value >> 32)};
  const auto x = philox::philox4x32_10({block, step, sample, pair}, key);
  return {(std::uint64_t{x[0]} << 32) | x[1], (std::uint64_t{x[2]} << 32) | x[3]};
}

// Top 53 bits, centred in their bucket. The last bucket's centre 1 - 2^-54
// is not representable and would round to 1, so it maps to 1 - 2^-53.
inline double word_to_uniform(std::uint64_t word) {
  return std::min((static_cast<double>(word >> 11) + 0.5) * 0x1p-53, 1.0 - 0x1p-53);
}

// A single uniform in (0, 1) from lane 0 of pair 0 at the given address.
// The encoder's stochastic selection uses sample index M, which no
// candidate ever occupies.
inline double draw_uniform(Seed64 seed, std::uint32_t block, std::uint32_t step,
                           std::uint32_t sample) {
  return word_to_uniform(stream_words(seed, block, step, sample, 0)[0]);
}

// Fills out[0..n) with standard normals for address (block, step, sample).
inline void draw_vector_into(Seed64 seed, std::uint32_t block, std::uint32_t step,
                             std::uint32_t sample, std::span<double> out) {
  const std::size_t dims = out.size();
  for (std::size_t d = 0; d < dims; d += 2) {
    const auto lanes = stream_words(seed, block, step, sample, static_cast<std::uint32_t>(d / 2));
    const double u0 = word_to_uniform(lanes[0]);
    const double u1 = word_to_uniform(lanes[1]);
    const double radius = std::sqrt(-2.0 * detmath::log(u0));
    const auto [c, s] = detmath::cos_sin_turn(u1);
    out[d] = radius * c;
    if (d + 1 < dims) out[d + 1] = radius * s;
  }
}

inline std::vector<double> draw_vector(Seed64 seed, std::uint32_t block, std::uint32_t step,
                                       std::uint32_t sample, std::uint32_t dims) {
  if (dims == 0) throw UsageError("draw_vector: dims must be >= 1");
  std::vector<double> out(dims);
  draw_vector_into(seed, block, step, sample, out);
  return out;
}

// Single scalar draw at a full address. Identical to the matching entry of
// draw_vector for any dims > address.dim.
inline double draw_scalar(Seed64 seed, const SampleAddress& a) {
  const auto lanes = stream_words(seed, a.block, a.step, a.sample, a.dim / 2);
  const double radius = std::sqrt(-2.0 * detmath::log(word_to_uniform(lanes[0])));
  const auto [c, s] = detmath::cos_sin_turn(word_to_uniform(lanes[1]));
  return radius * ((a.dim & 1u) ? s : c);
}

// A draw from p(a_k) = N(0, sigma_k^2 I) in whitened coordinates.
inline std::vector<double> scale_to_aux(std::span<const double> u, double sigma_k) {
  if (!(sigma_k > 0.0)) throw UsageError("scale_to_aux: sigma_k must be positive");
  std::vector<double> out(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) out[i] = sigma_k * u[i];
  return out;
}

}  // namespace irec
